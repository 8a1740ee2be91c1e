// File formats: run config and phantom spec JSON, JSONL pose logs, PGM frame
// directories, result JSON (round-trippable), ASCII PLY and CSV exports.
#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bifurc/eval.hpp"
#include "bifurc/pipeline.hpp"
#include "bifurc/projection.hpp"
#include "bifurc/simulate.hpp"
#include "bifurc/tracking.hpp"

namespace bifurc {

/// File-system or malformed-input failure; the CLI maps this to exit code 2.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace io {

using nlohmann::json;

inline json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw IoError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json hyperparams_to_json(const HyperParams& hp) {
  return json{{"delta_n", hp.delta_n},
              {"delta_s", hp.delta_s},
              {"delta_td", hp.delta_td},
              {"delta_h", hp.delta_h},
              {"delta_theta", hp.delta_theta},
              {"delta_sd", hp.delta_sd},
              {"delta_t", hp.delta_t},
              {"delta_bd", hp.delta_bd},
              {"eps_i", hp.eps_i},
              {"dbscan_eps", hp.dbscan_eps},
              {"dbscan_min_pts", hp.dbscan_min_pts},
              {"needle_target_mm", hp.needle_target_mm},
              {"height_axis", hp.height_axis},
              {"max_erosion_iters", hp.max_erosion_iters}};
}

inline HyperParams hyperparams_from_json(const json& j) {
  HyperParams hp;  // missing fields keep their defaults so partial overrides work
  hp.delta_n = j.value("delta_n", hp.delta_n);
  hp.delta_s = j.value("delta_s", hp.delta_s);
  hp.delta_td = j.value("delta_td", hp.delta_td);
  hp.delta_h = j.value("delta_h", hp.delta_h);
  hp.delta_theta = j.value("delta_theta", hp.delta_theta);
  hp.delta_sd = j.value("delta_sd", hp.delta_sd);
  hp.delta_t = j.value("delta_t", hp.delta_t);
  hp.delta_bd = j.value("delta_bd", hp.delta_bd);
  hp.eps_i = j.value("eps_i", hp.eps_i);
  hp.dbscan_eps = j.value("dbscan_eps", hp.dbscan_eps);
  hp.dbscan_min_pts = j.value("dbscan_min_pts", hp.dbscan_min_pts);
  hp.needle_target_mm = j.value("needle_target_mm", hp.needle_target_mm);
  hp.height_axis = j.value("height_axis", hp.height_axis);
  hp.max_erosion_iters = j.value("max_erosion_iters", hp.max_erosion_iters);
  return hp;
}

inline json calibration_to_json(const Calibration& cal) {
  return json{{"pixel_spacing", cal.pixel_spacing},
              {"origin", json::array({cal.origin_u, cal.origin_v})},
              {"u_axis", vec3_to_json(cal.u_axis)},
              {"v_axis", vec3_to_json(cal.v_axis)}};
}

inline Calibration calibration_from_json(const json& j) {
  Calibration cal;
  cal.pixel_spacing = j.value("pixel_spacing", cal.pixel_spacing);
  if (j.contains("origin")) {
    cal.origin_u = j["origin"][0].get<double>();
    cal.origin_v = j["origin"][1].get<double>();
  }
  if (j.contains("u_axis")) cal.u_axis = vec3_from_json(j["u_axis"]);
  if (j.contains("v_axis")) cal.v_axis = vec3_from_json(j["v_axis"]);
  return cal;
}

inline json scan_params_to_json(const ScanParams& sp) {
  return json{{"velocity_mm_s", sp.velocity_mm_s},
              {"frame_rate_hz", sp.frame_rate_hz},
              {"image_px", sp.image_px},
              {"depth_mm", sp.depth_mm}};
}

inline ScanParams scan_params_from_json(const json& j) {
  ScanParams sp;
  sp.velocity_mm_s = j.value("velocity_mm_s", sp.velocity_mm_s);
  sp.frame_rate_hz = j.value("frame_rate_hz", sp.frame_rate_hz);
  sp.image_px = j.value("image_px", sp.image_px);
  sp.depth_mm = j.value("depth_mm", sp.depth_mm);
  return sp;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

inline void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace io

/// Run configuration: hyperparameters, image-to-probe calibration and scan
/// kinematics, as stored in a dataset's config.json.
struct RunConfig {
  HyperParams hyperparams;
  Calibration calibration;
  ScanParams scan;
};

inline void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  io::write_json_file(io::json{{"hyperparams", io::hyperparams_to_json(cfg.hyperparams)},
                               {"calibration", io::calibration_to_json(cfg.calibration)},
                               {"scan", io::scan_params_to_json(cfg.scan)}},
                      path);
}

inline RunConfig load_config(const std::filesystem::path& path) {
  const io::json j = io::read_json_file(path);
  RunConfig cfg;
  if (j.contains("hyperparams")) cfg.hyperparams = io::hyperparams_from_json(j["hyperparams"]);
  if (j.contains("calibration")) cfg.calibration = io::calibration_from_json(j["calibration"]);
  if (j.contains("scan")) cfg.scan = io::scan_params_from_json(j["scan"]);
  return cfg;
}

inline void save_poses(const std::vector<Pose>& poses, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const Pose& p : poses) {
    io::json j{{"t", p.t},
               {"p", io::vec3_to_json(p.translation)},
               {"q", io::json::array({p.rotation.w, p.rotation.x, p.rotation.y, p.rotation.z})}};
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

inline std::vector<Pose> load_poses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Pose> poses;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    io::json j;
    try {
      j = io::json::parse(line);
    } catch (const io::json::exception& e) {
      throw IoError("malformed pose record in " + path.string() + ": " + e.what());
    }
    Pose p;
    p.t = j.at("t").get<double>();
    p.translation = io::vec3_from_json(j.at("p"));
    const auto& q = j.at("q");
    p.rotation = Quat{q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                      q[3].get<double>()}
                     .normalized();
    poses.push_back(p);
  }
  return poses;
}

inline void save_truth(const GroundTruth& truth, const std::filesystem::path& path) {
  io::json arr = io::json::array();
  for (const GroundTruthBifurcation& b : truth.bifurcations)
    arr.push_back({{"p", io::vec3_to_json(b.position)}, {"t", b.t}});
  io::write_json_file(io::json{{"bifurcations", arr}}, path);
}

inline GroundTruth load_truth(const std::filesystem::path& path) {
  const io::json j = io::read_json_file(path);
  GroundTruth truth;
  for (const auto& b : j.value("bifurcations", io::json::array()))
    truth.bifurcations.push_back({io::vec3_from_json(b.at("p")), b.value("t", 0.0)});
  return truth;
}

namespace io {

inline std::string frame_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d.pgm", index);
  return buf;
}

}  // namespace io

/// Writes the dataset directory layout: config.json, poses.jsonl,
/// frames/%06d.pgm, plus truth.json and truth_masks/ when available.
inline void save_dataset(const ScanDataset& ds, const RunConfig& cfg,
                         const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "frames", ec);
  if (ec) throw IoError("cannot create " + (dir / "frames").string());

  save_config(cfg, dir / "config.json");
  save_poses(ds.poses, dir / "poses.jsonl");
  for (const Frame& f : ds.frames) write_pgm(f.mask, dir / "frames" / io::frame_name(f.index));

  if (!ds.truth_masks.empty()) {
    fs::create_directories(dir / "truth_masks", ec);
    if (ec) throw IoError("cannot create " + (dir / "truth_masks").string());
    for (std::size_t i = 0; i < ds.truth_masks.size(); ++i)
      write_pgm(ds.truth_masks[i], dir / "truth_masks" / io::frame_name(static_cast<int>(i)));
  }
  if (ds.truth.has_value()) save_truth(*ds.truth, dir / "truth.json");
}

struct LoadedDataset {
  ScanDataset dataset;
  RunConfig config;
};

inline LoadedDataset load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a dataset directory: " + dir.string());

  LoadedDataset out;
  out.config = load_config(dir / "config.json");
  out.dataset.calibration = out.config.calibration;
  out.dataset.poses = load_poses(dir / "poses.jsonl");

  const fs::path frames_dir = dir / "frames";
  if (!fs::is_directory(frames_dir)) throw IoError("missing frames directory in " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(frames_dir))
    if (entry.path().extension() == ".pgm") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  const double dt = 1.0 / out.config.scan.frame_rate_hz;
  for (std::size_t i = 0; i < files.size(); ++i)
    out.dataset.frames.push_back({read_pgm(files[i]), static_cast<int>(i), dt * i});

  if (fs::exists(dir / "truth.json")) out.dataset.truth = load_truth(dir / "truth.json");
  if (fs::is_directory(dir / "truth_masks")) {
    std::vector<fs::path> tfiles;
    for (const auto& entry : fs::directory_iterator(dir / "truth_masks"))
      if (entry.path().extension() == ".pgm") tfiles.push_back(entry.path());
    std::sort(tfiles.begin(), tfiles.end());
    for (const auto& p : tfiles) out.dataset.truth_masks.push_back(read_pgm(p));
  }
  return out;
}

inline void save_phantom_spec(const PhantomSpec& spec, const std::filesystem::path& path,
                              const std::optional<ScanParams>& scan = std::nullopt) {
  io::json branches = io::json::array();
  for (const Branch& br : spec.branches) {
    io::json centerline = io::json::array();
    for (const Vec3& p : br.centerline) centerline.push_back(io::vec3_to_json(p));
    branches.push_back({{"centerline", centerline}, {"radii", br.radii}});
  }
  io::json bifs = io::json::array();
  for (const Vec3& b : spec.bifurcations) bifs.push_back(io::vec3_to_json(b));
  io::json out{{"branches", branches},
               {"bifurcations", bifs},
               {"noise",
                {{"flip_prob", spec.noise.flip_prob},
                 {"speckle_rate", spec.noise.speckle_rate},
                 {"speckle_radius_px",
                  io::json::array({spec.noise.speckle_radius_px_min,
                                   spec.noise.speckle_radius_px_max})},
                 {"pose_jitter_sigma", spec.noise.pose_jitter_sigma}}}};
  if (scan.has_value()) out["scan"] = io::scan_params_to_json(*scan);
  io::write_json_file(out, path);
}

struct PhantomFile {
  PhantomSpec spec;
  std::optional<ScanParams> scan;  // optional per-spec kinematics override
};

inline PhantomFile load_phantom_spec(const std::filesystem::path& path) {
  const io::json j = io::read_json_file(path);
  PhantomFile out;
  if (!j.contains("branches")) throw IoError("phantom spec needs a branches array: " + path.string());
  for (const auto& bj : j["branches"]) {
    Branch br;
    for (const auto& pj : bj.at("centerline")) br.centerline.push_back(io::vec3_from_json(pj));
    br.radii = bj.at("radii").get<std::vector<double>>();
    if (br.radii.size() == 1) br.radii.assign(br.centerline.size(), br.radii[0]);
    out.spec.branches.push_back(std::move(br));
  }
  for (const auto& bj : j.value("bifurcations", io::json::array()))
    out.spec.bifurcations.push_back(io::vec3_from_json(bj));
  if (j.contains("noise")) {
    const auto& nj = j["noise"];
    out.spec.noise.flip_prob = nj.value("flip_prob", 0.0);
    out.spec.noise.speckle_rate = nj.value("speckle_rate", 0.0);
    if (nj.contains("speckle_radius_px")) {
      out.spec.noise.speckle_radius_px_min = nj["speckle_radius_px"][0].get<double>();
      out.spec.noise.speckle_radius_px_max = nj["speckle_radius_px"][1].get<double>();
    }
    out.spec.noise.pose_jitter_sigma = nj.value("pose_jitter_sigma", 0.0);
  }
  if (j.contains("scan")) out.scan = io::scan_params_from_json(j["scan"]);
  return out;
}

inline void save_result(const PipelineResult& result, const std::filesystem::path& path) {
  io::json tracks = io::json::array();
  for (const MergedTrack& mt : result.merged_tracks) {
    io::json points = io::json::array();
    for (const TrackPoint& tp : mt.points)
      points.push_back({{"t", tp.point.t},
                        {"p", io::vec3_to_json(tp.point.pos())},
                        {"origin_id", tp.origin_id},
                        {"interpolated", tp.interpolated}});
    tracks.push_back({{"member_ids", mt.member_ids},
                      {"line", {{"anchor", io::vec3_to_json(mt.line.anchor)},
                                {"dir", io::vec3_to_json(mt.line.dir)}}},
                      {"points", points}});
  }

  io::json bifs = io::json::array();
  for (const Bifurcation& b : result.bifurcations)
    bifs.push_back({{"p", io::vec3_to_json(b.position)},
                    {"t", b.t},
                    {"origin_pair", io::json::array({b.origin_pair.first, b.origin_pair.second})},
                    {"supporting_pairs", b.supporting_pairs}});

  io::json needles = io::json::array();
  for (const auto& site : result.needle_sites) {
    if (!site.has_value()) {
      needles.push_back(nullptr);
      continue;
    }
    needles.push_back({{"p", io::vec3_to_json(site->position)},
                       {"t", site->t},
                       {"distance_to_bifurcation", site->distance_to_bifurcation}});
  }

  io::json timings = io::json::array();
  for (const StageTiming& st : result.timings)
    timings.push_back({{"stage", st.stage}, {"seconds", st.seconds}});

  io::write_json_file(io::json{{"merged_tracks", tracks},
                               {"bifurcations", bifs},
                               {"needle_sites", needles},
                               {"primary_bifurcation", result.primary_bifurcation},
                               {"timings", timings},
                               {"identification_time_s", result.identification_time_s},
                               {"warnings", result.warnings}},
                      path);
}

inline PipelineResult load_result(const std::filesystem::path& path) {
  const io::json j = io::read_json_file(path);
  PipelineResult result;
  for (const auto& tj : j.value("merged_tracks", io::json::array())) {
    MergedTrack mt;
    mt.member_ids = tj.at("member_ids").get<std::vector<int>>();
    mt.line.anchor = io::vec3_from_json(tj.at("line").at("anchor"));
    mt.line.dir = io::vec3_from_json(tj.at("line").at("dir"));
    for (const auto& pj : tj.at("points")) {
      const Vec3 p = io::vec3_from_json(pj.at("p"));
      mt.points.push_back({{p.x, p.y, p.z, pj.at("t").get<double>()},
                           pj.at("origin_id").get<int>(),
                           pj.at("interpolated").get<bool>()});
    }
    result.merged_tracks.push_back(std::move(mt));
  }
  for (const auto& bj : j.value("bifurcations", io::json::array())) {
    Bifurcation b;
    b.position = io::vec3_from_json(bj.at("p"));
    b.t = bj.at("t").get<double>();
    b.origin_pair = {bj.at("origin_pair")[0].get<int>(), bj.at("origin_pair")[1].get<int>()};
    b.supporting_pairs = bj.value("supporting_pairs", 0);
    result.bifurcations.push_back(b);
  }
  for (const auto& nj : j.value("needle_sites", io::json::array())) {
    if (nj.is_null()) {
      result.needle_sites.push_back(std::nullopt);
      continue;
    }
    NeedleSite site;
    site.position = io::vec3_from_json(nj.at("p"));
    site.t = nj.at("t").get<double>();
    site.distance_to_bifurcation = nj.value("distance_to_bifurcation", 0.0);
    result.needle_sites.push_back(site);
  }
  result.primary_bifurcation = j.value("primary_bifurcation", -1);
  for (const auto& tj : j.value("timings", io::json::array()))
    result.timings.push_back({tj.at("stage").get<std::string>(), tj.at("seconds").get<double>()});
  result.identification_time_s = j.value("identification_time_s", 0.0);
  result.warnings = j.value("warnings", std::vector<std::string>{});
  return result;
}

inline io::json report_to_json(const EvalReport& report) {
  io::json errors = io::json::array();
  for (const auto& e : report.bifurcation_error_mm)
    errors.push_back(e.has_value() ? io::json(*e) : io::json(nullptr));
  io::json in_range = io::json::array();
  for (const auto& b : report.needle_in_range)
    in_range.push_back(b.has_value() ? io::json(*b) : io::json(nullptr));
  io::json out{{"bifurcation_error_mm", errors},
               {"false_positives", report.false_positives},
               {"false_negatives", report.false_negatives},
               {"needle_in_range", in_range},
               {"identification_time_s", report.identification_time_s}};
  if (report.iou.has_value()) out["iou"] = *report.iou;
  return out;
}

/// ASCII PLY of every merged-track point, colored by merged-track id.
/// Bifurcations and needle sites are listed as header comments with their
/// coordinates, so the vertex count stays equal to the point count.
inline void export_ply(const PipelineResult& result, const std::filesystem::path& path) {
  static constexpr std::array<std::array<int, 3>, 6> palette{
      {{31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40}, {148, 103, 189},
       {140, 86, 75}}};

  std::size_t n_points = 0;
  for (const MergedTrack& mt : result.merged_tracks) n_points += mt.points.size();

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ply\nformat ascii 1.0\n";
  for (std::size_t i = 0; i < result.bifurcations.size(); ++i) {
    const Bifurcation& b = result.bifurcations[i];
    out << "comment bifurcation " << i << " " << b.position.x << " " << b.position.y << " "
        << b.position.z << "\n";
  }
  for (std::size_t i = 0; i < result.needle_sites.size(); ++i) {
    if (!result.needle_sites[i].has_value()) continue;
    const NeedleSite& s = *result.needle_sites[i];
    out << "comment needle " << i << " " << s.position.x << " " << s.position.y << " "
        << s.position.z << "\n";
  }
  out << "element vertex " << n_points << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";
  for (std::size_t m = 0; m < result.merged_tracks.size(); ++m) {
    const auto& color = palette[m % palette.size()];
    for (const TrackPoint& tp : result.merged_tracks[m].points)
      out << tp.point.x << " " << tp.point.y << " " << tp.point.z << " " << color[0] << " "
          << color[1] << " " << color[2] << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

/// CSV: one row per merged-track point.
inline void export_csv(const PipelineResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "merged_id,origin_id,t,x,y,z,interpolated\n";
  for (std::size_t m = 0; m < result.merged_tracks.size(); ++m)
    for (const TrackPoint& tp : result.merged_tracks[m].points)
      out << m << "," << tp.origin_id << "," << tp.point.t << "," << tp.point.x << ","
          << tp.point.y << "," << tp.point.z << "," << (tp.interpolated ? 1 : 0) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace bifurc
