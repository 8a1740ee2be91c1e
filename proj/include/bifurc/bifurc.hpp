// Convenience umbrella for the whole library.
#pragma once

#include "bifurc/eval.hpp"
#include "bifurc/geometry.hpp"
#include "bifurc/io.hpp"
#include "bifurc/mask.hpp"
#include "bifurc/pipeline.hpp"
#include "bifurc/projection.hpp"
#include "bifurc/simulate.hpp"
#include "bifurc/skeleton.hpp"
#include "bifurc/tracking.hpp"
