#pragma once

#include "heraldsim/decay_model.hpp"
#include "heraldsim/fitting.hpp"
#include "heraldsim/metrics.hpp"
#include "heraldsim/simulator.hpp"
#include "heraldsim/tagstream.hpp"

namespace heraldsim {
inline constexpr const char* kVersion = "0.1.0";
}
