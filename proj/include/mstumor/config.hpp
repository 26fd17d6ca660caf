#pragma once

// Plain-text sectioned key = value configuration for simulations.
//
//   [grid]      nx, ny, lx, ly
//   [time]      dt, t_final, cfl_limit
//   [potential] epsilon, chi, offset_log3
//   [mobility]  m_p, m_d
//   [source]    model = linear_growth | centered_decay | custom, plus the
//               rates of that model
//   [region]    shape = disk | shrunken_simplex, check_box
//   [initial]   kind = uniform_noise | two_blobs | file, smoothing_delta, seed
//   [output]    every
//
// '#' starts a comment. Missing keys keep the SimConfig defaults; unknown
// sections, unknown keys and keys that do not apply to the selected variant
// are errors.

#include <string>

#include "mstumor/stepper.hpp"

namespace mstumor::config {

using stepper::SimConfig;

/// Parses and validates; throws ConfigError with the file name and line.
/// Relative initial-data paths are resolved against the file's directory.
SimConfig parse_config(const std::string &path);
SimConfig parse_config_string(const std::string &text, const std::string &source = "<config>");

/// Text that parses back to exactly `cfg`.
std::string write_config(const SimConfig &cfg);

}  // namespace mstumor::config
