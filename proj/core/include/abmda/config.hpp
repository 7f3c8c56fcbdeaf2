// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "abmda/experiments.hpp"

namespace abmda {

/// Scenario presets: population sizes, observation-error coefficients, truth
/// overrides and augmented parameters used when the config leaves them out.
ExperimentConfig scenario_defaults(Scenario scenario);

/// Parses a JSON experiment definition. Unknown keys, out-of-range values and
/// missing required fields throw ConfigError naming the key. Relative data
/// paths are resolved against `base_dir`.
ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});

/// Reads and parses a config file; a missing file is a ConfigError with the path.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved configuration as JSON, defaults included. Feeding it back to
/// parse_config reproduces the same configuration.
std::string config_echo(const ExperimentConfig& config);

}  // namespace abmda
