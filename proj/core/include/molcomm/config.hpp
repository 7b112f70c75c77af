#pragma once

#include "molcomm/experiment.hpp"

#include <filesystem>
#include <string_view>

namespace molcomm {

/// Builds a sweep from a JSON document. Dimensional values are either JSON
/// numbers in SI base units or strings with a unit suffix ("6 um"). Unknown
/// keys are rejected. Throws ConfigError; the result is validated.
SweepSpec parse_config(std::string_view json_text, ExperimentKind kind);

/// Reads and parses a config file. Throws IoError when the file cannot be
/// read and ConfigError when its content is invalid.
SweepSpec load_config(const std::filesystem::path& path, ExperimentKind kind);

} // namespace molcomm
