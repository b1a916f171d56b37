#pragma once

#include <string>
#include <string_view>

#include "relarb/model.hpp"

namespace relarb {

// Strict parse: unknown keys, wrong types and missing required fields raise
// ConfigError naming the offending key path.
ScenarioConfig parse_scenario(std::string_view json_text);
ScenarioConfig load_scenario(const std::string& path);

// Every field written out with defaults filled in. Parsing the result gives
// back an equal configuration.
std::string resolved_config_json(const ScenarioConfig& config);

// Re-emits JSON with sorted keys, two-space indent and floats at 17
// significant digits. Non-finite numbers become null.
std::string canonical_json(std::string_view json_text);

}  // namespace relarb
