#pragma once

#include "platoon/harness.hpp"

#include "json.hpp"

#include <string>

namespace platoon {

/// Scenario plus the output settings carried by a CLI config file.
struct CliConfig {
  ScenarioConfig scenario;
  std::string out_dir;  // empty: use --out / environment default
};

/// Strict parse: unknown keys and wrong types raise ConfigError with the JSON
/// path of the offending field; the result is validated before returning.
CliConfig parse_config(const nlohmann::json& doc);
CliConfig parse_config_text(const std::string& text);
CliConfig load_config(const std::string& path);

/// Every field written explicitly, so parse(serialize(c)) reproduces c.
nlohmann::ordered_json serialize_config(const CliConfig& config);

}  // namespace platoon
