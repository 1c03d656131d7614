#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "legible/remote_labeler.hpp"
#include "legible/sensing.hpp"
#include "legible/store.hpp"

namespace legible {

// Flat view of a TOML-style file: "section.key" -> value. Supports
// [section] headers, # comments, double-quoted strings, booleans, integers
// and floats. Anything else throws InvalidConfig naming the line.
using ConfigValue = std::variant<bool, std::int64_t, double, std::string>;
std::map<std::string, ConfigValue> parse_key_values(std::string_view text);

struct ServiceConfig {
  WindowConfig window;
  MotionThresholds motion;
  LearningConfig learning;
  std::filesystem::path data_dir = "data";
  std::filesystem::path group_dataset;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<RemoteLabelerConfig> labeler;

  /// Throws InvalidConfig on inconsistent values.
  void validate() const;
};

/// Unknown keys are errors. Relative paths resolve against `base_dir`.
ServiceConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ServiceConfig load_config(const std::filesystem::path& path);

}  // namespace legible
