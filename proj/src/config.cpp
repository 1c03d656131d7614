#include "legible/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "legible/error.hpp"

namespace legible {

namespace {

[[noreturn]] void config_error(std::size_t line_no, const std::string& what) {
  throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(line_no) + ": " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

// Strips a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && in_string) {
      ++i;
    } else if (line[i] == '"') {
      in_string = !in_string;
    } else if (line[i] == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

ConfigValue parse_value(std::string_view v, std::size_t line_no) {
  if (v.empty()) config_error(line_no, "missing value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') config_error(line_no, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\') {
        if (i + 2 >= v.size()) config_error(line_no, "dangling escape");
        const char e = v[++i];
        switch (e) {
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          default: config_error(line_no, std::string("unsupported escape \\") + e);
        }
      } else if (v[i] == '"') {
        config_error(line_no, "unexpected quote inside string");
      } else {
        out += v[i];
      }
    }
    return out;
  }
  if (v == "true") return true;
  if (v == "false") return false;
  std::string digits;
  for (char c : v) {
    if (c != '_') digits += c;
  }
  const bool floaty = digits.find_first_of(".eE") != std::string::npos || digits == "inf" ||
                      digits == "+inf" || digits == "-inf";
  if (!floaty) {
    std::int64_t n = 0;
    const auto* first = digits.data() + (digits.front() == '+' ? 1 : 0);
    const auto [p, ec] = std::from_chars(first, digits.data() + digits.size(), n);
    if (ec == std::errc() && p == digits.data() + digits.size()) return n;
    config_error(line_no, "cannot parse value '" + std::string(v) + "'");
  }
  char* end = nullptr;
  const double d = std::strtod(digits.c_str(), &end);
  if (end != digits.c_str() + digits.size()) {
    config_error(line_no, "cannot parse value '" + std::string(v) + "'");
  }
  return d;
}

}  // namespace

std::map<std::string, ConfigValue> parse_key_values(std::string_view text) {
  std::map<std::string, ConfigValue> out;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const auto line = trim(strip_comment(text.substr(pos, end - pos)));
    pos = end + 1;
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') config_error(line_no, "malformed section header");
      const auto name = trim(line.substr(1, line.size() - 2));
      if (name.empty() || !std::all_of(name.begin(), name.end(), [](char c) {
            return is_key_char(c) || c == '.';
          })) {
        config_error(line_no, "invalid section name");
      }
      section = std::string(name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) config_error(line_no, "expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty() || !std::all_of(key.begin(), key.end(), is_key_char)) {
      config_error(line_no, "invalid key");
    }
    const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (out.count(full)) config_error(line_no, "duplicate key '" + full + "'");
    out.emplace(full, parse_value(trim(line.substr(eq + 1)), line_no));
  }
  return out;
}

void ServiceConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (!(motion.still_max > 0.0 && motion.still_max < motion.walking_max)) {
    fail("motion thresholds need 0 < theta1 < theta2");
  }
  if (window.window_ms <= 0) fail("window_ms must be positive");
  if (window.min_samples < 1) fail("min_samples must be >= 1");
  if (!(window.focal_px > 0.0)) fail("focal_px must be positive");
  if (!(window.default_distance_cm > 0.0)) fail("default_distance_cm must be positive");
  if (!(learning.lambda >= 0.0)) fail("lambda must be >= 0");
  if (!(learning.group_weight > 0.0)) fail("w_g must be positive");
  if (!(learning.user_weight > learning.group_weight)) fail("w_u must exceed w_g");
  if (learning.own_min_rows < 1 || learning.transfer_min_rows < 1) fail("min rows must be >= 1");
  if (port < 0 || port > 65535) fail("port out of range");
}

ServiceConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  const auto kv = parse_key_values(text);
  ServiceConfig c;
  std::optional<RemoteLabelerConfig> labeler;

  auto as_double = [](const std::string& key, const ConfigValue& v) {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    throw Error(ErrorCode::InvalidConfig, key + " must be a number");
  };
  auto as_int = [](const std::string& key, const ConfigValue& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
    throw Error(ErrorCode::InvalidConfig, key + " must be an integer");
  };
  auto as_count = [&](const std::string& key, const ConfigValue& v) {
    const auto i = as_int(key, v);
    if (i < 0) throw Error(ErrorCode::InvalidConfig, key + " must be >= 0");
    return static_cast<std::size_t>(i);
  };
  auto as_string = [](const std::string& key, const ConfigValue& v) {
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    throw Error(ErrorCode::InvalidConfig, key + " must be a string");
  };
  auto as_path = [&](const std::string& key, const ConfigValue& v) {
    std::filesystem::path p = as_string(key, v);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  auto remote = [&]() -> RemoteLabelerConfig& {
    if (!labeler) labeler.emplace();
    return *labeler;
  };

  using Setter = std::function<void(const std::string&, const ConfigValue&)>;
  const std::map<std::string, Setter> setters = {
      {"motion.theta1", [&](auto& k, auto& v) { c.motion.still_max = as_double(k, v); }},
      {"motion.theta2", [&](auto& k, auto& v) { c.motion.walking_max = as_double(k, v); }},
      {"window.window_ms", [&](auto& k, auto& v) { c.window.window_ms = as_int(k, v); }},
      {"window.min_samples", [&](auto& k, auto& v) { c.window.min_samples = as_count(k, v); }},
      {"window.focal_px", [&](auto& k, auto& v) { c.window.focal_px = as_double(k, v); }},
      {"window.default_distance_cm",
       [&](auto& k, auto& v) { c.window.default_distance_cm = as_double(k, v); }},
      {"model.lambda", [&](auto& k, auto& v) { c.learning.lambda = as_double(k, v); }},
      {"model.w_g", [&](auto& k, auto& v) { c.learning.group_weight = as_double(k, v); }},
      {"model.w_u", [&](auto& k, auto& v) { c.learning.user_weight = as_double(k, v); }},
      {"model.own_min_rows", [&](auto& k, auto& v) { c.learning.own_min_rows = as_count(k, v); }},
      {"model.transfer_min_rows",
       [&](auto& k, auto& v) { c.learning.transfer_min_rows = as_count(k, v); }},
      {"storage.data_dir", [&](auto& k, auto& v) { c.data_dir = as_path(k, v); }},
      {"group.dataset", [&](auto& k, auto& v) { c.group_dataset = as_path(k, v); }},
      {"server.host", [&](auto& k, auto& v) { c.host = as_string(k, v); }},
      {"server.port", [&](auto& k, auto& v) { c.port = static_cast<int>(as_int(k, v)); }},
      {"labeler.url", [&](auto& k, auto& v) { remote().base_url = as_string(k, v); }},
      {"labeler.model", [&](auto& k, auto& v) { remote().model = as_string(k, v); }},
      {"labeler.api_key_env",
       [&](auto& k, auto& v) {
         const char* key = std::getenv(as_string(k, v).c_str());
         remote().api_key = key ? key : "";
       }},
      {"labeler.timeout_ms",
       [&](auto& k, auto& v) { remote().timeout = std::chrono::milliseconds(as_int(k, v)); }},
  };

  for (const auto& [key, value] : kv) {
    auto it = setters.find(key);
    if (it == setters.end()) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
    it->second(key, value);
  }
  if (labeler && labeler->base_url.empty()) {
    throw Error(ErrorCode::InvalidConfig, "labeler section needs url");
  }
  c.labeler = std::move(labeler);
  c.validate();
  return c;
}

ServiceConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

}  // namespace legible
