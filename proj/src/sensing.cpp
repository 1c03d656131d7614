#include "legible/sensing.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "legible/error.hpp"

namespace legible {

std::string_view to_string(MotionState m) noexcept {
  switch (m) {
    case MotionState::Still: return "Still";
    case MotionState::Walking: return "Walking";
    case MotionState::Running: return "Running";
  }
  return "Still";
}

std::optional<MotionState> parse_motion(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "still") return MotionState::Still;
  if (lower == "walking") return MotionState::Walking;
  if (lower == "running") return MotionState::Running;
  return std::nullopt;
}

bool is_valid(const SensorSample& s) noexcept {
  auto non_negative = [](double v) { return std::isfinite(v) && v >= 0.0; };
  auto positive = [](const std::optional<double>& v) {
    return !v || (std::isfinite(*v) && *v > 0.0);
  };
  return non_negative(s.lux) && non_negative(s.accel_offset.x) &&
         non_negative(s.accel_offset.y) && non_negative(s.accel_offset.z) &&
         positive(s.eye_span_px) && positive(s.distance_cm);
}

double estimate_reading_distance(double eye_span_px, double ipd_cm, double focal_px) {
  if (!(eye_span_px > 0.0) || !(ipd_cm > 0.0) || !(focal_px > 0.0)) {
    throw Error(ErrorCode::NonPositiveInput,
                "reading distance needs positive eye span, IPD and focal length");
  }
  return focal_px * ipd_cm / eye_span_px;
}

ContextFeatures aggregate_window(std::span<const SensorSample> samples, const PersonalFlags& flags,
                                 const WindowConfig& cfg,
                                 std::optional<double> imputed_distance_cm) {
  if (samples.empty()) throw Error(ErrorCode::EmptyWindow, "no samples in window");
  if (samples.size() < cfg.min_samples) {
    throw Error(ErrorCode::InsufficientSamples,
                "window holds " + std::to_string(samples.size()) + " samples, need " +
                    std::to_string(cfg.min_samples));
  }

  ContextFeatures out;
  out.flags = flags;
  double distance_sum = 0.0;
  std::size_t distance_count = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const SensorSample& s = samples[i];
    if (!is_valid(s)) {
      throw Error(ErrorCode::InvalidParams,
                  "sample at " + std::to_string(s.timestamp_ms) + " ms is out of range");
    }
    if (i > 0 && s.timestamp_ms < samples[i - 1].timestamp_ms) {
      throw Error(ErrorCode::OutOfOrder, "window timestamps decrease at index " + std::to_string(i));
    }
    out.light_lux += s.lux;
    out.vib_x += s.accel_offset.x;
    out.vib_y += s.accel_offset.y;
    out.vib_z += s.accel_offset.z;
    if (s.distance_cm) {
      distance_sum += *s.distance_cm;
      ++distance_count;
    } else if (s.eye_span_px) {
      distance_sum += estimate_reading_distance(*s.eye_span_px, cfg.ipd_cm, cfg.focal_px);
      ++distance_count;
    }
  }
  const double n = static_cast<double>(samples.size());
  out.light_lux /= n;
  out.vib_x /= n;
  out.vib_y /= n;
  out.vib_z /= n;
  if (distance_count > 0) {
    out.distance_cm = distance_sum / static_cast<double>(distance_count);
  } else {
    out.distance_cm = imputed_distance_cm.value_or(cfg.default_distance_cm);
    out.distance_imputed = true;
  }
  out.window_ms = samples.back().timestamp_ms - samples.front().timestamp_ms;
  return out;
}

MotionState classify_motion(const ContextFeatures& features,
                            const MotionThresholds& thresholds) noexcept {
  const double m = features.mean_vibration();
  // averaging can land a few ulps under a threshold the axes sit exactly on
  auto below = [m](double t) { return m < t - 4.0 * std::numeric_limits<double>::epsilon() * std::fabs(t); };
  if (below(thresholds.still_max)) return MotionState::Still;
  if (below(thresholds.walking_max)) return MotionState::Walking;
  return MotionState::Running;
}

namespace {

[[noreturn]] void sample_error(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

double required_number(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) sample_error(std::string("missing key '") + key + "'");
  if (!it->is_number()) sample_error(std::string("key '") + key + "' is not a number");
  return it->get<double>();
}

std::optional<double> optional_number(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) sample_error(std::string("key '") + key + "' is not a number");
  return it->get<double>();
}

}  // namespace

SensorSample sample_from_json(const nlohmann::json& j) {
  if (!j.is_object()) sample_error("expected a JSON object");
  SensorSample s;
  auto ts = j.find("ts_ms");
  if (ts == j.end()) sample_error("missing key 'ts_ms'");
  if (!ts->is_number_integer()) sample_error("key 'ts_ms' is not an integer");
  s.timestamp_ms = ts->get<std::int64_t>();
  s.lux = required_number(j, "lux");
  s.accel_offset = {required_number(j, "ax"), required_number(j, "ay"), required_number(j, "az")};
  s.eye_span_px = optional_number(j, "eye_px");
  s.distance_cm = optional_number(j, "dist_cm");
  return s;
}

SensorSample parse_trace_line(std::string_view line, std::size_t line_no) {
  try {
    return sample_from_json(nlohmann::json::parse(line));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, "trace line " + std::to_string(line_no) + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::ParseError, "trace line " + std::to_string(line_no) + ": " + e.what());
  }
}

std::vector<SensorSample> read_trace(std::istream& in) {
  std::vector<SensorSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c) != 0; })) {
      continue;
    }
    out.push_back(parse_trace_line(line, line_no));
  }
  return out;
}

nlohmann::json to_json(const SensorSample& s) {
  nlohmann::json j = {{"ts_ms", s.timestamp_ms},
                      {"lux", s.lux},
                      {"ax", s.accel_offset.x},
                      {"ay", s.accel_offset.y},
                      {"az", s.accel_offset.z}};
  if (s.eye_span_px) j["eye_px"] = *s.eye_span_px;
  if (s.distance_cm) j["dist_cm"] = *s.distance_cm;
  return j;
}

std::string to_trace_line(const SensorSample& s) { return to_json(s).dump(); }

}  // namespace legible
