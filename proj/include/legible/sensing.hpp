#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "legible/personal_flags.hpp"

namespace legible {

enum class MotionState { Still, Walking, Running };

std::string_view to_string(MotionState m) noexcept;
/// Case-insensitive; accepts the three state names only.
std::optional<MotionState> parse_motion(std::string_view text);

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  bool operator==(const Vec3&) const = default;
};

// One 10 Hz reading. accel_offset is the gravity-removed per-axis deviation
// magnitude in m/s^2; producers are responsible for the gravity filter.
struct SensorSample {
  std::int64_t timestamp_ms = 0;
  double lux = 0.0;
  Vec3 accel_offset;
  std::optional<double> eye_span_px;
  std::optional<double> distance_cm;

  bool operator==(const SensorSample&) const = default;
};

/// Finite, non-negative physical values and strictly positive optional spans.
bool is_valid(const SensorSample& s) noexcept;

struct ContextFeatures {
  double light_lux = 0.0;
  double vib_x = 0.0;
  double vib_y = 0.0;
  double vib_z = 0.0;
  double distance_cm = 0.0;
  PersonalFlags flags;
  std::int64_t window_ms = 0;
  bool distance_imputed = false;

  double mean_vibration() const noexcept { return (vib_x + vib_y + vib_z) / 3.0; }
};

struct WindowConfig {
  std::int64_t window_ms = 1000;
  std::size_t min_samples = 5;
  double focal_px = 500.0;
  double ipd_cm = 6.3;
  double default_distance_cm = 31.0;
};

// Half-open bands on mean per-axis vibration: [0, still_max) is Still,
// [still_max, walking_max) is Walking, the rest Running.
struct MotionThresholds {
  double still_max = 0.35;
  double walking_max = 1.10;
};

/// Pinhole model: distance = focal_px * ipd_cm / eye_span_px.
double estimate_reading_distance(double eye_span_px, double ipd_cm, double focal_px);

/// Averages a window of samples. Distance is averaged over the samples that
/// carry one (distance_cm wins over eye_span_px); a window with none falls
/// back to `imputed_distance_cm`, then to cfg.default_distance_cm.
ContextFeatures aggregate_window(std::span<const SensorSample> samples, const PersonalFlags& flags,
                                 const WindowConfig& cfg,
                                 std::optional<double> imputed_distance_cm = std::nullopt);

MotionState classify_motion(const ContextFeatures& features,
                            const MotionThresholds& thresholds = {}) noexcept;

// Trace replay files: JSON Lines with ts_ms, lux, ax, ay, az and optional
// eye_px / dist_cm. Blank lines are skipped; anything else malformed throws
// ParseError naming the 1-based line.
SensorSample parse_trace_line(std::string_view line, std::size_t line_no);
/// Same keys as a trace line; throws ParseError.
SensorSample sample_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SensorSample& s);
std::vector<SensorSample> read_trace(std::istream& in);
std::string to_trace_line(const SensorSample& s);

}  // namespace legible
