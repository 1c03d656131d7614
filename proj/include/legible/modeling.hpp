#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "legible/sensing.hpp"

namespace legible {

inline constexpr std::size_t kFeatureCount = 8;
inline constexpr std::size_t kOutputCount = 4;
inline constexpr std::size_t kTermCount = kFeatureCount + 1;  // intercept first

// Order is part of the persistence format.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "log10_1p_lux", "vib_x", "vib_y", "vib_z", "distance_cm",
    "fatigued",     "distracted", "vision_reduced"};
inline constexpr std::array<std::string_view, kOutputCount> kOutputNames = {
    "size_sp", "weight_px", "line_spacing_em", "letter_spacing_em"};

inline constexpr std::string_view kGroupScenario = "GROUP";

struct Range {
  double lo;
  double hi;
};

// size in sp, stroke-weight offset in px, spacings relative to font size (em)
inline constexpr std::array<Range, kOutputCount> kFontRanges = {
    Range{12.0, 40.0}, Range{0.0, 3.0}, Range{0.0, 1.0}, Range{0.0, 0.5}};

struct FontParams {
  double size_sp = 16.0;
  double weight_px = 0.0;
  double line_spacing_em = 0.2;
  double letter_spacing_em = 0.0;

  std::array<double, kOutputCount> as_array() const noexcept {
    return {size_sp, weight_px, line_spacing_em, letter_spacing_em};
  }
  static FontParams from_array(const std::array<double, kOutputCount>& a) noexcept {
    return {a[0], a[1], a[2], a[3]};
  }
  bool operator==(const FontParams&) const = default;
};

bool in_range(const FontParams& p) noexcept;
/// Throws InvalidParams naming the first offending field.
void validate(const FontParams& p);
/// Clamps each field into its range; non-finite fields go to the range midpoint.
FontParams clamp_to_range(const FontParams& p) noexcept;
/// Sum of absolute per-field differences.
double l1_distance(const FontParams& a, const FontParams& b) noexcept;

nlohmann::json to_json(const FontParams& p);
FontParams font_params_from_json(const nlohmann::json& j);

struct FeatureVector {
  std::array<double, kFeatureCount> values{};

  /// [log10(1 + lux), vib_x, vib_y, vib_z, distance_cm, flags as 0/1]
  static FeatureVector from_context(const ContextFeatures& f);
  bool all_finite() const noexcept;
  bool operator==(const FeatureVector&) const = default;
};

struct TrainingRow {
  FeatureVector features;
  FontParams params;
  double weight = 1.0;
};

// Ridge model on standardized features. A feature whose training spread is
// zero is inactive: its sd is stored as 0 and its coefficient is 0.
struct ScenarioModel {
  std::string scenario;
  std::uint64_t version = 0;
  std::uint64_t sample_count = 0;
  std::uint64_t user_rows = 0;
  double lambda = 0.0;
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> sd{};
  // [output][term], term 0 is the intercept
  std::array<std::array<double, kTermCount>, kOutputCount> coefficients{};

  /// Coefficients re-expressed on raw (unstandardized) features.
  std::array<std::array<double, kTermCount>, kOutputCount> raw_coefficients() const;

  nlohmann::json to_json() const;
  static ScenarioModel from_json(const nlohmann::json& j);
};

/// Weighted ridge: solves (X'WX + lambda * P) beta = X'Wy per output, with
/// P the identity except for the unpenalized intercept. Needs >= 2 rows.
/// SingularSystem is only reachable with lambda == 0.
ScenarioModel fit_ridge(std::span<const TrainingRow> rows, double lambda);

/// Linear prediction clamped into kFontRanges. A non-finite raw output
/// (overflowing inputs) is replaced by the intercept before clamping.
FontParams predict(const ScenarioModel& model, const FeatureVector& features) noexcept;

}  // namespace legible
