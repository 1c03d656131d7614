#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "legible/modeling.hpp"
#include "legible/sensing.hpp"

namespace legible::datagen {

inline constexpr std::size_t kGroupRowCount = 497;
inline constexpr std::uint64_t kDefaultSeed = 20250101;

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

// One of the six study conditions: sensor moments and the moments of the
// text parameters people chose in it.
struct ScenarioSpec {
  int id = 0;
  std::string name;
  MotionState motion = MotionState::Still;
  bool outdoor = false;
  Moments vib_x, vib_y, vib_z, lux, distance_cm;
  Moments size_sp, weight_px, line_spacing_em, letter_spacing_em;
  // per-person spread of the text parameters, used only as a sanity bound
  std::array<double, kOutputCount> person_sd{};
  std::size_t row_count = 0;

  std::array<Moments, kOutputCount> targets() const {
    return {size_sp, weight_px, line_spacing_em, letter_spacing_em};
  }
};

/// The six reference conditions, 83/83/83/83/83/82 rows.
std::vector<ScenarioSpec> reference_scenarios();

// Column order of the correlation grid.
enum CouplingFeature : std::size_t { kDistance = 0, kLight, kVibX, kVibY, kVibZ, kCouplingFeatureCount };
inline constexpr std::array<std::string_view, kCouplingFeatureCount> kCouplingFeatureNames = {
    "distance_cm", "light_lux", "vib_x", "vib_y", "vib_z"};

using CorrelationGrid = std::array<std::array<double, kCouplingFeatureCount>, kOutputCount>;

/// Reference Spearman grid, rows size/weight/line/letter.
CorrelationGrid reference_spearman_targets();

struct CouplingConfig {
  std::uint64_t seed = kDefaultSeed;
  // share of the common motion latent in each vibration axis latent
  double motion_share = 0.3;
  // loading of each target on each feature latent
  CorrelationGrid coupling{};
  std::array<double, kOutputCount> noise_scale{1.0, 1.0, 1.0, 1.0};
  CorrelationGrid target_spearman{};

  void validate() const;
  nlohmann::json to_json() const;
  static CouplingConfig from_json(const nlohmann::json& j);
};

/// Targets from reference_spearman_targets(), zero couplings.
CouplingConfig initial_coupling(std::uint64_t seed = kDefaultSeed);

struct GroupRow {
  int scenario_id = 0;
  double lux = 0.0;
  double vib_x = 0.0;
  double vib_y = 0.0;
  double vib_z = 0.0;
  double distance_cm = 0.0;
  FontParams params;

  FeatureVector features() const;
  double feature(CouplingFeature f) const;
  bool operator==(const GroupRow&) const = default;
};

/// Seeded synthetic corpus. Per condition, every column is a monotone map
/// of a standard-normal latent (truncated normal for vibration and distance,
/// log-normal for light) followed by an exact sample-moment match to the
/// reference mean/sd inside the column's bounds. Targets load on the
/// feature latents through `coupling` plus independent noise.
/// Throws InvalidSpec for malformed specs.
std::vector<GroupRow> generate_group_dataset(std::span<const ScenarioSpec> specs,
                                             const CouplingConfig& coupling);

/// Pooled Spearman grid of targets against the five sensor features.
CorrelationGrid spearman_grid(std::span<const GroupRow> rows);

struct CalibrationOptions {
  double tolerance = 0.15;
  // entries below this magnitude are not fitted
  double min_abs_target = 0.1;
  double initial_step = 0.25;
  double min_step = 1.0 / 512.0;
  std::size_t max_evaluations = 20000;
};

struct CalibrationReport {
  CouplingConfig config;
  CorrelationGrid achieved{};
  double max_deviation = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

/// Coordinate search over the coupling grid minimizing the largest
/// |achieved - target| over fitted entries. Never throws for infeasible
/// targets; inspect `converged`.
CalibrationReport search_coupling(std::span<const ScenarioSpec> specs, const CouplingConfig& start,
                                  const CalibrationOptions& options = {});

/// search_coupling, throwing CalibrationFailed (with the best deviation in
/// the message) when the tolerance is not reached.
CouplingConfig calibrate_coupling(std::span<const ScenarioSpec> specs, const CouplingConfig& start,
                                  const CalibrationOptions& options = {});

/// Largest deviation over entries with |target| >= min_abs_target.
double max_deviation(const CorrelationGrid& achieved, const CorrelationGrid& target,
                     double min_abs_target);

// Fixture format: one JSON object per line.
std::string to_jsonl(std::span<const GroupRow> rows);
std::vector<GroupRow> read_jsonl(std::istream& in);
std::vector<TrainingRow> to_training_rows(std::span<const GroupRow> rows, double weight = 1.0);

/// Exact sample-moment match with clamping to [lo, hi]: finds a, b so that
/// clamp(a + b * standardized(values)) has the target mean and sd.
void match_moments(std::vector<double>& values, Moments target, double lo, double hi);

/// Parent (mean, sd) of a normal whose truncation to [lo, inf) has the given
/// moments. Requires the target coefficient of variation about `lo` to be < 1.
Moments truncated_normal_parent(Moments target, double lo);

}  // namespace legible::datagen
