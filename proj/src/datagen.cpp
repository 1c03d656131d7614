#include "legible/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/special_functions/erf.hpp>
#include <nlohmann/json.hpp>

#include "legible/error.hpp"
#include "legible/stats.hpp"

namespace legible::datagen {

std::vector<ScenarioSpec> reference_scenarios() {
  using M = MotionState;
  // vib x/y/z, lux, distance | size, weight, line, letter | per-person sd
  return {
      {1, "Indoor Standing", M::Still, false,
       {0.18, 0.13}, {0.11, 0.08}, {0.26, 0.22}, {111.69, 89.14}, {33.00, 11.46},
       {20.60, 3.99}, {0.59, 0.65}, {0.25, 0.14}, {0.10, 0.10},
       {2.698, 0.654, 0.138, 0.089}, 83},
      {2, "Indoor Walking", M::Walking, false,
       {0.53, 0.15}, {0.65, 0.15}, {0.80, 0.28}, {86.08, 81.86}, {31.84, 9.69},
       {21.29, 3.98}, {0.79, 0.76}, {0.27, 0.17}, {0.08, 0.09},
       {2.940, 0.663, 0.156, 0.077}, 83},
      {3, "Indoor Running", M::Running, false,
       {1.41, 0.59}, {1.42, 0.85}, {1.58, 0.55}, {82.42, 62.78}, {30.99, 8.73},
       {23.84, 5.31}, {0.93, 0.80}, {0.29, 0.16}, {0.10, 0.09},
       {4.467, 0.690, 0.157, 0.088}, 83},
      {4, "Outdoor Standing", M::Still, true,
       {0.16, 0.08}, {0.10, 0.05}, {0.24, 0.13}, {51208.67, 27990.79}, {29.96, 10.98},
       {19.28, 3.63}, {0.93, 0.79}, {0.25, 0.16}, {0.09, 0.08},
       {2.075, 0.613, 0.134, 0.059}, 83},
      {5, "Outdoor Walking", M::Walking, true,
       {0.52, 0.14}, {0.68, 0.14}, {0.78, 0.19}, {38263.15, 23249.25}, {30.84, 9.03},
       {21.08, 3.26}, {1.04, 0.95}, {0.22, 0.13}, {0.09, 0.09},
       {2.398, 0.827, 0.127, 0.076}, 83},
      {6, "Outdoor Running", M::Running, true,
       {1.54, 0.55}, {1.52, 0.90}, {1.70, 0.55}, {36482.24, 25716.72}, {29.33, 8.57},
       {23.64, 4.92}, {1.30, 0.87}, {0.31, 0.14}, {0.12, 0.14},
       {3.796, 0.791, 0.123, 0.131}, 82},
  };
}

CorrelationGrid reference_spearman_targets() {
  // distance, light, vib x, vib y, vib z
  return {{
      {0.404, 0.117, 0.368, 0.333, 0.381},
      {0.228, 0.373, 0.230, 0.263, 0.225},
      {0.132, -0.038, 0.170, 0.168, 0.173},
      {0.057, 0.042, -0.036, -0.066, -0.037},
  }};
}

void CouplingConfig::validate() const {
  if (!(motion_share >= 0.0 && motion_share < 1.0)) {
    throw Error(ErrorCode::InvalidSpec, "motion_share must lie in [0, 1)");
  }
  for (std::size_t t = 0; t < kOutputCount; ++t) {
    if (!(noise_scale[t] >= 0.0) || !std::isfinite(noise_scale[t])) {
      throw Error(ErrorCode::InvalidSpec, "noise scales must be finite and >= 0");
    }
    for (std::size_t f = 0; f < kCouplingFeatureCount; ++f) {
      if (!std::isfinite(coupling[t][f])) throw Error(ErrorCode::InvalidSpec, "non-finite coupling");
      if (!(std::fabs(target_spearman[t][f]) <= 1.0)) {
        throw Error(ErrorCode::InvalidSpec, "Spearman targets must lie in [-1, 1]");
      }
    }
  }
}

namespace {

nlohmann::json grid_to_json(const CorrelationGrid& g) {
  nlohmann::json out = nlohmann::json::object();
  for (std::size_t t = 0; t < kOutputCount; ++t) {
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t f = 0; f < kCouplingFeatureCount; ++f) {
      row[std::string(kCouplingFeatureNames[f])] = g[t][f];
    }
    out[std::string(kOutputNames[t])] = std::move(row);
  }
  return out;
}

CorrelationGrid grid_from_json(const nlohmann::json& j) {
  CorrelationGrid g{};
  for (std::size_t t = 0; t < kOutputCount; ++t) {
    const auto& row = j.at(std::string(kOutputNames[t]));
    for (std::size_t f = 0; f < kCouplingFeatureCount; ++f) {
      g[t][f] = row.at(std::string(kCouplingFeatureNames[f])).get<double>();
    }
  }
  return g;
}

}  // namespace

nlohmann::json CouplingConfig::to_json() const {
  return {{"schema_version", 1},
          {"seed", seed},
          {"motion_share", motion_share},
          {"noise_scale", noise_scale},
          {"coupling", grid_to_json(coupling)},
          {"target_spearman", grid_to_json(target_spearman)}};
}

CouplingConfig CouplingConfig::from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != 1) {
      throw Error(ErrorCode::ParseError, "unsupported coupling schema_version");
    }
    CouplingConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.motion_share = j.at("motion_share").get<double>();
    c.noise_scale = j.at("noise_scale").get<std::array<double, kOutputCount>>();
    c.coupling = grid_from_json(j.at("coupling"));
    c.target_spearman = grid_from_json(j.at("target_spearman"));
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("coupling config: ") + e.what());
  }
}

CouplingConfig initial_coupling(std::uint64_t seed) {
  CouplingConfig c;
  c.seed = seed;
  c.target_spearman = reference_spearman_targets();
  return c;
}

FeatureVector GroupRow::features() const {
  ContextFeatures f;
  f.light_lux = lux;
  f.vib_x = vib_x;
  f.vib_y = vib_y;
  f.vib_z = vib_z;
  f.distance_cm = distance_cm;
  return FeatureVector::from_context(f);
}

double GroupRow::feature(CouplingFeature f) const {
  switch (f) {
    case kDistance: return distance_cm;
    case kLight: return lux;
    case kVibX: return vib_x;
    case kVibY: return vib_y;
    case kVibZ: return vib_z;
    default: break;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// numerics

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinDistanceCm = 5.0;

double upper_tail(double t) { return 0.5 * std::erfc(t / std::numbers::sqrt2); }
double upper_tail_inverse(double q) {
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
}
double density(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); }

// Inverse Mills ratio phi(a) / Q(a).
double mills(double a) { return density(a) / upper_tail(a); }

// (mean - lo) / sd of a standard normal truncated below at a.
double lower_cv_ratio(double a) {
  const double l = mills(a);
  return (l - a) / std::sqrt(1.0 + a * l - l * l);
}

}  // namespace

Moments truncated_normal_parent(Moments target, double lo) {
  if (!(target.sd > 0.0)) return target;
  const double ratio = (target.mean - lo) / target.sd;
  if (!(ratio > 1.0)) {
    throw Error(ErrorCode::InvalidSpec,
                "truncated normal needs (mean - lo) / sd > 1, got " + std::to_string(ratio));
  }
  double a_lo = -30.0;
  double a_hi = 25.0;
  double a = a_lo;
  if (ratio < lower_cv_ratio(a_lo)) {
    // ratio is decreasing in a
    for (int i = 0; i < 200; ++i) {
      a = 0.5 * (a_lo + a_hi);
      if (lower_cv_ratio(a) > ratio) {
        a_lo = a;
      } else {
        a_hi = a;
      }
    }
  }
  const double l = mills(a);
  const double parent_sd = target.sd / std::sqrt(1.0 + a * l - l * l);
  return {lo - a * parent_sd, parent_sd};
}

void match_moments(std::vector<double>& values, Moments target, double lo, double hi) {
  if (values.empty()) return;
  const double fill = std::clamp(target.mean, lo, hi);
  if (values.size() < 2 || target.sd == 0.0) {
    std::fill(values.begin(), values.end(), fill);
    return;
  }
  const auto base = stats::mean_sd(values);
  if (base.sd == 0.0) {
    std::fill(values.begin(), values.end(), fill);
    return;
  }
  std::vector<double> unit(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) unit[i] = (values[i] - base.mean) / base.sd;

  double a = target.mean;
  double b = target.sd;
  for (int iter = 0; iter < 500; ++iter) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::clamp(a + b * unit[i], lo, hi);
    const auto now = stats::mean_sd(values);
    const bool mean_ok = std::fabs(now.mean - target.mean) <= 1e-12 * (1.0 + std::fabs(target.mean));
    const bool sd_ok = std::fabs(now.sd - target.sd) <= 1e-12 * (1.0 + target.sd);
    if ((mean_ok && sd_ok) || now.sd == 0.0) break;
    a += target.mean - now.mean;
    b *= target.sd / now.sd;
  }
}

// ---------------------------------------------------------------------------
// generation

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Box-Muller over mt19937_64, whose output sequence is fixed by the standard;
// std::normal_distribution is not, so it would break fixture reproducibility.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;          // [0, 1)
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct ScenarioDraw {
  // latents per feature in CouplingFeature order, then per-target noise
  std::array<std::vector<double>, kCouplingFeatureCount> latent;
  std::array<std::vector<double>, kOutputCount> noise;
  // transformed feature columns in CouplingFeature order
  std::array<std::vector<double>, kCouplingFeatureCount> column;
};

void validate_specs(std::span<const ScenarioSpec> specs) {
  if (specs.size() != 6) {
    throw Error(ErrorCode::InvalidSpec, "expected 6 scenario specs, got " + std::to_string(specs.size()));
  }
  std::size_t total = 0;
  std::array<bool, 7> seen{};
  for (const auto& s : specs) {
    if (s.id < 1 || s.id > 6 || seen[static_cast<std::size_t>(s.id)]) {
      throw Error(ErrorCode::InvalidSpec, "scenario ids must cover 1..6 exactly once");
    }
    seen[static_cast<std::size_t>(s.id)] = true;
    if (s.row_count < 2) throw Error(ErrorCode::InvalidSpec, "each scenario needs >= 2 rows");
    total += s.row_count;
    const std::array<Moments, 9> all = {s.vib_x, s.vib_y, s.vib_z, s.lux, s.distance_cm,
                                        s.size_sp, s.weight_px, s.line_spacing_em,
                                        s.letter_spacing_em};
    for (const auto& m : all) {
      if (!std::isfinite(m.mean) || !std::isfinite(m.sd) || m.sd < 0.0) {
        throw Error(ErrorCode::InvalidSpec,
                    "scenario " + std::to_string(s.id) + " has a negative or non-finite moment");
      }
    }
    if (s.lux.sd > 0.0 && !(s.lux.mean > 0.0)) {
      throw Error(ErrorCode::InvalidSpec, "log-normal light needs a positive mean");
    }
    const auto targets = s.targets();
    for (std::size_t t = 0; t < kOutputCount; ++t) {
      if (targets[t].mean < kFontRanges[t].lo || targets[t].mean > kFontRanges[t].hi) {
        throw Error(ErrorCode::InvalidSpec, std::string(kOutputNames[t]) + " mean out of range");
      }
    }
  }
  if (total != kGroupRowCount) {
    throw Error(ErrorCode::InvalidSpec, "row counts sum to " + std::to_string(total) +
                                            ", expected " + std::to_string(kGroupRowCount));
  }
}

std::vector<double> truncated_column(const std::vector<double>& latent, Moments m, double lo) {
  std::vector<double> out(latent.size(), m.mean);
  if (m.sd == 0.0) return out;
  const Moments parent = truncated_normal_parent(m, lo);
  const double q_lo = upper_tail((lo - parent.mean) / parent.sd);
  for (std::size_t i = 0; i < latent.size(); ++i) {
    const double t = upper_tail_inverse(upper_tail(latent[i]) * q_lo);
    out[i] = std::max(lo, parent.mean + parent.sd * t);
  }
  match_moments(out, m, lo, kInf);
  return out;
}

std::vector<double> lognormal_column(const std::vector<double>& latent, Moments m) {
  std::vector<double> out(latent.size(), m.mean);
  if (m.sd == 0.0) return out;
  const double s2 = std::log1p((m.sd * m.sd) / (m.mean * m.mean));
  const double mu = std::log(m.mean) - 0.5 * s2;
  const double s = std::sqrt(s2);
  for (std::size_t i = 0; i < latent.size(); ++i) out[i] = std::exp(mu + s * latent[i]);
  match_moments(out, m, 0.0, kInf);
  return out;
}

ScenarioDraw draw_scenario(const ScenarioSpec& spec, const CouplingConfig& coupling) {
  NormalStream normal(splitmix64(coupling.seed ^ (0xA24BAED4963EE407ULL * static_cast<std::uint64_t>(spec.id))));
  const std::size_t n = spec.row_count;
  ScenarioDraw d;
  for (auto& v : d.latent) v.resize(n);
  for (auto& v : d.noise) v.resize(n);

  const double shared = coupling.motion_share;
  const double own = std::sqrt(1.0 - shared * shared);
  for (std::size_t i = 0; i < n; ++i) {
    const double motion = normal.next();
    d.latent[kVibX][i] = shared * motion + own * normal.next();
    d.latent[kVibY][i] = shared * motion + own * normal.next();
    d.latent[kVibZ][i] = shared * motion + own * normal.next();
    d.latent[kLight][i] = normal.next();
    d.latent[kDistance][i] = normal.next();
    for (std::size_t t = 0; t < kOutputCount; ++t) d.noise[t][i] = normal.next();
  }

  d.column[kVibX] = truncated_column(d.latent[kVibX], spec.vib_x, 0.0);
  d.column[kVibY] = truncated_column(d.latent[kVibY], spec.vib_y, 0.0);
  d.column[kVibZ] = truncated_column(d.latent[kVibZ], spec.vib_z, 0.0);
  d.column[kLight] = lognormal_column(d.latent[kLight], spec.lux);
  d.column[kDistance] = truncated_column(d.latent[kDistance], spec.distance_cm, kMinDistanceCm);
  return d;
}

std::vector<double> target_column(const ScenarioDraw& d, const ScenarioSpec& spec,
                                  const CouplingConfig& coupling, std::size_t t) {
  const std::size_t n = spec.row_count;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = coupling.noise_scale[t] * d.noise[t][i];
    for (std::size_t f = 0; f < kCouplingFeatureCount; ++f) v += coupling.coupling[t][f] * d.latent[f][i];
    y[i] = v;
  }
  match_moments(y, spec.targets()[t], kFontRanges[t].lo, kFontRanges[t].hi);
  return y;
}

std::vector<ScenarioSpec> sorted_specs(std::span<const ScenarioSpec> specs) {
  std::vector<ScenarioSpec> out(specs.begin(), specs.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

// Draws are independent of the coupling grid; the search reuses them.
struct Prepared {
  std::vector<ScenarioSpec> specs;
  std::vector<ScenarioDraw> draws;
};

Prepared prepare(std::span<const ScenarioSpec> specs, const CouplingConfig& coupling) {
  validate_specs(specs);
  coupling.validate();
  Prepared p;
  p.specs = sorted_specs(specs);
  for (const auto& s : p.specs) p.draws.push_back(draw_scenario(s, coupling));
  return p;
}

std::vector<double> pooled_target(const Prepared& p, const CouplingConfig& coupling, std::size_t t) {
  std::vector<double> out;
  out.reserve(kGroupRowCount);
  for (std::size_t s = 0; s < p.specs.size(); ++s) {
    auto col = target_column(p.draws[s], p.specs[s], coupling, t);
    out.insert(out.end(), col.begin(), col.end());
  }
  return out;
}

std::vector<double> pooled_feature(const Prepared& p, std::size_t f) {
  std::vector<double> out;
  for (const auto& d : p.draws) out.insert(out.end(), d.column[f].begin(), d.column[f].end());
  return out;
}

}  // namespace

std::vector<GroupRow> generate_group_dataset(std::span<const ScenarioSpec> specs,
                                             const CouplingConfig& coupling) {
  const Prepared p = prepare(specs, coupling);
  std::vector<GroupRow> rows;
  rows.reserve(kGroupRowCount);
  for (std::size_t s = 0; s < p.specs.size(); ++s) {
    const auto& d = p.draws[s];
    std::array<std::vector<double>, kOutputCount> targets;
    for (std::size_t t = 0; t < kOutputCount; ++t) targets[t] = target_column(d, p.specs[s], coupling, t);
    for (std::size_t i = 0; i < p.specs[s].row_count; ++i) {
      GroupRow r;
      r.scenario_id = p.specs[s].id;
      r.lux = d.column[kLight][i];
      r.vib_x = d.column[kVibX][i];
      r.vib_y = d.column[kVibY][i];
      r.vib_z = d.column[kVibZ][i];
      r.distance_cm = d.column[kDistance][i];
      r.params = {targets[0][i], targets[1][i], targets[2][i], targets[3][i]};
      rows.push_back(r);
    }
  }
  return rows;
}

CorrelationGrid spearman_grid(std::span<const GroupRow> rows) {
  CorrelationGrid g{};
  std::array<std::vector<double>, kCouplingFeatureCount> features;
  std::array<std::vector<double>, kOutputCount> targets;
  for (const auto& r : rows) {
    for (std::size_t f = 0; f < kCouplingFeatureCount; ++f) {
      features[f].push_back(r.feature(static_cast<CouplingFeature>(f)));
    }
    const auto y = r.params.as_array();
    for (std::size_t t = 0; t < kOutputCount; ++t) targets[t].push_back(y[t]);
  }
  for (std::size_t t = 0; t < kOutputCount; ++t) {
    for (std::size_t f = 0; f < kCouplingFeatureCount; ++f) {
      g[t][f] = stats::spearman(targets[t], features[f]).r;
    }
  }
  return g;
}

double max_deviation(const CorrelationGrid& achieved, const CorrelationGrid& target,
                     double min_abs_target) {
  double worst = 0.0;
  for (std::size_t t = 0; t < kOutputCount; ++t) {
    for (std::size_t f = 0; f < kCouplingFeatureCount; ++f) {
      if (std::fabs(target[t][f]) < min_abs_target) continue;
      worst = std::max(worst, std::fabs(achieved[t][f] - target[t][f]));
    }
  }
  return worst;
}

CalibrationReport search_coupling(std::span<const ScenarioSpec> specs, const CouplingConfig& start,
                                  const CalibrationOptions& options) {
  const Prepared p = prepare(specs, start);
  std::array<std::vector<double>, kCouplingFeatureCount> feature_ranks;
  for (std::size_t f = 0; f < kCouplingFeatureCount; ++f) {
    feature_ranks[f] = stats::mid_ranks(pooled_feature(p, f));
  }

  CalibrationReport report;
  report.config = start;
  const auto& target = start.target_spearman;

  auto row_correlations = [&](const CouplingConfig& c, std::size_t t) {
    const auto ranks = stats::mid_ranks(pooled_target(p, c, t));
    std::array<double, kCouplingFeatureCount> r{};
    for (std::size_t f = 0; f < kCouplingFeatureCount; ++f) {
      // Spearman as Pearson of precomputed ranks
      r[f] = stats::spearman(ranks, feature_ranks[f]).r;
    }
    return r;
  };

  for (std::size_t t = 0; t < kOutputCount; ++t) {
    std::vector<std::size_t> fitted;
    for (std::size_t f = 0; f < kCouplingFeatureCount; ++f) {
      if (std::fabs(target[t][f]) >= options.min_abs_target) fitted.push_back(f);
    }
    auto is_fitted = [&](std::size_t f) {
      return std::find(fitted.begin(), fitted.end(), f) != fitted.end();
    };
    // Phase 0 minimizes the summed squares (smooth, so coordinate moves do
    // not stall on ridges); phase 1 then polishes the largest deviation.
    auto score = [&](const std::array<double, kCouplingFeatureCount>& r, int phase) {
      double worst = 0.0, sq = 0.0, excess = 0.0;
      for (std::size_t f = 0; f < kCouplingFeatureCount; ++f) {
        const double dev = std::fabs(r[f] - target[t][f]);
        if (is_fitted(f)) {
          worst = std::max(worst, dev);
          sq += dev * dev;
        } else {
          excess += std::max(0.0, dev - options.tolerance);
        }
      }
      if (phase == 0) return sq + excess * excess;
      return worst + 1e-3 * sq + excess;
    };

    auto best_r = row_correlations(report.config, t);
    for (int phase = 0; phase < 2 && !fitted.empty(); ++phase) {
      double best = score(best_r, phase);
      double step = options.initial_step;
      while (step >= options.min_step && report.evaluations < options.max_evaluations) {
        bool improved = false;
        for (std::size_t f = 0; f < kCouplingFeatureCount; ++f) {
          for (double dir : {1.0, -1.0}) {
            CouplingConfig trial = report.config;
            trial.coupling[t][f] += dir * step;
            // fitted loadings keep the sign of their target correlation
            if (is_fitted(f) && trial.coupling[t][f] * target[t][f] < 0.0) continue;
            const auto r = row_correlations(trial, t);
            ++report.evaluations;
            const double sc = score(r, phase);
            if (sc < best - 1e-12) {
              best = sc;
              best_r = r;
              report.config = trial;
              improved = true;
              break;
            }
          }
        }
        if (!improved) step *= 0.5;
      }
    }
    report.achieved[t] = best_r;
  }
  report.max_deviation = max_deviation(report.achieved, target, options.min_abs_target);
  report.converged = report.max_deviation <= options.tolerance;
  return report;
}

CouplingConfig calibrate_coupling(std::span<const ScenarioSpec> specs, const CouplingConfig& start,
                                  const CalibrationOptions& options) {
  auto report = search_coupling(specs, start, options);
  if (!report.converged) {
    std::ostringstream msg;
    msg << "coupling calibration reached max |dr| = " << report.max_deviation
        << " after " << report.evaluations << " evaluations (tolerance " << options.tolerance << ")";
    throw Error(ErrorCode::CalibrationFailed, msg.str());
  }
  return report.config;
}

std::string to_jsonl(std::span<const GroupRow> rows) {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::json j = {{"scenario_id", r.scenario_id},
                        {"lux", r.lux},
                        {"vib_x", r.vib_x},
                        {"vib_y", r.vib_y},
                        {"vib_z", r.vib_z},
                        {"distance_cm", r.distance_cm},
                        {"size_sp", r.params.size_sp},
                        {"weight_px", r.params.weight_px},
                        {"line_spacing_em", r.params.line_spacing_em},
                        {"letter_spacing_em", r.params.letter_spacing_em}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<GroupRow> read_jsonl(std::istream& in) {
  std::vector<GroupRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      GroupRow r;
      r.scenario_id = j.at("scenario_id").get<int>();
      r.lux = j.at("lux").get<double>();
      r.vib_x = j.at("vib_x").get<double>();
      r.vib_y = j.at("vib_y").get<double>();
      r.vib_z = j.at("vib_z").get<double>();
      r.distance_cm = j.at("distance_cm").get<double>();
      r.params = font_params_from_json(j);
      rows.push_back(r);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ParseError,
                  "group dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<TrainingRow> to_training_rows(std::span<const GroupRow> rows, double weight) {
  std::vector<TrainingRow> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({r.features(), r.params, weight});
  return out;
}

}  // namespace legible::datagen
