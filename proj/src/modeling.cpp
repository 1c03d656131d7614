#include "legible/modeling.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "legible/error.hpp"

namespace legible {

bool in_range(const FontParams& p) noexcept {
  const auto v = p.as_array();
  for (std::size_t i = 0; i < kOutputCount; ++i) {
    if (!std::isfinite(v[i]) || v[i] < kFontRanges[i].lo || v[i] > kFontRanges[i].hi) return false;
  }
  return true;
}

void validate(const FontParams& p) {
  const auto v = p.as_array();
  for (std::size_t i = 0; i < kOutputCount; ++i) {
    if (!std::isfinite(v[i]) || v[i] < kFontRanges[i].lo || v[i] > kFontRanges[i].hi) {
      throw Error(ErrorCode::InvalidParams,
                  std::string(kOutputNames[i]) + " = " + std::to_string(v[i]) + " outside [" +
                      std::to_string(kFontRanges[i].lo) + ", " +
                      std::to_string(kFontRanges[i].hi) + "]");
    }
  }
}

FontParams clamp_to_range(const FontParams& p) noexcept {
  auto v = p.as_array();
  for (std::size_t i = 0; i < kOutputCount; ++i) {
    const auto [lo, hi] = kFontRanges[i];
    v[i] = std::isfinite(v[i]) ? std::clamp(v[i], lo, hi) : 0.5 * (lo + hi);
  }
  return FontParams::from_array(v);
}

double l1_distance(const FontParams& a, const FontParams& b) noexcept {
  const auto x = a.as_array();
  const auto y = b.as_array();
  double d = 0.0;
  for (std::size_t i = 0; i < kOutputCount; ++i) d += std::fabs(x[i] - y[i]);
  return d;
}

nlohmann::json to_json(const FontParams& p) {
  return {{"size_sp", p.size_sp},
          {"weight_px", p.weight_px},
          {"line_spacing_em", p.line_spacing_em},
          {"letter_spacing_em", p.letter_spacing_em}};
}

FontParams font_params_from_json(const nlohmann::json& j) {
  try {
    return {j.at("size_sp").get<double>(), j.at("weight_px").get<double>(),
            j.at("line_spacing_em").get<double>(), j.at("letter_spacing_em").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidParams, std::string("font params: ") + e.what());
  }
}

FeatureVector FeatureVector::from_context(const ContextFeatures& f) {
  return {{std::log10(1.0 + f.light_lux), f.vib_x, f.vib_y, f.vib_z, f.distance_cm,
           f.flags.fatigued ? 1.0 : 0.0, f.flags.distracted ? 1.0 : 0.0,
           f.flags.vision_reduced ? 1.0 : 0.0}};
}

bool FeatureVector::all_finite() const noexcept {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::array<std::array<double, kTermCount>, kOutputCount> ScenarioModel::raw_coefficients() const {
  auto raw = coefficients;
  for (std::size_t o = 0; o < kOutputCount; ++o) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      if (sd[j] == 0.0) {
        raw[o][j + 1] = 0.0;
        continue;
      }
      raw[o][j + 1] = coefficients[o][j + 1] / sd[j];
      raw[o][0] -= raw[o][j + 1] * mean[j];
    }
  }
  return raw;
}

nlohmann::json ScenarioModel::to_json() const {
  nlohmann::json coeffs = nlohmann::json::array();
  for (const auto& row : coefficients) {
    for (double c : row) coeffs.push_back(c);
  }
  nlohmann::json features = nlohmann::json::array();
  for (auto name : kFeatureNames) features.push_back(name);
  nlohmann::json outputs = nlohmann::json::array();
  for (auto name : kOutputNames) outputs.push_back(name);
  return {{"schema_version", 1},
          {"scenario", scenario},
          {"version", version},
          {"sample_count", sample_count},
          {"user_rows", user_rows},
          {"lambda", lambda},
          {"feature_order", std::move(features)},
          {"output_order", std::move(outputs)},
          {"standardization", {{"mean", mean}, {"sd", sd}}},
          {"coefficients", std::move(coeffs)}};
}

ScenarioModel ScenarioModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != 1) {
      throw Error(ErrorCode::ParseError, "unsupported model schema_version");
    }
    const auto& features = j.at("feature_order");
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      if (features.at(i).get<std::string>() != kFeatureNames[i]) {
        throw Error(ErrorCode::ParseError, "model feature order does not match this build");
      }
    }
    ScenarioModel m;
    m.scenario = j.at("scenario").get<std::string>();
    m.version = j.at("version").get<std::uint64_t>();
    m.sample_count = j.at("sample_count").get<std::uint64_t>();
    m.user_rows = j.at("user_rows").get<std::uint64_t>();
    m.lambda = j.at("lambda").get<double>();
    m.mean = j.at("standardization").at("mean").get<std::array<double, kFeatureCount>>();
    m.sd = j.at("standardization").at("sd").get<std::array<double, kFeatureCount>>();
    const auto& coeffs = j.at("coefficients");
    if (coeffs.size() != kOutputCount * kTermCount) {
      throw Error(ErrorCode::ParseError, "model coefficient count mismatch");
    }
    for (std::size_t o = 0; o < kOutputCount; ++o) {
      for (std::size_t t = 0; t < kTermCount; ++t) {
        m.coefficients[o][t] = coeffs.at(o * kTermCount + t).get<double>();
      }
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model json: ") + e.what());
  }
}

ScenarioModel fit_ridge(std::span<const TrainingRow> rows, double lambda) {
  if (rows.size() < 2) {
    throw Error(ErrorCode::InsufficientData,
                "ridge fit needs at least 2 rows, got " + std::to_string(rows.size()));
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::InvalidParams, "ridge lambda must be finite and >= 0");
  }

  double total_weight = 0.0;
  for (const auto& r : rows) {
    if (!(r.weight > 0.0) || !std::isfinite(r.weight) || !r.features.all_finite()) {
      throw Error(ErrorCode::InvalidParams, "training row with bad weight or features");
    }
    total_weight += r.weight;
  }

  ScenarioModel model;
  model.lambda = lambda;
  model.sample_count = rows.size();

  // weighted standardization
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    double m = 0.0;
    for (const auto& r : rows) m += r.weight * r.features.values[j];
    m /= total_weight;
    double var = 0.0;
    for (const auto& r : rows) {
      const double d = r.features.values[j] - m;
      var += r.weight * d * d;
    }
    const double sd = std::sqrt(var / total_weight);
    model.mean[j] = m;
    model.sd[j] = sd > 1e-12 * std::max(1.0, std::fabs(m)) ? sd : 0.0;
  }

  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    if (model.sd[j] > 0.0) active.push_back(j);
  }
  const auto p = static_cast<Eigen::Index>(active.size() + 1);

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(p, static_cast<Eigen::Index>(kOutputCount));
  Eigen::VectorXd x(p);
  for (const auto& r : rows) {
    x(0) = 1.0;
    for (std::size_t k = 0; k < active.size(); ++k) {
      const std::size_t j = active[k];
      x(static_cast<Eigen::Index>(k + 1)) = (r.features.values[j] - model.mean[j]) / model.sd[j];
    }
    gram.noalias() += r.weight * x * x.transpose();
    const auto y = r.params.as_array();
    for (std::size_t o = 0; o < kOutputCount; ++o) {
      rhs.col(static_cast<Eigen::Index>(o)) += r.weight * y[o] * x;
    }
  }
  for (Eigen::Index k = 1; k < p; ++k) gram(k, k) += lambda;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const auto pivots = ldlt.vectorD().cwiseAbs();
  const bool degenerate = !(pivots.minCoeff() > 1e-12 * pivots.maxCoeff()) || !(ldlt.rcond() >= 1e-12);
  if (ldlt.info() != Eigen::Success || (lambda == 0.0 && degenerate)) {
    throw Error(ErrorCode::SingularSystem, "normal equations are singular; use lambda > 0");
  }
  const Eigen::MatrixXd beta = ldlt.solve(rhs);

  for (std::size_t o = 0; o < kOutputCount; ++o) {
    const auto col = static_cast<Eigen::Index>(o);
    model.coefficients[o][0] = beta(0, col);
    for (std::size_t k = 0; k < active.size(); ++k) {
      model.coefficients[o][active[k] + 1] = beta(static_cast<Eigen::Index>(k + 1), col);
    }
  }
  return model;
}

FontParams predict(const ScenarioModel& model, const FeatureVector& features) noexcept {
  std::array<double, kOutputCount> out{};
  for (std::size_t o = 0; o < kOutputCount; ++o) {
    double y = model.coefficients[o][0];
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      if (model.sd[j] == 0.0) continue;
      y += model.coefficients[o][j + 1] * (features.values[j] - model.mean[j]) / model.sd[j];
    }
    out[o] = std::isfinite(y) ? y : model.coefficients[o][0];
  }
  return clamp_to_range(FontParams::from_array(out));
}

}  // namespace legible
