#include <doctest.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "legible/datagen.hpp"
#include "legible/digest.hpp"
#include "support.hpp"

using namespace legible;
using namespace legible::datagen;
using support::code_of;

namespace {

const std::filesystem::path kFixtures = LEGIBLE_FIXTURES_DIR;

CouplingConfig shipped_coupling() {
  std::ifstream in(kFixtures / "coupling.json");
  return CouplingConfig::from_json(nlohmann::json::parse(in));
}

// mean and Bessel-corrected sd, written out longhand
std::pair<double, double> moments(const std::vector<double>& v) {
  long double s = 0;
  for (double x : v) s += x;
  const long double m = s / v.size();
  long double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return {static_cast<double>(m), static_cast<double>(std::sqrt(ss / (v.size() - 1)))};
}

// Moments of N(mu, sigma) truncated to [lo, inf).
std::pair<double, double> truncated_moments(double mu, double sigma, double lo) {
  const double a = (lo - mu) / sigma;
  const double pdf = std::exp(-0.5 * a * a) / std::sqrt(2 * std::numbers::pi);
  const double tail = 0.5 * std::erfc(a / std::sqrt(2.0));
  const double l = pdf / tail;
  return {mu + sigma * l, sigma * std::sqrt(1 + a * l - l * l)};
}

}  // namespace

TEST_CASE("reference scenarios are well formed") {
  const auto specs = reference_scenarios();
  REQUIRE(specs.size() == 6);
  std::size_t total = 0;
  for (const auto& s : specs) total += s.row_count;
  CHECK(total == kGroupRowCount);
  CHECK(specs[0].row_count == 83);
  CHECK(specs[5].row_count == 82);
}

TEST_CASE("match_moments hits targets exactly") {
  std::vector<double> v{1, 2, 3, 4, 10, 11, 50};
  match_moments(v, {5.0, 2.0}, -100, 100);
  auto [m, s] = moments(v);
  CHECK(m == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(s == doctest::Approx(2.0).epsilon(1e-12));

  // clamping at 0 still converges
  std::vector<double> w{0.1, 0.2, 0.3, 0.5, 0.8, 1.3, 2.1, 3.4};
  match_moments(w, {0.4, 0.3}, 0, 1e9);
  std::tie(m, s) = moments(w);
  CHECK(m == doctest::Approx(0.4).epsilon(1e-10));
  CHECK(s == doctest::Approx(0.3).epsilon(1e-10));
  for (double x : w) CHECK(x >= 0.0);

  std::vector<double> c{3, 1, 2};
  match_moments(c, {7.0, 0.0}, 0, 100);
  CHECK(c == std::vector<double>{7, 7, 7});
}

TEST_CASE("truncated_normal_parent inverts the truncated moments") {
  for (auto [mean, sd] : {std::pair{0.5, 0.3}, {0.2, 0.17}, {31.0, 5.0}, {1.0, 0.9}}) {
    const auto parent = truncated_normal_parent({mean, sd}, 0.0);
    const auto [m, s] = truncated_moments(parent.mean, parent.sd, 0.0);
    CHECK(m == doctest::Approx(mean).epsilon(1e-8));
    CHECK(s == doctest::Approx(sd).epsilon(1e-8));
  }
  CHECK(code_of([] { truncated_normal_parent({0.5, 0.6}, 0.0); }) == ErrorCode::InvalidSpec);
}

TEST_CASE("zero-spread specs yield constant columns") {
  auto specs = reference_scenarios();
  for (auto& s : specs) {
    for (Moments* m : {&s.vib_x, &s.vib_y, &s.vib_z, &s.lux, &s.distance_cm, &s.size_sp, &s.weight_px,
                       &s.line_spacing_em, &s.letter_spacing_em}) {
      m->sd = 0.0;
    }
  }
  const auto rows = generate_group_dataset(specs, initial_coupling());
  REQUIRE(rows.size() == kGroupRowCount);
  for (const auto& r : rows) {
    const auto& s = specs[static_cast<std::size_t>(r.scenario_id - 1)];
    CHECK(r.vib_x == s.vib_x.mean);
    CHECK(r.lux == s.lux.mean);
    CHECK(r.distance_cm == s.distance_cm.mean);
    CHECK(r.params.size_sp == s.size_sp.mean);
    CHECK(r.params.letter_spacing_em == s.letter_spacing_em.mean);
  }
}

TEST_CASE("generation is deterministic and matches reference moments") {
  const auto specs = reference_scenarios();
  const auto coupling = shipped_coupling();
  const auto a = generate_group_dataset(specs, coupling);
  const auto b = generate_group_dataset(specs, coupling);
  CHECK(to_jsonl(a) == to_jsonl(b));

  auto other = coupling;
  other.seed += 1;
  CHECK(to_jsonl(generate_group_dataset(specs, other)) != to_jsonl(a));

  for (const auto& s : specs) {
    std::vector<double> vib, size;
    for (const auto& r : a) {
      if (r.scenario_id != s.id) continue;
      vib.push_back(r.vib_y);
      size.push_back(r.params.size_sp);
    }
    CHECK(vib.size() == s.row_count);
    CHECK(moments(vib).first == doctest::Approx(s.vib_y.mean).epsilon(1e-9));
    CHECK(moments(vib).second == doctest::Approx(s.vib_y.sd).epsilon(1e-9));
    CHECK(moments(size).first == doctest::Approx(s.size_sp.mean).epsilon(1e-9));
  }
  for (const auto& r : a) CHECK(in_range(r.params));
}

TEST_CASE("shipped fixture reproduces from its coupling") {
  const auto rows = generate_group_dataset(reference_scenarios(), shipped_coupling());
  std::ifstream digest(kFixtures / "group_dataset.sha256");
  std::string expected;
  digest >> expected;
  CHECK(sha256_hex(to_jsonl(rows)) == expected);
  CHECK(sha256_file(kFixtures / "group_dataset.jsonl") == expected);

  std::ifstream in(kFixtures / "group_dataset.jsonl");
  const auto parsed = read_jsonl(in);
  CHECK(to_jsonl(parsed) == to_jsonl(rows));
}

TEST_CASE("coupling config json and validation") {
  const auto c = shipped_coupling();
  CHECK(CouplingConfig::from_json(nlohmann::json::parse(c.to_json().dump())).to_json() == c.to_json());
  auto bad = c;
  bad.motion_share = 1.0;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidSpec);
  bad = c;
  bad.target_spearman[0][0] = 1.5;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidSpec);
  bad = c;
  bad.noise_scale[1] = -1;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidSpec);
}

TEST_CASE("invalid specs are rejected") {
  auto specs = reference_scenarios();
  specs.pop_back();
  CHECK(code_of([&] { generate_group_dataset(specs, initial_coupling()); }) == ErrorCode::InvalidSpec);
  specs = reference_scenarios();
  specs[0].row_count = 84;
  CHECK(code_of([&] { generate_group_dataset(specs, initial_coupling()); }) == ErrorCode::InvalidSpec);
  specs = reference_scenarios();
  specs[2].lux.sd = -1;
  CHECK(code_of([&] { generate_group_dataset(specs, initial_coupling()); }) == ErrorCode::InvalidSpec);
  specs = reference_scenarios();
  specs[1].size_sp.mean = 60;
  CHECK(code_of([&] { generate_group_dataset(specs, initial_coupling()); }) == ErrorCode::InvalidSpec);
}

TEST_CASE("calibration edge cases") {
  const auto specs = reference_scenarios();
  // nothing to fit: the start already satisfies every fitted entry
  auto none = initial_coupling();
  for (auto& row : none.target_spearman) row.fill(0.0);
  const auto trivial = search_coupling(specs, none);
  CHECK(trivial.converged);
  CHECK(trivial.evaluations <= 2);

  // size cannot be +0.9 with both light and distance when those two are
  // strongly opposed in the pooled data
  auto infeasible = initial_coupling();
  for (auto& row : infeasible.target_spearman) row.fill(0.0);
  infeasible.target_spearman[0] = {0.95, -0.95, 0.95, -0.95, 0.95};
  CalibrationOptions quick;
  quick.max_evaluations = 400;
  CHECK(code_of([&] { calibrate_coupling(specs, infeasible, quick); }) == ErrorCode::CalibrationFailed);
  CHECK_FALSE(search_coupling(specs, infeasible, quick).converged);
}

TEST_CASE("max_deviation only counts fitted entries") {
  CorrelationGrid target{}, achieved{};
  target[0][0] = 0.5;
  achieved[0][0] = 0.4;
  target[1][1] = 0.05;
  achieved[1][1] = 0.9;
  CHECK(max_deviation(achieved, target, 0.1) == doctest::Approx(0.1));
  CHECK(max_deviation(achieved, target, 0.0) == doctest::Approx(0.85));
}
