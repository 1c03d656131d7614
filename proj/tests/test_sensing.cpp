#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "legible/error.hpp"
#include "legible/sensing.hpp"

using namespace legible;

namespace {

SensorSample sample(std::int64_t ts, double lux, Vec3 v, std::optional<double> dist = 33.0) {
  SensorSample s;
  s.timestamp_ms = ts;
  s.lux = lux;
  s.accel_offset = v;
  s.distance_cm = dist;
  return s;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidParams;
}

ContextFeatures with_vibration(double x, double y, double z) {
  ContextFeatures f;
  f.vib_x = x;
  f.vib_y = y;
  f.vib_z = z;
  f.distance_cm = 30;
  return f;
}

}  // namespace

TEST_CASE("estimate_reading_distance") {
  CHECK(estimate_reading_distance(500, 6.3, 500) == doctest::Approx(6.3));
  CHECK(estimate_reading_distance(105, 6.3, 500) == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(code_of([] { estimate_reading_distance(0, 6.3, 500); }) == ErrorCode::NonPositiveInput);
  CHECK(code_of([] { estimate_reading_distance(100, -1, 500); }) == ErrorCode::NonPositiveInput);
  CHECK(code_of([] { estimate_reading_distance(100, 6.3, 0); }) == ErrorCode::NonPositiveInput);
}

TEST_CASE("estimate_reading_distance round-trips and decreases in span") {
  const double f = 500, ipd = 6.3;
  for (double d = 5.0; d <= 100.0; d += 0.5) {
    const double span = f * ipd / d;
    CHECK(std::fabs(estimate_reading_distance(span, ipd, f) - d) <= 1e-9 * d);
  }
  double prev = INFINITY;
  for (double span = 10; span <= 1000; span += 10) {
    const double d = estimate_reading_distance(span, ipd, f);
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("aggregate_window: constants and two-point means") {
  std::vector<SensorSample> s;
  for (int i = 0; i < 10; ++i) s.push_back(sample(i * 100, 100, {0.2, 0.1, 0.3}));
  const auto f = aggregate_window(s, {}, {});
  CHECK(f.light_lux == doctest::Approx(100));
  CHECK(f.vib_x == doctest::Approx(0.2));
  CHECK(f.vib_y == doctest::Approx(0.1));
  CHECK(f.vib_z == doctest::Approx(0.3));
  CHECK(f.distance_cm == doctest::Approx(33));
  CHECK(f.window_ms == 900);
  CHECK_FALSE(f.distance_imputed);

  WindowConfig two;
  two.min_samples = 2;
  std::vector<SensorSample> pair{sample(0, 80, {}), sample(100, 120, {})};
  CHECK(aggregate_window(pair, {}, two).light_lux == doctest::Approx(100));
}

TEST_CASE("aggregate_window: errors") {
  std::vector<SensorSample> none;
  CHECK(code_of([&] { aggregate_window(none, {}, {}); }) == ErrorCode::EmptyWindow);
  std::vector<SensorSample> three{sample(0, 1, {}), sample(1, 1, {}), sample(2, 1, {})};
  CHECK(code_of([&] { aggregate_window(three, {}, {}); }) == ErrorCode::InsufficientSamples);
  std::vector<SensorSample> back{sample(5, 1, {}), sample(4, 1, {}), sample(6, 1, {}),
                                 sample(7, 1, {}), sample(8, 1, {})};
  CHECK(code_of([&] { aggregate_window(back, {}, {}); }) == ErrorCode::OutOfOrder);
}

TEST_CASE("aggregate_window: distance sources and imputation") {
  WindowConfig cfg;
  std::vector<SensorSample> s;
  for (int i = 0; i < 5; ++i) {
    auto x = sample(i, 10, {}, std::nullopt);
    if (i == 0) x.distance_cm = 40.0;
    if (i == 1) x.eye_span_px = 500.0 * 6.3 / 20.0;  // 20 cm
    s.push_back(x);
  }
  // only samples that carry a distance count toward the mean
  CHECK(aggregate_window(s, {}, cfg).distance_cm == doctest::Approx(30.0));

  for (auto& x : s) {
    x.distance_cm.reset();
    x.eye_span_px.reset();
  }
  const auto imputed = aggregate_window(s, {}, cfg, 27.5);
  CHECK(imputed.distance_cm == 27.5);
  CHECK(imputed.distance_imputed);
  CHECK(aggregate_window(s, {}, cfg).distance_cm == cfg.default_distance_cm);
}

TEST_CASE("aggregate_window: permutation invariance and lux scale equivariance") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 2);
  std::vector<SensorSample> s;
  for (int i = 0; i < 12; ++i) s.push_back(sample(1000, 100 * u(rng), {u(rng), u(rng), u(rng)}, 20 + 10 * u(rng)));
  const auto base = aggregate_window(s, {}, {});
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(s.begin(), s.end(), rng);
    const auto f = aggregate_window(s, {}, {});
    CHECK(f.light_lux == doctest::Approx(base.light_lux).epsilon(1e-12));
    CHECK(f.vib_x == doctest::Approx(base.vib_x).epsilon(1e-12));
    CHECK(f.distance_cm == doctest::Approx(base.distance_cm).epsilon(1e-12));
  }
  for (double c : {0.5, 3.0, 1000.0}) {
    auto scaled = s;
    for (auto& x : scaled) x.lux *= c;
    CHECK(aggregate_window(scaled, {}, {}).light_lux ==
          doctest::Approx(c * aggregate_window(s, {}, {}).light_lux).epsilon(1e-12));
  }
}

TEST_CASE("classify_motion: condition means and boundaries") {
  const std::vector<std::pair<Vec3, MotionState>> rows = {
      {{0.18, 0.11, 0.26}, MotionState::Still},   {{0.53, 0.65, 0.80}, MotionState::Walking},
      {{1.41, 1.42, 1.58}, MotionState::Running}, {{0.16, 0.10, 0.24}, MotionState::Still},
      {{0.52, 0.68, 0.78}, MotionState::Walking}, {{1.54, 1.52, 1.70}, MotionState::Running},
  };
  for (const auto& [v, want] : rows) CHECK(classify_motion(with_vibration(v.x, v.y, v.z)) == want);

  CHECK(classify_motion(with_vibration(0.35, 0.35, 0.35)) == MotionState::Walking);
  CHECK(classify_motion(with_vibration(1.10, 1.10, 1.10)) == MotionState::Running);
  CHECK(classify_motion(with_vibration(0.0, 0.0, 0.0)) == MotionState::Still);
}

TEST_CASE("trace lines") {
  const auto s = parse_trace_line(R"({"ts_ms": 5, "lux": 1.5, "ax": 0.1, "ay": 0.2, "az": 0.3, "eye_px": 90, "extra": 1})", 1);
  CHECK(s.timestamp_ms == 5);
  CHECK(s.eye_span_px.value() == 90);
  CHECK_FALSE(s.distance_cm.has_value());
  CHECK(parse_trace_line(to_trace_line(s), 1) == s);

  std::istringstream in("{\"ts_ms\":1,\"lux\":1,\"ax\":0,\"ay\":0,\"az\":0}\n\n{\"ts_ms\":2,\"lux\":1,\"ax\":0}\n");
  try {
    read_trace(in);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK(code_of([] { parse_trace_line(R"({"ts_ms": 1.5, "lux": 1, "ax": 0, "ay": 0, "az": 0})", 1); }) ==
        ErrorCode::ParseError);
  CHECK(code_of([] { parse_trace_line("not json", 1); }) == ErrorCode::ParseError);
}

TEST_CASE("motion names") {
  CHECK(parse_motion("running") == MotionState::Running);
  CHECK(parse_motion("STILL") == MotionState::Still);
  CHECK_FALSE(parse_motion("jogging").has_value());
  CHECK(to_string(MotionState::Walking) == "Walking");
}
