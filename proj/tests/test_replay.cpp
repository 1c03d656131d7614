#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "legible/digest.hpp"
#include "legible/replay.hpp"
#include "support.hpp"

using namespace legible;
using support::code_of;

namespace {

std::vector<SensorSample> trace() {
  auto out = support::steady(0, 20, 300, 0.1);
  auto walk = support::steady(2000, 20, 2000, 0.6, 35.0);
  out.insert(out.end(), walk.begin(), walk.end());
  return out;
}

std::vector<FeedbackAction> actions() {
  return {
      {300, {24, 1, 0.3, 0.1}, {}, "office"},  // too early: 4 samples
      {1900, {24, 1.2, 0.35, 0.15}, {}, "office"},
      {1950, {25, 1.2, 0.35, 0.15}, {true, false, false}, std::nullopt},
      {3900, {30, 2, 0.5, 0.2}, {}, "street"},
  };
}

}  // namespace

TEST_CASE("feedback log round trip") {
  for (const auto& a : actions()) {
    const auto back = parse_feedback_action(to_log_line(a), 1);
    CHECK(back.ts_ms == a.ts_ms);
    CHECK(back.params == a.params);
    CHECK(back.flags == a.flags);
    CHECK(back.environment == a.environment);
  }
  std::istringstream in(to_log_line(actions()[1]) + "\n\n" + to_log_line(actions()[3]) + "\n");
  CHECK(read_feedback_log(in).size() == 2);
  CHECK(code_of([] { parse_feedback_action("{\"ts_ms\": 1}", 3); }) == ErrorCode::ParseError);
}

TEST_CASE("replay is byte deterministic") {
  support::TempDir a, b;
  const auto ra = replay(trace(), actions(), {}, support::fixture_prior(), a.path() / "out");
  const auto rb = replay(trace(), actions(), {}, support::fixture_prior(), b.path() / "out");
  CHECK(ra.samples_accepted == 40);
  CHECK(ra.feedback_applied == 3);
  CHECK(ra.feedback_skipped.size() == 1);
  REQUIRE(ra.models.size() == rb.models.size());
  REQUIRE(ra.models.size() == 3);
  for (std::size_t i = 0; i < ra.models.size(); ++i) {
    CHECK(ra.models[i].scenario == rb.models[i].scenario);
    CHECK(ra.models[i].sha256 == rb.models[i].sha256);
    CHECK(sha256_file(ra.models[i].path) == ra.models[i].sha256);
  }
  CHECK(ra.to_json().at("models").size() == 3);

  CHECK(code_of([&] { replay(trace(), actions(), {}, support::fixture_prior(), a.path() / "out"); }) ==
        ErrorCode::StorageError);
}
