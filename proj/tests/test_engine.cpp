#include <doctest.h>

#include <thread>

#include "legible/engine.hpp"
#include "support.hpp"

using namespace legible;
using support::code_of;
using support::steady;

namespace {

struct OfflineLabeler : Labeler {
  std::string_view name() const noexcept override { return "offline"; }
  std::optional<std::string> select(const LabelContext&, std::span<const ScenarioLabel>) override {
    throw Error(ErrorCode::LabelerUnavailable, "timeout");
  }
  std::string generate(const LabelContext&) override { throw Error(ErrorCode::LabelerUnavailable, "timeout"); }
  std::string edit(const ScenarioLabel&, std::string_view) override {
    throw Error(ErrorCode::LabelerUnavailable, "timeout");
  }
};

}  // namespace

TEST_CASE("sessions") {
  Engine engine({}, support::fixture_prior());
  const auto a = engine.open_session("u1");
  const auto b = engine.open_session("u1", 7.0);
  CHECK(a.session_id != b.session_id);
  CHECK(a.ipd_cm == 6.3);
  CHECK(b.ipd_cm == 7.0);
  CHECK(engine.session_count() == 2);
  CHECK(code_of([&] { engine.open_session(""); }) == ErrorCode::InvalidParams);
  CHECK(code_of([&] { engine.open_session("u", 4.4); }) == ErrorCode::InvalidCalibration);
  CHECK(code_of([&] { engine.open_session("u", 8.1); }) == ErrorCode::InvalidCalibration);
  CHECK_NOTHROW(engine.open_session("u", 4.5));
  CHECK(engine.close_session(a.session_id));
  CHECK_FALSE(engine.close_session(a.session_id));
  CHECK(code_of([&] { engine.recommend(a.session_id, {}); }) == ErrorCode::UnknownSession);
}

TEST_CASE("ingest rejects bad and backward samples and slides the window") {
  Engine engine({}, support::fixture_prior());
  const auto s = engine.open_session("u1").session_id;
  auto batch = steady(1000, 5, 300, 0.1);
  auto r = engine.ingest(s, batch);
  CHECK(r.accepted == 5);
  CHECK(r.window_size == 5);

  std::vector<SensorSample> mixed = steady(1500, 3, 300, 0.1);
  mixed[1].timestamp_ms = 900;  // backward
  mixed[2].lux = -1;            // invalid
  r = engine.ingest(s, mixed);
  CHECK(r.accepted == 1);
  CHECK(r.rejected == 2);

  // 2 s later only the newest second remains
  r = engine.ingest(s, steady(3500, 3, 300, 0.1));
  CHECK(r.window_size == 3);
  CHECK(code_of([&] { engine.recommend(s, {}); }) == ErrorCode::InsufficientSamples);
}

TEST_CASE("recommend is deterministic and starts on GROUP") {
  Engine engine({}, support::fixture_prior());
  const auto s = engine.open_session("u1").session_id;
  CHECK(code_of([&] { engine.recommend(s, {}); }) == ErrorCode::EmptyWindow);
  engine.ingest(s, steady(0, 10, 300, 0.1));
  const auto r1 = engine.recommend(s, {}, "office");
  const auto r2 = engine.recommend(s, {});
  CHECK(r1.params == r2.params);
  CHECK(r1.scenario == "Still-Office");
  CHECK_FALSE(r1.label_confirmed);
  CHECK(r1.model_scenario == "GROUP");
  CHECK(r1.model_version == 1);
  CHECK(r1.motion == MotionState::Still);
  CHECK(in_range(r1.params));
  CHECK(r1.params == predict(*support::fixture_prior()->model, r1.features_used));

  // another engine on the same prior agrees bit for bit
  Engine other({}, support::fixture_prior());
  const auto t = other.open_session("u9").session_id;
  other.ingest(t, steady(0, 10, 300, 0.1));
  CHECK(other.recommend(t, {}, "office").params == r1.params);
}

TEST_CASE("distance imputation uses the user's history") {
  Engine engine({}, support::fixture_prior());
  const auto s = engine.open_session("u1").session_id;
  engine.ingest(s, steady(0, 5, 300, 0.1, 40.0));
  const auto t = engine.open_session("u1").session_id;
  engine.ingest(t, steady(0, 5, 300, 0.1, std::nullopt));
  const auto r = engine.recommend(t, {});
  CHECK(r.context.distance_imputed);
  CHECK(r.context.distance_cm == 40.0);

  const auto fresh = engine.open_session("u2").session_id;
  engine.ingest(fresh, steady(0, 5, 300, 0.1, std::nullopt));
  CHECK(engine.recommend(fresh, {}).context.distance_cm == 31.0);
}

TEST_CASE("feedback confirms, trains and moves the recommendation") {
  Engine engine({}, support::fixture_prior());
  const auto s = engine.open_session("u1").session_id;
  engine.ingest(s, steady(0, 10, 300, 0.1));
  const FontParams target{28, 2.0, 0.5, 0.25};
  const auto before = engine.recommend(s, {}, "office");

  CHECK(code_of([&] { engine.feedback(s, {50, 1, 0.3, 0.1}, {}); }) == ErrorCode::InvalidParams);
  const auto fb = engine.feedback(s, target, {});
  CHECK(fb.scenario == "Still-Office");
  CHECK(fb.model_version == 1);
  CHECK(fb.user_rows == 1);

  const auto after = engine.recommend(s, {});
  CHECK(after.label_confirmed);
  CHECK(after.model_scenario == "Still-Office");
  CHECK(l1_distance(after.params, target) < l1_distance(before.params, target));

  CHECK(engine.model("Still-Office", "u1")->version == 1);
  CHECK(engine.model("GROUP", std::nullopt)->version == 1);
  CHECK(code_of([&] { engine.model("Still-Office", std::nullopt); }) == ErrorCode::UnknownModel);
  CHECK(code_of([&] { engine.model("Running-Moon", "u1"); }) == ErrorCode::UnknownModel);
  CHECK(engine.user_scenarios("u1") == std::vector<std::string>{"Still-Office"});
}

TEST_CASE("label endpoints") {
  Engine engine({}, support::fixture_prior());
  const auto s = engine.open_session("u1").session_id;
  CHECK(engine.get_label(s).scenario == "GROUP");
  CHECK(code_of([&] { engine.set_label(s, std::nullopt, true); }) == ErrorCode::InvalidLabel);
  CHECK(code_of([&] { engine.edit_label(s, "I am running"); }) == ErrorCode::InvalidLabel);

  engine.ingest(s, steady(0, 10, 300, 0.1));
  engine.recommend(s, {}, "office");
  auto st = engine.get_label(s);
  CHECK(st.scenario == "Still-Office");
  CHECK_FALSE(st.confirmed);
  st = engine.set_label(s, std::nullopt, true);
  CHECK(st.confirmed);

  st = engine.edit_label(s, "I am not wearing glasses");
  CHECK(st.changed);
  CHECK(st.scenario == "Still-Office-no glasses");
  CHECK(st.confirmed);
  // the edit sticks on the next recommend
  CHECK(engine.recommend(s, {}).scenario == "Still-Office-no glasses");

  st = engine.set_label(s, std::string("Still-Library"), false);
  CHECK(st.scenario == "Still-Library");
  CHECK_FALSE(st.confirmed);
  CHECK(code_of([&] { engine.set_label(s, std::string("nonsense"), true); }) ==
        ErrorCode::MalformedLabelerOutput);

  // once motion changes the pinned label yields to a fresh resolution
  engine.ingest(s, steady(2000, 10, 300, 1.5));
  const auto r = engine.recommend(s, {});
  CHECK(r.motion == MotionState::Running);
  CHECK(r.scenario == "Running-Library");
}

TEST_CASE("an unreachable labeler degrades to rules") {
  Engine engine({}, support::fixture_prior(), std::make_shared<OfflineLabeler>());
  const auto s = engine.open_session("u1").session_id;
  engine.ingest(s, steady(0, 10, 300, 0.1));
  const auto r = engine.recommend(s, {true, false, false}, "park");
  CHECK(r.scenario == "Still-Park-fatigued");
  CHECK_FALSE(r.warnings.empty());
  const auto st = engine.edit_label(s, "I am walking");
  CHECK(st.scenario == "Walking-Park-fatigued");
  CHECK_FALSE(st.warnings.empty());
}

TEST_CASE("file-backed engine restores state") {
  support::TempDir dir;
  EngineConfig cfg;
  cfg.data_dir = dir.path();
  FontParams served;
  {
    Engine engine(cfg, support::fixture_prior());
    const auto s = engine.open_session("alice").session_id;
    engine.ingest(s, steady(0, 10, 300, 0.1));
    engine.recommend(s, {}, "office");
    engine.feedback(s, {26, 1.5, 0.4, 0.2}, {});
    served = engine.recommend(s, {}).params;
  }
  Engine engine(cfg, support::fixture_prior());
  const auto s = engine.open_session("alice").session_id;
  engine.ingest(s, steady(0, 10, 300, 0.1));
  const auto r = engine.recommend(s, {}, "office");
  CHECK(r.label_confirmed);
  CHECK(r.model_scenario == "Still-Office");
  CHECK(r.params == served);
}

TEST_CASE("concurrent sessions") {
  Engine engine({}, support::fixture_prior());
  std::vector<std::thread> threads;
  std::atomic<int> failures{0};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      try {
        const auto s = engine.open_session("user" + std::to_string(t % 2)).session_id;
        for (int i = 0; i < 20; ++i) {
          engine.ingest(s, steady(i * 500, 5, 300, 0.1));
          engine.recommend(s, {}, "office");
          if (i % 5 == 0) engine.feedback(s, {22, 1, 0.3, 0.1}, {});
        }
      } catch (const std::exception&) {
        ++failures;
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(failures == 0);
  CHECK(engine.model("Still-Office", "user0")->user_rows == 8);
}
