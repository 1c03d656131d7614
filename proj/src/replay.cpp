#include "legible/replay.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "legible/datagen.hpp"
#include "legible/digest.hpp"
#include "legible/error.hpp"
#include "legible/wire.hpp"

namespace legible {

FeedbackAction parse_feedback_action(std::string_view line, std::size_t line_no) {
  try {
    const auto j = nlohmann::json::parse(line);
    FeedbackAction a;
    const auto& ts = j.at("ts_ms");
    if (!ts.is_number_integer()) throw Error(ErrorCode::ParseError, "ts_ms is not an integer");
    a.ts_ms = ts.get<std::int64_t>();
    a.params = font_params_from_json(j.at("params"));
    if (auto it = j.find("flags"); it != j.end()) a.flags = flags_from_json(*it);
    if (auto it = j.find("environment"); it != j.end() && !it->is_null()) {
      a.environment = it->get<std::string>();
    }
    return a;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ParseError, "feedback line " + std::to_string(line_no) + ": " + e.what());
  }
}

std::vector<FeedbackAction> read_feedback_log(std::istream& in) {
  std::vector<FeedbackAction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_feedback_action(line, line_no));
  }
  return out;
}

std::string to_log_line(const FeedbackAction& a) {
  nlohmann::json j = {{"ts_ms", a.ts_ms}, {"params", to_json(a.params)}, {"flags", to_json(a.flags)}};
  if (a.environment) j["environment"] = *a.environment;
  return j.dump();
}

nlohmann::json ReplayReport::to_json() const {
  nlohmann::json models_json = nlohmann::json::array();
  for (const auto& m : models) {
    models_json.push_back({{"scenario", m.scenario},
                           {"version", m.version},
                           {"sha256", m.sha256},
                           {"path", m.path.string()}});
  }
  return {{"samples_accepted", samples_accepted},
          {"samples_rejected", samples_rejected},
          {"feedback_applied", feedback_applied},
          {"feedback_skipped", feedback_skipped},
          {"models", std::move(models_json)}};
}

ReplayReport replay(std::span<const SensorSample> trace, std::span<const FeedbackAction> actions,
                    EngineConfig config, std::shared_ptr<const GroupPrior> prior,
                    const std::filesystem::path& out_dir, const std::string& user_id) {
  namespace fs = std::filesystem;
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    throw Error(ErrorCode::StorageError, "replay output directory is not empty: " + out_dir.string());
  }
  config.data_dir = out_dir;
  Engine engine(config, std::move(prior));
  const auto session = engine.open_session(user_id);

  ReplayReport report;
  std::size_t next = 0;
  auto feed_until = [&](std::optional<std::int64_t> ts) {
    const std::size_t begin = next;
    while (next < trace.size() && (!ts || trace[next].timestamp_ms <= *ts)) ++next;
    if (next > begin) {
      const auto r = engine.ingest(session.session_id, trace.subspan(begin, next - begin));
      report.samples_accepted += r.accepted;
      report.samples_rejected += r.rejected;
    }
  };

  for (const auto& a : actions) {
    feed_until(a.ts_ms);
    try {
      engine.feedback(session.session_id, a.params, a.flags, a.environment);
      ++report.feedback_applied;
    } catch (const Error& e) {
      report.feedback_skipped.push_back("ts_ms " + std::to_string(a.ts_ms) + ": " +
                                        std::string(to_string(e.code())) + ": " + e.what());
    }
  }
  feed_until(std::nullopt);

  const fs::path models_dir = out_dir / "users" / encode_file_name(user_id) / "models";
  for (const auto& scenario : engine.user_scenarios(user_id)) {
    const auto model = engine.model(scenario, user_id);
    const auto path = models_dir / (encode_file_name(scenario) + ".json");
    report.models.push_back({scenario, model->version, sha256_file(path), path});
  }
  return report;
}

std::shared_ptr<const GroupPrior> load_group_prior(const std::filesystem::path& dataset,
                                                   double lambda) {
  std::ifstream in(dataset);
  if (!in) throw Error(ErrorCode::StorageError, "cannot open group dataset " + dataset.string());
  const auto rows = datagen::read_jsonl(in);
  return make_group_prior(datagen::to_training_rows(rows), lambda);
}

}  // namespace legible
