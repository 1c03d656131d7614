#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "legible/engine.hpp"

namespace legible {

// One line of a feedback log:
//   {"ts_ms": 1200, "params": {...}, "flags": {...}, "environment": "Office"}
// applied once every trace sample with ts_ms <= this one has been ingested.
struct FeedbackAction {
  std::int64_t ts_ms = 0;
  FontParams params;
  PersonalFlags flags;
  std::optional<std::string> environment;
};

FeedbackAction parse_feedback_action(std::string_view line, std::size_t line_no);
std::vector<FeedbackAction> read_feedback_log(std::istream& in);
std::string to_log_line(const FeedbackAction& a);

struct ReplayModel {
  std::string scenario;
  std::uint64_t version = 0;
  std::string sha256;
  std::filesystem::path path;
};

struct ReplayReport {
  std::size_t samples_accepted = 0;
  std::size_t samples_rejected = 0;
  std::size_t feedback_applied = 0;
  // actions that hit an error (e.g. too few samples yet), with reasons
  std::vector<std::string> feedback_skipped;
  std::vector<ReplayModel> models;

  nlohmann::json to_json() const;
};

/// Replays into a fresh file store under `out_dir` (which must not exist or
/// be empty) using the fallback labeler. Deterministic: the same inputs
/// produce byte-identical model files.
ReplayReport replay(std::span<const SensorSample> trace, std::span<const FeedbackAction> actions,
                    EngineConfig config, std::shared_ptr<const GroupPrior> prior,
                    const std::filesystem::path& out_dir, const std::string& user_id = "replay");

/// Reads a group dataset fixture and fits the GROUP model.
std::shared_ptr<const GroupPrior> load_group_prior(const std::filesystem::path& dataset,
                                                   double lambda);

}  // namespace legible
