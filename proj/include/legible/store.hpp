#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "legible/labeltree.hpp"
#include "legible/modeling.hpp"

namespace legible {

// One human correction: the context it was made in and the confirmed params.
struct FeedbackEvent {
  FeatureVector features;
  std::string label;
  FontParams params;
  std::int64_t timestamp_ms = 0;

  /// Throws InvalidParams when params are out of range, the label is empty
  /// or a feature is non-finite.
  void validate() const;

  nlohmann::json to_json() const;
  static FeedbackEvent from_json(const nlohmann::json& j);
  bool operator==(const FeedbackEvent&) const = default;
};

// Persistence for one user's datasets, model snapshots and label tree.
// Every failure surfaces as Error(StorageError).
class StorageBackend {
 public:
  virtual ~StorageBackend() = default;

  /// Must be durable before returning: this is the write-ahead step.
  virtual void append_event(const FeedbackEvent& event) = 0;
  virtual void write_model(const ScenarioModel& model) = 0;
  virtual void write_labels(const LabelTree& tree) = 0;

  virtual std::map<std::string, std::vector<FeedbackEvent>> load_events() = 0;
  virtual std::map<std::string, ScenarioModel> load_models() = 0;
  virtual std::optional<LabelTree> load_labels() = 0;
};

class MemoryBackend : public StorageBackend {
 public:
  void append_event(const FeedbackEvent& event) override;
  void write_model(const ScenarioModel& model) override;
  void write_labels(const LabelTree& tree) override;
  std::map<std::string, std::vector<FeedbackEvent>> load_events() override;
  std::map<std::string, ScenarioModel> load_models() override;
  std::optional<LabelTree> load_labels() override;

 private:
  std::mutex mu_;
  std::map<std::string, std::vector<FeedbackEvent>> events_;
  std::map<std::string, ScenarioModel> models_;
  std::optional<LabelTree> labels_;
};

// Layout under root:
//   datasets/<scenario>.jsonl   append-only FeedbackEvent lines (fsync'd)
//   models/<scenario>.json      latest snapshot (write-temp-then-rename)
//   labels.json                 label tree
// Scenario names are percent-encoded into file names.
class FileBackend : public StorageBackend {
 public:
  explicit FileBackend(std::filesystem::path root);

  void append_event(const FeedbackEvent& event) override;
  void write_model(const ScenarioModel& model) override;
  void write_labels(const LabelTree& tree) override;
  /// A torn final line (crash mid-append) is dropped; damage anywhere else
  /// is a StorageError.
  std::map<std::string, std::vector<FeedbackEvent>> load_events() override;
  std::map<std::string, ScenarioModel> load_models() override;
  std::optional<LabelTree> load_labels() override;

  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path root_;
};

std::string encode_file_name(std::string_view name);
std::string decode_file_name(std::string_view name);

/// Write `content` to `path` via a temporary file, fsync and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

struct LearningConfig {
  double lambda = 1.0;
  double group_weight = 1.0;
  double user_weight = 100.0;
  // a scenario serves its own model once it holds this many user rows
  std::size_t own_min_rows = 1;
  // another scenario's model is borrowed only if it holds this many
  std::size_t transfer_min_rows = 3;
};

// Cold-start corpus shared by all users, and the model fitted on it alone.
struct GroupPrior {
  std::vector<TrainingRow> rows;
  std::shared_ptr<const ScenarioModel> model;
};

std::shared_ptr<const GroupPrior> make_group_prior(std::vector<TrainingRow> rows, double lambda);

// Per-user scenario datasets and their models. Refits of one scenario are
// serialized; model reads are lock-free snapshot loads.
class ScenarioStore {
 public:
  /// Loads whatever the backend holds and refits scenarios whose snapshot
  /// lags their dataset (a crash between append and refit).
  ScenarioStore(std::shared_ptr<const GroupPrior> prior, LearningConfig config,
                std::unique_ptr<StorageBackend> backend);
  ~ScenarioStore();

  ScenarioStore(const ScenarioStore&) = delete;
  ScenarioStore& operator=(const ScenarioStore&) = delete;

  const LearningConfig& config() const noexcept { return config_; }
  std::shared_ptr<const ScenarioModel> group_model() const { return prior_->model; }
  /// nullptr when the scenario has never been fitted.
  std::shared_ptr<const ScenarioModel> model(std::string_view scenario) const;
  std::size_t user_rows(std::string_view scenario) const;
  std::vector<FeedbackEvent> events(std::string_view scenario) const;
  std::vector<std::string> scenarios() const;

  /// Appends (write-ahead), then refits group rows (group_weight) plus all
  /// of the scenario's user rows (user_weight). On any failure after the
  /// append the previous model stays served and StorageError is thrown.
  std::shared_ptr<const ScenarioModel> update_with_feedback(const FeedbackEvent& event);

  StorageBackend& backend() noexcept { return *backend_; }

 private:
  struct Slot;
  Slot& slot_for(const std::string& scenario);
  const Slot* find_slot(std::string_view scenario) const;
  ScenarioModel refit(const std::string& scenario, const std::vector<FeedbackEvent>& events,
                      std::uint64_t next_version) const;

  std::shared_ptr<const GroupPrior> prior_;
  LearningConfig config_;
  std::unique_ptr<StorageBackend> backend_;
  mutable std::shared_mutex slots_mu_;
  std::map<std::string, std::unique_ptr<Slot>, std::less<>> slots_;
};

inline std::shared_ptr<const ScenarioModel> update_with_feedback(ScenarioStore& store,
                                                                 const FeedbackEvent& event) {
  return store.update_with_feedback(event);
}

/// Own model when the target has >= own_min_rows user rows; else the model
/// of the most similar scenario with >= transfer_min_rows (ties: higher
/// usage count in `tree`, then smaller canonical form); else GROUP.
std::shared_ptr<const ScenarioModel> transfer_model(const LabelTree& tree,
                                                    const ScenarioStore& store,
                                                    const ScenarioLabel& target);

}  // namespace legible
