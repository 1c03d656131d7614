#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "legible/labeltree.hpp"
#include "legible/modeling.hpp"
#include "legible/sensing.hpp"
#include "legible/store.hpp"

namespace legible {

struct EngineConfig {
  WindowConfig window;
  MotionThresholds motion;
  LearningConfig learning;
  // empty: keep everything in memory
  std::filesystem::path data_dir;
  // recent per-user distances used to impute distance-less windows
  std::size_t distance_history = 50;
};

inline constexpr double kMinIpdCm = 4.5;
inline constexpr double kMaxIpdCm = 8.0;

struct SessionInfo {
  std::string session_id;
  std::string user_id;
  double ipd_cm = 6.3;
};

struct IngestResult {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t window_size = 0;
};

struct Recommendation {
  FontParams params;
  std::string scenario;
  bool label_confirmed = false;
  // scenario whose model produced params ("GROUP" for the prior)
  std::string model_scenario;
  std::uint64_t model_version = 0;
  FeatureVector features_used;
  ContextFeatures context;
  MotionState motion = MotionState::Still;
  double latency_ms = 0.0;
  std::vector<std::string> warnings;
};

struct FeedbackResult {
  std::string scenario;
  std::uint64_t model_version = 0;
  std::size_t user_rows = 0;
};

struct LabelState {
  // kGroupScenario until a label resolves
  std::string scenario;
  bool confirmed = false;
  bool changed = false;
  std::vector<std::string> warnings;
};

// Sessions, per-user label trees and scenario stores. Commands on one
// session are serialized; different sessions of the same user serialize on
// that user's state; unrelated users never contend.
class Engine {
 public:
  /// `labeler` may be null: the deterministic fallback is used.
  Engine(EngineConfig config, std::shared_ptr<const GroupPrior> prior,
         std::shared_ptr<Labeler> labeler = nullptr);
  ~Engine();

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  /// Throws InvalidParams for an empty user id, InvalidCalibration for an
  /// IPD outside [4.5, 8.0] cm.
  SessionInfo open_session(const std::string& user_id, std::optional<double> ipd_cm = std::nullopt);
  bool close_session(const std::string& session_id);

  /// Invalid or backward-in-time samples are rejected and counted; the rest
  /// enter the window. Throws UnknownSession.
  IngestResult ingest(const std::string& session_id, std::span<const SensorSample> samples);

  /// Throws UnknownSession, InsufficientSamples / EmptyWindow.
  Recommendation recommend(const std::string& session_id, const PersonalFlags& flags,
                           std::optional<std::string> environment = std::nullopt);

  /// Validates params (InvalidParams), snapshots the current window, confirms
  /// the active label and refits its model. Throws UnknownSession,
  /// InsufficientSamples, StorageError.
  FeedbackResult feedback(const std::string& session_id, const FontParams& params,
                          const PersonalFlags& flags,
                          std::optional<std::string> environment = std::nullopt);

  LabelState get_label(const std::string& session_id);
  /// With `label` set: parse (InvalidLabel / MalformedLabelerOutput), make
  /// it active, optionally confirmed. Without: confirm the active label
  /// (InvalidLabel when there is none).
  LabelState set_label(const std::string& session_id, std::optional<std::string> label,
                       bool confirm);
  /// Free-text edit of the active label through the labeler; a remote
  /// failure retries with the fallback and reports a warning.
  LabelState edit_label(const std::string& session_id, const std::string& instruction);

  /// GROUP, or the user's model for `scenario`. Throws UnknownModel.
  std::shared_ptr<const ScenarioModel> model(const std::string& scenario,
                                             const std::optional<std::string>& user_id);
  std::vector<std::string> user_scenarios(const std::string& user_id);

  std::size_t session_count() const;
  const EngineConfig& config() const noexcept { return config_; }

 private:
  struct UserState;
  struct Session;

  std::shared_ptr<Session> find_session(const std::string& session_id) const;
  std::shared_ptr<UserState> user_state(const std::string& user_id);
  ContextFeatures current_context(const Session& s, const UserState& u,
                                  const PersonalFlags& flags) const;
  ResolveOutcome active_label(Session& s, UserState& u, const LabelContext& ctx);
  void persist_labels(UserState& u, std::vector<std::string>& warnings);

  EngineConfig config_;
  std::shared_ptr<const GroupPrior> prior_;
  std::shared_ptr<Labeler> labeler_;
  std::shared_ptr<Labeler> fallback_;

  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex users_mu_;
  std::map<std::string, std::shared_ptr<UserState>> users_;
};

}  // namespace legible
