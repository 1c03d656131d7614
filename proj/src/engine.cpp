#include "legible/engine.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <random>

#include <spdlog/spdlog.h>

#include "legible/error.hpp"

namespace legible {

struct Engine::UserState {
  std::mutex mu;
  LabelTree tree;
  std::unique_ptr<ScenarioStore> store;
  std::deque<double> distances;
};

struct Engine::Session {
  std::mutex mu;
  SessionInfo info;
  std::shared_ptr<UserState> user;
  std::deque<SensorSample> window;
  std::optional<std::int64_t> last_ts;
  std::optional<ScenarioLabel> label;
  // a label the user set or edited stays active while motion is unchanged
  std::optional<MotionState> pinned_motion;
  std::optional<std::string> environment;
};

namespace {

std::string random_token() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mu);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (int word = 0; word < 2; ++word) {
    auto v = rng();
    for (int i = 0; i < 16; ++i, v >>= 4) out += kHex[v & 0xF];
  }
  return out;
}

std::optional<double> median(const std::deque<double>& values) {
  if (values.empty()) return std::nullopt;
  std::vector<double> v(values.begin(), values.end());
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

// Motion class of whatever the window holds, ignoring min_samples.
std::optional<MotionState> window_motion(const std::deque<SensorSample>& window,
                                         const MotionThresholds& thresholds) {
  if (window.empty()) return std::nullopt;
  ContextFeatures f;
  for (const auto& x : window) {
    f.vib_x += x.accel_offset.x;
    f.vib_y += x.accel_offset.y;
    f.vib_z += x.accel_offset.z;
  }
  const auto n = static_cast<double>(window.size());
  f.vib_x /= n;
  f.vib_y /= n;
  f.vib_z /= n;
  return classify_motion(f, thresholds);
}

std::optional<std::string> clean_hint(std::optional<std::string> hint) {
  if (!hint) return std::nullopt;
  if (normalize_environment(*hint).empty()) return std::nullopt;
  return hint;
}

}  // namespace

Engine::Engine(EngineConfig config, std::shared_ptr<const GroupPrior> prior,
               std::shared_ptr<Labeler> labeler)
    : config_(std::move(config)),
      prior_(std::move(prior)),
      labeler_(std::move(labeler)),
      fallback_(std::make_shared<FallbackLabeler>()) {
  if (!prior_ || !prior_->model) throw Error(ErrorCode::InvalidConfig, "engine needs a group model");
  if (!labeler_) labeler_ = fallback_;
}

Engine::~Engine() = default;

std::shared_ptr<Engine::UserState> Engine::user_state(const std::string& user_id) {
  std::lock_guard lock(users_mu_);
  auto it = users_.find(user_id);
  if (it != users_.end()) return it->second;

  std::unique_ptr<StorageBackend> backend;
  if (config_.data_dir.empty()) {
    backend = std::make_unique<MemoryBackend>();
  } else {
    backend = std::make_unique<FileBackend>(config_.data_dir / "users" / encode_file_name(user_id));
  }
  auto state = std::make_shared<UserState>();
  if (auto tree = backend->load_labels()) state->tree = std::move(*tree);
  state->store = std::make_unique<ScenarioStore>(prior_, config_.learning, std::move(backend));
  users_.emplace(user_id, state);
  return state;
}

SessionInfo Engine::open_session(const std::string& user_id, std::optional<double> ipd_cm) {
  if (user_id.empty()) throw Error(ErrorCode::InvalidParams, "user_id must be non-empty");
  const double ipd = ipd_cm.value_or(config_.window.ipd_cm);
  if (!(ipd >= kMinIpdCm && ipd <= kMaxIpdCm)) {
    throw Error(ErrorCode::InvalidCalibration, "ipd_cm must lie in [4.5, 8.0]");
  }
  auto s = std::make_shared<Session>();
  s->info = {random_token(), user_id, ipd};
  s->user = user_state(user_id);
  std::unique_lock lock(sessions_mu_);
  sessions_.emplace(s->info.session_id, s);
  return s->info;
}

bool Engine::close_session(const std::string& session_id) {
  std::unique_lock lock(sessions_mu_);
  return sessions_.erase(session_id) > 0;
}

std::size_t Engine::session_count() const {
  std::shared_lock lock(sessions_mu_);
  return sessions_.size();
}

std::shared_ptr<Engine::Session> Engine::find_session(const std::string& session_id) const {
  std::shared_lock lock(sessions_mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "unknown session " + session_id);
  return it->second;
}

IngestResult Engine::ingest(const std::string& session_id, std::span<const SensorSample> samples) {
  auto s = find_session(session_id);
  std::lock_guard lock(s->mu);
  IngestResult r;
  std::vector<double> distances;
  for (const auto& sample : samples) {
    if (!is_valid(sample) || (s->last_ts && sample.timestamp_ms < *s->last_ts)) {
      ++r.rejected;
      continue;
    }
    s->window.push_back(sample);
    s->last_ts = sample.timestamp_ms;
    ++r.accepted;
    if (sample.distance_cm) {
      distances.push_back(*sample.distance_cm);
    } else if (sample.eye_span_px) {
      distances.push_back(
          estimate_reading_distance(*sample.eye_span_px, s->info.ipd_cm, config_.window.focal_px));
    }
  }
  if (s->last_ts) {
    const std::int64_t oldest = *s->last_ts - config_.window.window_ms;
    while (!s->window.empty() && s->window.front().timestamp_ms < oldest) s->window.pop_front();
  }
  r.window_size = s->window.size();
  if (!distances.empty()) {
    std::lock_guard ulock(s->user->mu);
    auto& hist = s->user->distances;
    for (double d : distances) {
      hist.push_back(d);
      if (hist.size() > config_.distance_history) hist.pop_front();
    }
  }
  return r;
}

ContextFeatures Engine::current_context(const Session& s, const UserState& u,
                                        const PersonalFlags& flags) const {
  const std::vector<SensorSample> snapshot(s.window.begin(), s.window.end());
  WindowConfig cfg = config_.window;
  cfg.ipd_cm = s.info.ipd_cm;
  return aggregate_window(snapshot, flags, cfg, median(u.distances));
}

void Engine::persist_labels(UserState& u, std::vector<std::string>& warnings) {
  try {
    u.store->backend().write_labels(u.tree);
  } catch (const Error& e) {
    spdlog::warn("label tree not persisted: {}", e.what());
    warnings.push_back(std::string("label tree not persisted: ") + e.what());
  }
}

ResolveOutcome Engine::active_label(Session& s, UserState& u, const LabelContext& ctx) {
  if (s.label) {
    const bool pinned = s.pinned_motion && *s.pinned_motion == ctx.movement;
    if (pinned || label_matches_context(*s.label, ctx)) {
      return ResolveOutcome{*s.label, true, false, {}};
    }
  }
  s.pinned_motion.reset();
  auto out = resolve_label(ctx, u.tree, *labeler_, s.last_ts.value_or(0));
  for (const auto& w : out.warnings) spdlog::warn("label resolution ({}): {}", labeler_->name(), w);
  s.label = out.label;
  persist_labels(u, out.warnings);
  return out;
}

Recommendation Engine::recommend(const std::string& session_id, const PersonalFlags& flags,
                                 std::optional<std::string> environment) {
  const auto start = std::chrono::steady_clock::now();
  auto s = find_session(session_id);
  std::lock_guard lock(s->mu);
  if (auto hint = clean_hint(std::move(environment))) s->environment = std::move(hint);
  auto& u = *s->user;
  std::lock_guard ulock(u.mu);

  Recommendation r;
  r.context = current_context(*s, u, flags);
  r.motion = classify_motion(r.context, config_.motion);
  const LabelContext ctx{r.motion, s->environment, flags};
  auto resolved = active_label(*s, u, ctx);
  r.scenario = resolved.label.canonical();
  r.warnings = std::move(resolved.warnings);
  r.label_confirmed = u.tree.is_confirmed(r.scenario);

  const auto model = r.label_confirmed ? transfer_model(u.tree, *u.store, resolved.label)
                                       : u.store->group_model();
  r.model_scenario = model->scenario;
  r.model_version = model->version;
  r.features_used = FeatureVector::from_context(r.context);
  r.params = predict(*model, r.features_used);
  r.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

FeedbackResult Engine::feedback(const std::string& session_id, const FontParams& params,
                                const PersonalFlags& flags, std::optional<std::string> environment) {
  validate(params);
  auto s = find_session(session_id);
  std::lock_guard lock(s->mu);
  if (auto hint = clean_hint(std::move(environment))) s->environment = std::move(hint);
  auto& u = *s->user;
  std::lock_guard ulock(u.mu);

  const auto context = current_context(*s, u, flags);
  const LabelContext ctx{classify_motion(context, config_.motion), s->environment, flags};
  auto resolved = active_label(*s, u, ctx);
  const std::string scenario = resolved.label.canonical();
  // correcting the text under a label is taken as accepting that label
  if (!u.tree.is_confirmed(scenario)) {
    u.tree.confirm(scenario);
    persist_labels(u, resolved.warnings);
  }

  const FeedbackEvent event{FeatureVector::from_context(context), scenario, params,
                            s->last_ts.value_or(0)};
  const auto model = u.store->update_with_feedback(event);
  return {scenario, model->version, u.store->user_rows(scenario)};
}

LabelState Engine::get_label(const std::string& session_id) {
  auto s = find_session(session_id);
  std::lock_guard lock(s->mu);
  LabelState st;
  if (!s->label) {
    st.scenario = std::string(kGroupScenario);
    return st;
  }
  std::lock_guard ulock(s->user->mu);
  st.scenario = s->label->canonical();
  st.confirmed = s->user->tree.is_confirmed(st.scenario);
  return st;
}

LabelState Engine::set_label(const std::string& session_id, std::optional<std::string> label,
                             bool confirm) {
  auto s = find_session(session_id);
  std::lock_guard lock(s->mu);
  auto& u = *s->user;
  std::lock_guard ulock(u.mu);
  LabelState st;
  if (label) {
    auto parsed = parse_label(*label);
    st.changed = !(s->label && *s->label == parsed);
    u.tree.insert(parsed, s->last_ts.value_or(0), confirm);
    s->label = parsed;
    s->environment = parsed.environment();
  } else {
    if (!s->label) throw Error(ErrorCode::InvalidLabel, "session has no active label to confirm");
    u.tree.insert(*s->label, s->last_ts.value_or(0), true);
  }
  s->pinned_motion = window_motion(s->window, config_.motion).value_or(s->label->movement());
  st.scenario = s->label->canonical();
  st.confirmed = u.tree.is_confirmed(st.scenario);
  persist_labels(u, st.warnings);
  return st;
}

LabelState Engine::edit_label(const std::string& session_id, const std::string& instruction) {
  auto s = find_session(session_id);
  std::lock_guard lock(s->mu);
  if (!s->label) throw Error(ErrorCode::InvalidLabel, "session has no active label to edit");
  auto& u = *s->user;
  std::lock_guard ulock(u.mu);

  LabelState st;
  EditOutcome out{*s->label, false, std::nullopt};
  try {
    out = legible::edit_label(*s->label, instruction, *labeler_);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::LabelerUnavailable) throw;
    spdlog::warn("label edit: {}; using fallback rules", e.what());
    st.warnings.push_back(std::string("labeler unavailable, rule-based edit used: ") + e.what());
    out = legible::edit_label(*s->label, instruction, *fallback_);
  }
  if (out.warning) st.warnings.push_back(*out.warning);
  st.changed = out.changed;
  if (out.changed) {
    u.tree.insert(out.label, s->last_ts.value_or(0), true);
    s->label = out.label;
    s->environment = out.label.environment();
    s->pinned_motion = window_motion(s->window, config_.motion).value_or(out.label.movement());
    persist_labels(u, st.warnings);
  }
  st.scenario = s->label->canonical();
  st.confirmed = u.tree.is_confirmed(st.scenario);
  return st;
}

std::shared_ptr<const ScenarioModel> Engine::model(const std::string& scenario,
                                                   const std::optional<std::string>& user_id) {
  if (scenario == kGroupScenario) return prior_->model;
  if (!user_id || user_id->empty()) {
    throw Error(ErrorCode::UnknownModel, "per-scenario models need a user_id");
  }
  auto u = user_state(*user_id);
  auto m = u->store->model(scenario);
  if (!m) throw Error(ErrorCode::UnknownModel, "no model for scenario " + scenario);
  return m;
}

std::vector<std::string> Engine::user_scenarios(const std::string& user_id) {
  return user_state(user_id)->store->scenarios();
}

}  // namespace legible
