#include "legible/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "legible/error.hpp"

namespace legible {

namespace fs = std::filesystem;

void FeedbackEvent::validate() const {
  legible::validate(params);
  if (label.empty()) throw Error(ErrorCode::InvalidParams, "feedback event without a label");
  if (!features.all_finite()) {
    throw Error(ErrorCode::InvalidParams, "feedback event with non-finite features");
  }
}

nlohmann::json FeedbackEvent::to_json() const {
  nlohmann::json f = nlohmann::json::object();
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    f[std::string(kFeatureNames[j])] = features.values[j];
  }
  return {{"schema_version", 1},
          {"timestamp_ms", timestamp_ms},
          {"label", label},
          {"features", std::move(f)},
          {"params", legible::to_json(params)}};
}

FeedbackEvent FeedbackEvent::from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != 1) {
      throw Error(ErrorCode::ParseError, "unsupported feedback schema_version");
    }
    FeedbackEvent e;
    e.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
    e.label = j.at("label").get<std::string>();
    const auto& f = j.at("features");
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      e.features.values[k] = f.at(std::string(kFeatureNames[k])).get<double>();
    }
    e.params = font_params_from_json(j.at("params"));
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("feedback event: ") + ex.what());
  }
}

// ---------------------------------------------------------------------------

void MemoryBackend::append_event(const FeedbackEvent& event) {
  std::lock_guard lock(mu_);
  events_[event.label].push_back(event);
}

void MemoryBackend::write_model(const ScenarioModel& model) {
  std::lock_guard lock(mu_);
  models_.insert_or_assign(model.scenario, model);
}

void MemoryBackend::write_labels(const LabelTree& tree) {
  std::lock_guard lock(mu_);
  labels_ = tree;
}

std::map<std::string, std::vector<FeedbackEvent>> MemoryBackend::load_events() {
  std::lock_guard lock(mu_);
  return events_;
}

std::map<std::string, ScenarioModel> MemoryBackend::load_models() {
  std::lock_guard lock(mu_);
  return models_;
}

std::optional<LabelTree> MemoryBackend::load_labels() {
  std::lock_guard lock(mu_);
  return labels_;
}

// ---------------------------------------------------------------------------

std::string encode_file_name(std::string_view name) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : name) {
    if (std::isalnum(c) || c == '_' || c == '.') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 0xF];
    }
  }
  return out;
}

std::string decode_file_name(std::string_view name) {
  std::string out;
  for (std::size_t i = 0; i < name.size(); ++i) {
    if (name[i] == '%' && i + 2 < name.size()) {
      out += static_cast<char>(std::stoi(std::string(name.substr(i + 1, 2)), nullptr, 16));
      i += 2;
    } else {
      out += name[i];
    }
  }
  return out;
}

namespace {

[[noreturn]] void storage_error(const std::string& what, const fs::path& path) {
  throw Error(ErrorCode::StorageError, what + " '" + path.string() + "': " + std::strerror(errno));
}

void write_all(int fd, std::string_view data, const fs::path& path) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      storage_error("write failed", path);
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::StorageError, "cannot create '" + dir.string() + "': " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::StorageError, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view content) {
  ensure_dir(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) storage_error("cannot open", tmp);
  try {
    write_all(fd, content, tmp);
    if (::fsync(fd) != 0) storage_error("fsync failed", tmp);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  if (::rename(tmp.c_str(), path.c_str()) != 0) storage_error("rename failed", path);
}

FileBackend::FileBackend(fs::path root) : root_(std::move(root)) {
  ensure_dir(root_ / "datasets");
  ensure_dir(root_ / "models");
}

void FileBackend::append_event(const FeedbackEvent& event) {
  const fs::path path = root_ / "datasets" / (encode_file_name(event.label) + ".jsonl");
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) storage_error("cannot open", path);
  try {
    write_all(fd, event.to_json().dump() + "\n", path);
    if (::fsync(fd) != 0) storage_error("fsync failed", path);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

void FileBackend::write_model(const ScenarioModel& model) {
  write_file_atomic(root_ / "models" / (encode_file_name(model.scenario) + ".json"),
                    model.to_json().dump(2) + "\n");
}

void FileBackend::write_labels(const LabelTree& tree) {
  write_file_atomic(root_ / "labels.json", tree.to_json().dump(2) + "\n");
}

std::map<std::string, std::vector<FeedbackEvent>> FileBackend::load_events() {
  std::map<std::string, std::vector<FeedbackEvent>> out;
  for (const auto& entry : fs::directory_iterator(root_ / "datasets")) {
    if (entry.path().extension() != ".jsonl") continue;
    const std::string scenario = decode_file_name(entry.path().stem().string());
    std::istringstream in(read_file(entry.path()));
    std::vector<std::string> lines;
    std::string line;
    bool last_terminated = true;
    while (std::getline(in, line)) {
      lines.push_back(line);
      last_terminated = !in.eof();
    }
    auto& events = out[scenario];
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      try {
        events.push_back(FeedbackEvent::from_json(nlohmann::json::parse(lines[i])));
      } catch (const std::exception& e) {
        const bool torn_tail = i + 1 == lines.size() && !last_terminated;
        if (torn_tail) break;
        throw Error(ErrorCode::StorageError, entry.path().string() + " line " +
                                                 std::to_string(i + 1) + ": " + e.what());
      }
    }
  }
  return out;
}

std::map<std::string, ScenarioModel> FileBackend::load_models() {
  std::map<std::string, ScenarioModel> out;
  for (const auto& entry : fs::directory_iterator(root_ / "models")) {
    if (entry.path().extension() != ".json") continue;
    try {
      auto model = ScenarioModel::from_json(nlohmann::json::parse(read_file(entry.path())));
      out.insert_or_assign(model.scenario, std::move(model));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::StorageError, entry.path().string() + ": " + e.what());
    }
  }
  return out;
}

std::optional<LabelTree> FileBackend::load_labels() {
  const fs::path path = root_ / "labels.json";
  if (!fs::exists(path)) return std::nullopt;
  try {
    return LabelTree::from_json(nlohmann::json::parse(read_file(path)));
  } catch (const std::exception& e) {
    throw Error(ErrorCode::StorageError, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

std::shared_ptr<const GroupPrior> make_group_prior(std::vector<TrainingRow> rows, double lambda) {
  auto model = fit_ridge(rows, lambda);
  model.scenario = std::string(kGroupScenario);
  model.version = 1;
  auto prior = std::make_shared<GroupPrior>();
  prior->rows = std::move(rows);
  prior->model = std::make_shared<const ScenarioModel>(std::move(model));
  return prior;
}

struct ScenarioStore::Slot {
  std::mutex refit_mu;
  std::vector<FeedbackEvent> events;
  std::shared_ptr<const ScenarioModel> model;

  std::shared_ptr<const ScenarioModel> load() const { return std::atomic_load(&model); }
  void store(std::shared_ptr<const ScenarioModel> m) { std::atomic_store(&model, std::move(m)); }
};

ScenarioStore::ScenarioStore(std::shared_ptr<const GroupPrior> prior, LearningConfig config,
                             std::unique_ptr<StorageBackend> backend)
    : prior_(std::move(prior)), config_(config), backend_(std::move(backend)) {
  auto events = backend_->load_events();
  auto models = backend_->load_models();
  for (auto& [scenario, list] : events) {
    Slot& slot = slot_for(scenario);
    slot.events = std::move(list);
    auto it = models.find(scenario);
    std::uint64_t version = 0;
    if (it != models.end()) {
      version = it->second.version;
      if (it->second.user_rows == slot.events.size()) {
        slot.store(std::make_shared<const ScenarioModel>(std::move(it->second)));
        continue;
      }
    }
    if (slot.events.empty()) continue;
    auto model = refit(scenario, slot.events, version + 1);
    backend_->write_model(model);
    slot.store(std::make_shared<const ScenarioModel>(std::move(model)));
  }
}

ScenarioStore::~ScenarioStore() = default;

ScenarioStore::Slot& ScenarioStore::slot_for(const std::string& scenario) {
  {
    std::shared_lock lock(slots_mu_);
    auto it = slots_.find(scenario);
    if (it != slots_.end()) return *it->second;
  }
  std::unique_lock lock(slots_mu_);
  auto [it, _] = slots_.try_emplace(scenario, std::make_unique<Slot>());
  return *it->second;
}

const ScenarioStore::Slot* ScenarioStore::find_slot(std::string_view scenario) const {
  std::shared_lock lock(slots_mu_);
  auto it = slots_.find(scenario);
  return it == slots_.end() ? nullptr : it->second.get();
}

std::shared_ptr<const ScenarioModel> ScenarioStore::model(std::string_view scenario) const {
  if (scenario == kGroupScenario) return prior_->model;
  const Slot* slot = find_slot(scenario);
  return slot ? slot->load() : nullptr;
}

std::size_t ScenarioStore::user_rows(std::string_view scenario) const {
  const auto m = model(scenario);
  return m && scenario != kGroupScenario ? static_cast<std::size_t>(m->user_rows) : 0;
}

std::vector<FeedbackEvent> ScenarioStore::events(std::string_view scenario) const {
  const Slot* slot = find_slot(scenario);
  if (!slot) return {};
  std::lock_guard lock(const_cast<Slot*>(slot)->refit_mu);
  return slot->events;
}

std::vector<std::string> ScenarioStore::scenarios() const {
  std::shared_lock lock(slots_mu_);
  std::vector<std::string> out;
  for (const auto& [name, _] : slots_) out.push_back(name);
  return out;
}

ScenarioModel ScenarioStore::refit(const std::string& scenario,
                                   const std::vector<FeedbackEvent>& events,
                                   std::uint64_t next_version) const {
  std::vector<TrainingRow> rows;
  rows.reserve(prior_->rows.size() + events.size());
  for (const auto& r : prior_->rows) rows.push_back({r.features, r.params, config_.group_weight});
  for (const auto& e : events) rows.push_back({e.features, e.params, config_.user_weight});
  auto model = fit_ridge(rows, config_.lambda);
  model.scenario = scenario;
  model.version = next_version;
  model.user_rows = events.size();
  return model;
}

std::shared_ptr<const ScenarioModel> ScenarioStore::update_with_feedback(
    const FeedbackEvent& event) {
  event.validate();
  if (event.label == kGroupScenario) {
    throw Error(ErrorCode::InvalidParams, "feedback cannot target the GROUP model");
  }
  Slot& slot = slot_for(event.label);
  std::lock_guard lock(slot.refit_mu);

  backend_->append_event(event);
  slot.events.push_back(event);

  const auto previous = slot.load();
  try {
    auto model = refit(event.label, slot.events, (previous ? previous->version : 0) + 1);
    backend_->write_model(model);
    auto snapshot = std::make_shared<const ScenarioModel>(std::move(model));
    slot.store(snapshot);
    return snapshot;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::StorageError) throw;
    throw Error(ErrorCode::StorageError, std::string("refit failed: ") + e.what());
  }
}

std::shared_ptr<const ScenarioModel> transfer_model(const LabelTree& tree,
                                                    const ScenarioStore& store,
                                                    const ScenarioLabel& target) {
  const std::string key = target.canonical();
  if (store.user_rows(key) >= store.config().own_min_rows) {
    if (auto own = store.model(key)) return own;
  }

  struct Candidate {
    double score;
    std::uint64_t usage;
    std::string name;
  };
  std::optional<Candidate> best;
  for (const auto& name : store.scenarios()) {
    if (name == key || store.user_rows(name) < store.config().transfer_min_rows) continue;
    std::optional<ScenarioLabel> label;
    try {
      label = parse_label(name);
    } catch (const Error&) {
      continue;
    }
    const auto* entry = tree.find(name);
    Candidate c{similarity(target, *label), entry ? entry->usage_count : 0, name};
    const bool better = !best || c.score > best->score ||
                        (c.score == best->score &&
                         (c.usage > best->usage || (c.usage == best->usage && c.name < best->name)));
    if (better) best = std::move(c);
  }
  if (best) {
    if (auto m = store.model(best->name)) return m;
  }
  return store.group_model();
}

}  // namespace legible
