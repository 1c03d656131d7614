#include "legible/labeltree.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "legible/error.hpp"

namespace legible {

namespace {

std::string trim(std::string_view s) {
  auto first = s.find_first_not_of(" \t\r\n\"'");
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(" \t\r\n\"'");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

// Replace grammar separators and collapse whitespace.
std::string clean_segment(std::string_view s) {
  std::string tmp(s);
  for (char& c : tmp) {
    if (c == '-' || c == ',' || c == '\n' || c == '\r' || c == '\t') c = ' ';
  }
  std::string out;
  for (const auto& w : words(tmp)) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::vector<std::string> normalize_descriptors(std::vector<std::string> in) {
  std::set<std::string> unique;
  for (auto& d : in) {
    auto cleaned = lower(clean_segment(d));
    if (!cleaned.empty()) unique.insert(std::move(cleaned));
  }
  return {unique.begin(), unique.end()};
}

bool contains_word_run(const std::vector<std::string>& haystack,
                       const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
         haystack.end();
}

}  // namespace

std::string normalize_environment(std::string_view text) {
  std::string out;
  for (const auto& w : words(clean_segment(text))) {
    if (!out.empty()) out += ' ';
    std::string word = lower(w);
    word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
    out += word;
  }
  return out;
}

ScenarioLabel::ScenarioLabel(MotionState movement, std::string_view environment,
                             std::vector<std::string> personalization)
    : movement_(movement),
      environment_(normalize_environment(environment)),
      personalization_(normalize_descriptors(std::move(personalization))) {
  if (environment_.empty()) {
    throw Error(ErrorCode::InvalidLabel, "scenario label needs a non-empty environment");
  }
}

std::string ScenarioLabel::canonical() const {
  std::string out(to_string(movement_));
  out += '-';
  out += environment_;
  if (!personalization_.empty()) {
    out += '-';
    for (std::size_t i = 0; i < personalization_.size(); ++i) {
      if (i > 0) out += ", ";
      out += personalization_[i];
    }
  }
  return out;
}

ScenarioLabel parse_label(std::string_view text) {
  const std::string body = trim(text);
  if (body.empty() || body.find('\n') != std::string::npos) {
    throw Error(ErrorCode::MalformedLabelerOutput,
                "expected a single-line label, got '" + std::string(text) + "'");
  }
  std::vector<std::string> segments;
  std::size_t start = 0;
  while (true) {
    auto dash = body.find('-', start);
    segments.push_back(trim(body.substr(start, dash == std::string::npos ? dash : dash - start)));
    if (dash == std::string::npos) break;
    start = dash + 1;
  }
  if (segments.size() < 2) {
    throw Error(ErrorCode::MalformedLabelerOutput, "label '" + body + "' lacks an environment");
  }
  auto movement = parse_motion(segments[0]);
  if (!movement) {
    throw Error(ErrorCode::MalformedLabelerOutput,
                "label '" + body + "' has unknown movement '" + segments[0] + "'");
  }
  std::vector<std::string> descriptors;
  for (std::size_t i = 2; i < segments.size(); ++i) {
    std::istringstream parts(segments[i]);
    std::string part;
    while (std::getline(parts, part, ',')) descriptors.push_back(part);
  }
  try {
    return ScenarioLabel(*movement, segments[1], std::move(descriptors));
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedLabelerOutput, e.what());
  }
}

double similarity(const ScenarioLabel& a, const ScenarioLabel& b) {
  double score = 0.0;
  if (a.movement() == b.movement()) score += 0.5;
  if (lower(a.environment()) == lower(b.environment())) score += 0.3;

  const auto& pa = a.personalization();
  const auto& pb = b.personalization();
  if (pa.empty() && pb.empty()) {
    score += 0.2;
  } else {
    // both sorted and unique
    std::vector<std::string> common;
    std::set_intersection(pa.begin(), pa.end(), pb.begin(), pb.end(), std::back_inserter(common));
    const double uni = static_cast<double>(pa.size() + pb.size() - common.size());
    score += 0.2 * static_cast<double>(common.size()) / uni;
  }
  return score;
}

ScenarioLabel fallback_label(const LabelContext& context) {
  std::string env = context.environment_hint ? normalize_environment(*context.environment_hint)
                                             : std::string();
  if (env.empty()) env = "Unknown";
  return ScenarioLabel(context.movement, env, context.flags.descriptors());
}

bool label_matches_context(const ScenarioLabel& label, const LabelContext& context) {
  if (label.movement() != context.movement) return false;

  const std::string hint =
      context.environment_hint ? normalize_environment(*context.environment_hint) : std::string();
  if (hint.empty()) {
    if (label.environment() != "Unknown") return false;
  } else {
    const auto hint_words = words(lower(hint));
    const auto env_words = words(lower(label.environment()));
    if (!contains_word_run(hint_words, env_words) && !contains_word_run(env_words, hint_words)) {
      return false;
    }
  }

  const auto& have = label.personalization();
  for (const auto& d : context.flags.descriptors()) {
    if (!std::binary_search(have.begin(), have.end(), d)) return false;
  }
  return true;
}

const LabelEntry& LabelTree::insert(const ScenarioLabel& label, std::int64_t now_ms,
                                    bool confirmed) {
  auto key = label.canonical();
  auto it = entries_.find(key);
  if (it != entries_.end()) {
    ++it->second.usage_count;
    it->second.confirmed = it->second.confirmed || confirmed;
    return it->second;
  }
  auto [pos, _] = entries_.emplace(std::move(key), LabelEntry{label, now_ms, 1, confirmed});
  return pos->second;
}

bool LabelTree::confirm(std::string_view canonical) {
  auto it = entries_.find(canonical);
  if (it == entries_.end()) return false;
  it->second.confirmed = true;
  return true;
}

const LabelEntry* LabelTree::find(std::string_view canonical) const {
  auto it = entries_.find(canonical);
  return it == entries_.end() ? nullptr : &it->second;
}

bool LabelTree::is_confirmed(std::string_view canonical) const {
  const auto* e = find(canonical);
  return e != nullptr && e->confirmed;
}

std::vector<LabelEntry> LabelTree::ranked() const {
  std::vector<LabelEntry> out;
  out.reserve(entries_.size());
  for (const auto& [_, e] : entries_) out.push_back(e);
  // map iteration is already canonical-ordered; stable sort keeps that as tie-break
  std::stable_sort(out.begin(), out.end(), [](const LabelEntry& a, const LabelEntry& b) {
    return a.usage_count > b.usage_count;
  });
  return out;
}

std::vector<ScenarioLabel> LabelTree::labels() const {
  std::vector<ScenarioLabel> out;
  for (const auto& e : ranked()) out.push_back(e.label);
  return out;
}

nlohmann::json LabelTree::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [key, e] : entries_) {
    arr.push_back({{"label", key},
                   {"created_ms", e.created_ms},
                   {"usage_count", e.usage_count},
                   {"confirmed", e.confirmed}});
  }
  return {{"schema_version", 1}, {"labels", std::move(arr)}};
}

LabelTree LabelTree::from_json(const nlohmann::json& j) {
  LabelTree tree;
  for (const auto& item : j.at("labels")) {
    auto label = parse_label(item.at("label").get<std::string>());
    LabelEntry e{label, item.at("created_ms").get<std::int64_t>(),
                 item.at("usage_count").get<std::uint64_t>(), item.at("confirmed").get<bool>()};
    tree.entries_.insert_or_assign(label.canonical(), std::move(e));
  }
  return tree;
}

std::optional<std::string> FallbackLabeler::select(const LabelContext& context,
                                                   std::span<const ScenarioLabel> candidates) {
  const ScenarioLabel* best = nullptr;
  for (const auto& c : candidates) {
    if (!label_matches_context(c, context)) continue;
    // fewest descriptors beyond what the flags demand wins; ties keep the
    // earlier (higher ranked) candidate
    if (best == nullptr || c.personalization().size() < best->personalization().size()) {
      best = &c;
    }
  }
  if (best == nullptr) return std::nullopt;
  return best->canonical();
}

std::string FallbackLabeler::generate(const LabelContext& context) {
  return fallback_label(context).canonical();
}

namespace {

std::string strip_leading_article(std::string phrase) {
  for (const char* article : {"a ", "an ", "the ", "my ", "some "}) {
    std::string_view a(article);
    if (phrase.rfind(a, 0) == 0) return phrase.substr(a.size());
  }
  return phrase;
}

// Object phrase: words up to punctuation or a joining word.
const char* const kPhrase = R"(([a-z][a-z' ]*?)(?=\s*(?:[.,;!?]|$|\s(?:and|but|while|with|so)\b)))";

}  // namespace

std::string FallbackLabeler::edit(const ScenarioLabel& current, std::string_view instruction) {
  const std::string text = lower(trim(instruction));
  bool recognized = false;

  MotionState movement = current.movement();
  static const std::regex running(R"(\b(running|run|jogging|jog|sprinting)\b)");
  static const std::regex walking(R"(\b(walking|walk|strolling)\b)");
  static const std::regex still(R"(\b(still|standing|stand|sitting|sit|seated|lying)\b)");
  if (std::regex_search(text, running)) {
    movement = MotionState::Running;
    recognized = true;
  } else if (std::regex_search(text, walking)) {
    movement = MotionState::Walking;
    recognized = true;
  } else if (std::regex_search(text, still)) {
    movement = MotionState::Still;
    recognized = true;
  }

  std::string environment = current.environment();
  static const std::regex place(std::string(R"(\b(?:in|at|on)\s+(?:(?:a|an|the|my)\s+)?)") + kPhrase);
  std::smatch m;
  if (std::regex_search(text, m, place)) {
    environment = m[1].str();
    recognized = true;
  }

  std::vector<std::string> descriptors = current.personalization();
  auto drop = [&](const std::string& d) {
    descriptors.erase(std::remove(descriptors.begin(), descriptors.end(), d), descriptors.end());
  };
  static const std::regex negated(std::string(R"(\b(?:not wearing|without|no)\s+)") + kPhrase);
  static const std::regex wearing(std::string(R"(\bwearing\s+)") + kPhrase);
  if (std::regex_search(text, m, negated)) {
    const std::string object = strip_leading_article(m[1].str());
    drop("wearing " + object);
    descriptors.push_back("no " + object);
    recognized = true;
  } else if (std::regex_search(text, m, wearing)) {
    const std::string object = m[1].str();
    drop("no " + strip_leading_article(object));
    descriptors.push_back("wearing " + object);
    recognized = true;
  }
  static const std::regex tired(R"(\b(tired|fatigued|exhausted|sleepy)\b)");
  static const std::regex distracted(R"(\b(distracted|unfocused)\b)");
  static const std::regex blurry(R"(\b(blurry|blurred|can't see|cannot see|eyes hurt)\b)");
  if (std::regex_search(text, tired)) {
    descriptors.emplace_back("fatigued");
    recognized = true;
  }
  if (std::regex_search(text, distracted)) {
    descriptors.emplace_back("distracted");
    recognized = true;
  }
  if (std::regex_search(text, blurry)) {
    descriptors.emplace_back("reduced vision");
    recognized = true;
  }

  if (!recognized) return {};
  return ScenarioLabel(movement, environment, std::move(descriptors)).canonical();
}

ResolveOutcome resolve_label(const LabelContext& context, LabelTree& tree, Labeler& labeler,
                             std::int64_t now_ms) {
  std::vector<std::string> warnings;
  auto fall_back = [&](std::string why) {
    warnings.push_back(std::move(why));
    auto label = fallback_label(context);
    tree.insert(label, now_ms, false);
    return ResolveOutcome{std::move(label), false, true, std::move(warnings)};
  };

  try {
    const auto candidates = tree.labels();
    if (!candidates.empty()) {
      if (auto picked = labeler.select(context, candidates)) {
        try {
          auto label = parse_label(*picked);
          if (tree.find(label.canonical()) != nullptr) {
            tree.insert(label, now_ms, false);
            return ResolveOutcome{std::move(label), true, false, std::move(warnings)};
          }
        } catch (const Error& e) {
          if (e.code() != ErrorCode::MalformedLabelerOutput) throw;
          warnings.push_back(std::string("selection ignored: ") + e.what());
        }
      }
    }
    auto generated = labeler.generate(context);
    try {
      auto label = parse_label(generated);
      tree.insert(label, now_ms, false);
      return ResolveOutcome{std::move(label), false, false, std::move(warnings)};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MalformedLabelerOutput) throw;
      return fall_back(std::string("generated label rejected: ") + e.what());
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::LabelerUnavailable) throw;
    return fall_back(std::string("labeler unavailable: ") + e.what());
  }
}

EditOutcome edit_label(const ScenarioLabel& current, std::string_view instruction,
                       Labeler& labeler) {
  if (trim(instruction).empty()) {
    throw Error(ErrorCode::InvalidParams, "edit instruction is empty");
  }
  const std::string response = labeler.edit(current, instruction);
  try {
    auto label = parse_label(response);
    const bool changed = !(label == current);
    return EditOutcome{std::move(label), changed, std::nullopt};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MalformedLabelerOutput) throw;
    return EditOutcome{current, false,
                       std::string("MalformedLabelerOutput: ") + e.what()};
  }
}

}  // namespace legible
