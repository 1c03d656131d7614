#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "legible/personal_flags.hpp"
#include "legible/sensing.hpp"

namespace legible {

// Three-layer scenario key: movement, environment scene, personal needs.
//
// Construction normalizes: the environment is trimmed and title-cased, and
// descriptors are trimmed, lower-cased, de-duplicated and sorted. With that,
// equal canonical forms and equal labels are the same thing. Characters that
// collide with the text grammar ('-' and ',') are replaced by spaces.
class ScenarioLabel {
 public:
  /// Throws InvalidLabel when the environment is empty after normalization.
  ScenarioLabel(MotionState movement, std::string_view environment,
                std::vector<std::string> personalization = {});

  MotionState movement() const noexcept { return movement_; }
  const std::string& environment() const noexcept { return environment_; }
  const std::vector<std::string>& personalization() const noexcept { return personalization_; }

  /// "Movement-Environment" or "Movement-Environment-d1, d2".
  std::string canonical() const;

  bool operator==(const ScenarioLabel& other) const = default;

 private:
  MotionState movement_;
  std::string environment_;
  std::vector<std::string> personalization_;
};

inline std::string canonical_form(const ScenarioLabel& label) { return label.canonical(); }

/// Parses `movement "-" environment ["-" descriptors]`, tolerating spaces
/// around the dashes and surrounding quotes. Anything else throws
/// MalformedLabelerOutput.
ScenarioLabel parse_label(std::string_view text);

/// Trim, collapse inner whitespace, title-case each word.
std::string normalize_environment(std::string_view text);

/// 0.5 * [movement equal] + 0.3 * [environment equal]
///   + 0.2 * Jaccard(personalization sets), the Jaccard term being 1 when
/// both sets are empty.
double similarity(const ScenarioLabel& a, const ScenarioLabel& b);

struct LabelContext {
  MotionState movement = MotionState::Still;
  std::optional<std::string> environment_hint;
  PersonalFlags flags;
};

/// Deterministic label built from the context alone: hint (or "Unknown") as
/// environment and one descriptor per set personal flag.
ScenarioLabel fallback_label(const LabelContext& context);

/// True when `label` fits the context: same movement, the environment agrees
/// with the hint (word-level containment either way; "Unknown" when there is
/// no hint) and every flag descriptor is present.
bool label_matches_context(const ScenarioLabel& label, const LabelContext& context);

struct LabelEntry {
  ScenarioLabel label;
  std::int64_t created_ms = 0;
  std::uint64_t usage_count = 0;
  bool confirmed = false;
};

// Per-user set of known labels keyed by canonical form.
class LabelTree {
 public:
  /// Inserts or bumps usage. Passing confirmed = true also confirms an
  /// existing pending entry; it never un-confirms.
  const LabelEntry& insert(const ScenarioLabel& label, std::int64_t now_ms, bool confirmed);

  /// Returns false when the label is unknown.
  bool confirm(std::string_view canonical);

  const LabelEntry* find(std::string_view canonical) const;
  bool is_confirmed(std::string_view canonical) const;
  std::size_t size() const noexcept { return entries_.size(); }

  /// Entries ordered by usage count (desc), then canonical form.
  std::vector<LabelEntry> ranked() const;
  std::vector<ScenarioLabel> labels() const;

  nlohmann::json to_json() const;
  static LabelTree from_json(const nlohmann::json& j);

 private:
  std::map<std::string, LabelEntry, std::less<>> entries_;
};

// A source of label text. Implementations return raw single-line responses;
// the caller parses and validates them. Transport failures throw
// LabelerUnavailable.
class Labeler {
 public:
  virtual ~Labeler() = default;

  virtual std::string_view name() const noexcept = 0;
  /// nullopt when no candidate fits.
  virtual std::optional<std::string> select(const LabelContext& context,
                                            std::span<const ScenarioLabel> candidates) = 0;
  virtual std::string generate(const LabelContext& context) = 0;
  virtual std::string edit(const ScenarioLabel& current, std::string_view instruction) = 0;
};

// Rule-based stand-in used when no language model is configured or reachable.
class FallbackLabeler final : public Labeler {
 public:
  std::string_view name() const noexcept override { return "fallback"; }
  std::optional<std::string> select(const LabelContext& context,
                                    std::span<const ScenarioLabel> candidates) override;
  std::string generate(const LabelContext& context) override;
  /// Understands movement verbs, "in/at/on <place>", "(not) wearing <x>",
  /// "no/without <x>" and the three personal-state words. Returns an empty
  /// string when nothing in the instruction is recognized.
  std::string edit(const ScenarioLabel& current, std::string_view instruction) override;
};

struct ResolveOutcome {
  ScenarioLabel label;
  bool selected_existing = false;
  bool used_fallback = false;
  std::vector<std::string> warnings;
};

/// Select among the tree's labels, else generate, else fall back. The result
/// is always a valid label and is inserted into the tree (pending unless it
/// was already confirmed).
ResolveOutcome resolve_label(const LabelContext& context, LabelTree& tree, Labeler& labeler,
                             std::int64_t now_ms);

struct EditOutcome {
  ScenarioLabel label;
  bool changed = false;
  std::optional<std::string> warning;
};

/// Unparseable labeler output leaves `current` unchanged and sets a warning.
/// LabelerUnavailable propagates. Empty instructions throw InvalidParams.
EditOutcome edit_label(const ScenarioLabel& current, std::string_view instruction,
                       Labeler& labeler);

}  // namespace legible
