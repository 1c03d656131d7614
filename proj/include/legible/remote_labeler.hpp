#pragma once

#include <chrono>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "legible/labeltree.hpp"
#include "legible/prompts.hpp"

namespace legible {

struct RemoteLabelerConfig {
  // scheme://host[:port]; requests go to {base_url}/v1/chat/completions
  std::string base_url;
  std::string model = "gpt-4o";
  std::string api_key;
  std::chrono::milliseconds timeout{1500};
};

// Chat-completion client carrying the embedded prompt templates. Any
// transport error, non-2xx status or unexpected response shape throws
// LabelerUnavailable. Safe to share across threads (one connection per call).
class RemoteLabeler final : public Labeler {
 public:
  explicit RemoteLabeler(RemoteLabelerConfig config,
                         const PromptTemplates& prompts = builtin_prompts());

  std::string_view name() const noexcept override { return "remote"; }
  std::optional<std::string> select(const LabelContext& context,
                                    std::span<const ScenarioLabel> candidates) override;
  std::string generate(const LabelContext& context) override;
  std::string edit(const ScenarioLabel& current, std::string_view instruction) override;

  /// Message arrays sent for each request kind; exposed for inspection.
  nlohmann::json select_messages(const LabelContext& context,
                                 std::span<const ScenarioLabel> candidates) const;
  nlohmann::json generate_messages(const LabelContext& context) const;
  nlohmann::json edit_messages(const ScenarioLabel& current, std::string_view instruction) const;

 private:
  std::string complete(const nlohmann::json& messages);

  RemoteLabelerConfig config_;
  const PromptTemplates& prompts_;
};

/// Reply token meaning "no candidate fits" in select requests.
inline constexpr std::string_view kNoMatchReply = "NONE";

}  // namespace legible
