#pragma once

#include <string_view>

namespace legible {

// Labeler prompt text, embedded verbatim from prompts/v1 at build time.
struct PromptTemplates {
  std::string_view system_role;
  std::string_view select_label_role;
  std::string_view step1;
  std::string_view step2;
  std::string_view step3;
  std::string_view example;
  std::string_view attention;
  std::string_view user_description_prompt;
  std::string_view user_step1;
  std::string_view user_step2;
  std::string_view format_attention;
};

inline constexpr std::string_view kPromptVersion = "v1";

const PromptTemplates& builtin_prompts();

}  // namespace legible
