#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "legible/prompts.hpp"

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("embedded prompts equal the template files") {
  const std::filesystem::path dir = std::filesystem::path(LEGIBLE_PROMPTS_DIR) / legible::kPromptVersion;
  const auto& p = legible::builtin_prompts();
  const std::pair<const char*, std::string_view> files[] = {
      {"system_role.txt", p.system_role},
      {"select_label_role.txt", p.select_label_role},
      {"step1.txt", p.step1},
      {"step2.txt", p.step2},
      {"step3.txt", p.step3},
      {"example.txt", p.example},
      {"attention.txt", p.attention},
      {"user_description_prompt.txt", p.user_description_prompt},
      {"user_step1.txt", p.user_step1},
      {"user_step2.txt", p.user_step2},
      {"format_attention.txt", p.format_attention},
  };
  std::size_t on_disk = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) on_disk += e.path().extension() == ".txt";
  CHECK(on_disk == std::size(files));
  for (const auto& [name, text] : files) {
    CAPTURE(name);
    CHECK_FALSE(text.empty());
    CHECK(std::string(text) == slurp(dir / name));
  }
}
