#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "legible/replay.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(LEGIBLE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("gen-data reproduces the committed fixtures") {
  support::TempDir dir;
  REQUIRE(run("gen-data --out " + dir.path().string()) == 0);
  const fs::path fixtures = LEGIBLE_FIXTURES_DIR;
  for (const char* name : {"group_dataset.jsonl", "coupling.json", "group_dataset.sha256"}) {
    CAPTURE(name);
    CHECK(slurp(dir.path() / name) == slurp(fixtures / name));
  }
}

TEST_CASE("eval and train on the fixtures") {
  support::TempDir dir;
  REQUIRE(run("eval --fixtures " + std::string(LEGIBLE_FIXTURES_DIR) + " --json " + (dir.path() / "e.json").string()) == 0);
  const auto j = nlohmann::json::parse(slurp(dir.path() / "e.json"));
  CHECK(j.at("sha256_matches") == true);
  REQUIRE(run("train --out " + (dir.path() / "group.json").string()) == 0);
  const auto m = nlohmann::json::parse(slurp(dir.path() / "group.json"));
  CHECK(m.at("scenario") == "GROUP");
  CHECK(run("eval --fixtures /nonexistent") != 0);
}

TEST_CASE("replay command is deterministic") {
  support::TempDir dir;
  {
    std::ofstream trace(dir.path() / "trace.jsonl");
    for (const auto& s : support::steady(0, 30, 300, 0.1)) trace << legible::to_trace_line(s) << "\n";
    std::ofstream fb(dir.path() / "feedback.jsonl");
    fb << legible::to_log_line({1500, {25, 1, 0.3, 0.1}, {}, "office"}) << "\n";
    fb << legible::to_log_line({2900, {26, 1, 0.3, 0.1}, {}, std::nullopt}) << "\n";
  }
  const std::string common = " --trace " + (dir.path() / "trace.jsonl").string() + " --feedback " +
                             (dir.path() / "feedback.jsonl").string();
  REQUIRE(run("replay" + common + " --out " + (dir.path() / "a").string()) == 0);
  REQUIRE(run("replay" + common + " --out " + (dir.path() / "b").string()) == 0);
  const auto model = fs::path("users") / "replay" / "models" / (legible::encode_file_name("Still-Office") + ".json");
  REQUIRE(fs::exists(dir.path() / "a" / model));
  CHECK(slurp(dir.path() / "a" / model) == slurp(dir.path() / "b" / model));
  CHECK(nlohmann::json::parse(slurp(dir.path() / "a" / model)).at("version") == 2);
  // refuses to overwrite
  CHECK(run("replay" + common + " --out " + (dir.path() / "a").string()) != 0);
}
