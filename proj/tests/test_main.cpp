#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <spdlog/spdlog.h>

int main(int argc, char** argv) {
  // fallback warnings are expected in several tests
  spdlog::set_level(spdlog::level::err);
  return doctest::Context(argc, argv).run();
}
