#pragma once

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "legible/error.hpp"
#include "legible/store.hpp"

namespace support {

// Fresh directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("legible-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline legible::ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const legible::Error& e) {
    return e.code();
  }
  FAIL("expected a legible::Error");
  return legible::ErrorCode::InvalidParams;
}

// Small prior with light and distance trends, 60 rows.
inline std::shared_ptr<const legible::GroupPrior> small_prior(double lambda = 1.0) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  std::vector<legible::TrainingRow> rows;
  for (int i = 0; i < 60; ++i) {
    legible::FeatureVector x;
    x.values[0] = 2.0 + 0.8 * nd(rng);
    x.values[1] = std::fabs(0.3 + 0.3 * nd(rng));
    x.values[2] = std::fabs(0.3 + 0.3 * nd(rng));
    x.values[3] = std::fabs(0.3 + 0.3 * nd(rng));
    x.values[4] = 30.0 + 5.0 * nd(rng);
    legible::FontParams p{18.0 + 0.2 * (x.values[4] - 30.0) + 0.5 * nd(rng), 1.0 + 0.1 * nd(rng),
                          0.3 + 0.02 * nd(rng), 0.1 + 0.01 * nd(rng)};
    rows.push_back({x, legible::clamp_to_range(p), 1.0});
  }
  return legible::make_group_prior(std::move(rows), lambda);
}

}  // namespace support

#include "legible/replay.hpp"
#include "legible/sensing.hpp"

namespace support {

// GROUP prior fitted on the shipped fixture, shared across tests.
inline std::shared_ptr<const legible::GroupPrior> fixture_prior() {
  static const auto prior = legible::load_group_prior(
      std::filesystem::path(LEGIBLE_FIXTURES_DIR) / "group_dataset.jsonl", 1.0);
  return prior;
}

// `n` identical samples 100 ms apart starting at t0.
inline std::vector<legible::SensorSample> steady(std::int64_t t0, int n, double lux, double vib,
                                                 std::optional<double> dist = 30.0) {
  std::vector<legible::SensorSample> out;
  for (int i = 0; i < n; ++i) {
    legible::SensorSample s;
    s.timestamp_ms = t0 + 100 * i;
    s.lux = lux;
    s.accel_offset = {vib, vib, vib};
    s.distance_cm = dist;
    out.push_back(s);
  }
  return out;
}

}  // namespace support

#include <thread>

#include <httplib.h>

#include "legible/engine.hpp"
#include "legible/http_service.hpp"

namespace support {

// Engine plus HTTP front end on a free loopback port.
class LiveService {
 public:
  explicit LiveService(legible::EngineConfig cfg = {}, std::shared_ptr<legible::Labeler> labeler = nullptr)
      : engine_(std::move(cfg), fixture_prior(), std::move(labeler)), http_(engine_) {
    port_ = http_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { http_.listen(); });
    http_.wait_until_ready();
  }
  ~LiveService() {
    http_.stop();
    thread_.join();
  }

  int port() const { return port_; }
  legible::Engine& engine() { return engine_; }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_keep_alive(true);
    c.set_tcp_nodelay(true);
    return c;
  }

 private:
  legible::Engine engine_;
  legible::HttpService http_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace support
