#pragma once

#include <memory>
#include <string>

#include "legible/engine.hpp"
#include "legible/error.hpp"

namespace legible {

/// HTTP status used for an engine error code.
int http_status(ErrorCode code) noexcept;

// JSON-over-HTTP front end for an Engine. Routes are listed in PROTOCOL.md.
class HttpService {
 public:
  explicit HttpService(Engine& engine);
  ~HttpService();

  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds the listening socket; port 0 picks a free port. Returns the bound
  /// port. Throws InvalidConfig when binding fails.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call after bind().
  void listen();
  void stop();
  /// Blocks until the server is accepting connections.
  void wait_until_ready();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace legible
