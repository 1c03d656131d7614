#include "legible/http_service.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "legible/wire.hpp"

namespace legible {

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownModel:
      return 404;
    case ErrorCode::InsufficientSamples:
    case ErrorCode::EmptyWindow:
      return 422;
    case ErrorCode::StorageError:
      return 503;
    case ErrorCode::LabelerUnavailable:
      return 502;
    case ErrorCode::NonPositiveInput:
    case ErrorCode::OutOfOrder:
    case ErrorCode::InvalidLabel:
    case ErrorCode::MalformedLabelerOutput:
    case ErrorCode::InvalidParams:
    case ErrorCode::InvalidCalibration:
    case ErrorCode::ParseError:
      return 400;
    default:
      return 500;
  }
}

struct HttpService::Impl {
  Engine& engine;
  httplib::Server server;

  explicit Impl(Engine& e) : engine(e) {
    // small JSON replies: do not let Nagle hold them back
    server.set_tcp_nodelay(true);
    routes();
  }

  static void send(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, std::string_view code,
                         const std::string& message) {
    send(res, status, {{"error", code}, {"message", message}});
  }

  static nlohmann::json body_of(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::ParseError, "request body must be a JSON object");
    return j;
  }

  static std::optional<std::string> optional_string(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw Error(ErrorCode::ParseError, std::string(key) + " must be a string");
    return it->get<std::string>();
  }

  // Runs a handler, mapping every failure onto a JSON error body.
  template <typename F>
  static httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        const int status = http_status(e.code());
        if (status >= 500) spdlog::error("{} {}: {}", req.method, req.path, e.what());
        send_error(res, status, to_string(e.code()), e.what());
      } catch (const nlohmann::json::exception& e) {
        send_error(res, 400, "ParseError", e.what());
      } catch (const std::exception& e) {
        spdlog::error("{} {}: {}", req.method, req.path, e.what());
        send_error(res, 500, "Internal", e.what());
      }
    };
  }

  void routes() {
    // the reader client is a browser page that may be served from elsewhere
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, PATCH, DELETE, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    server.Get("/healthz", guarded([this](const httplib::Request&, httplib::Response& res) {
      const auto group = engine.model(std::string(kGroupScenario), std::nullopt);
      send(res, 200,
           {{"status", "ok"}, {"sessions", engine.session_count()}, {"group_version", group->version}});
    }));

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = body_of(req);
      const auto user = optional_string(body, "user_id");
      if (!user) throw Error(ErrorCode::InvalidParams, "user_id is required");
      std::optional<double> ipd;
      if (auto it = body.find("ipd_cm"); it != body.end() && !it->is_null()) {
        if (!it->is_number()) throw Error(ErrorCode::ParseError, "ipd_cm must be a number");
        ipd = it->get<double>();
      }
      send(res, 201, to_json(engine.open_session(*user, ipd)));
    }));

    server.Delete(R"(/sessions/([^/]+))",
                  guarded([this](const httplib::Request& req, httplib::Response& res) {
                    if (!engine.close_session(req.matches[1])) {
                      throw Error(ErrorCode::UnknownSession, "unknown session " + req.matches[1].str());
                    }
                    res.status = 204;
                  }));

    server.Post(R"(/sessions/([^/]+)/sensors)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = body_of(req);
                  const auto& arr = body.at("samples");
                  if (!arr.is_array()) throw Error(ErrorCode::ParseError, "samples must be an array");
                  std::vector<SensorSample> samples;
                  samples.reserve(arr.size());
                  for (const auto& s : arr) samples.push_back(sample_from_json(s));
                  send(res, 200, to_json(engine.ingest(req.matches[1], samples)));
                }));

    server.Post(R"(/sessions/([^/]+)/recommend)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = body_of(req);
                  const auto flags = flags_from_json(body.value("flags", nlohmann::json()));
                  const auto r = engine.recommend(req.matches[1], flags, optional_string(body, "environment"));
                  send(res, 200, to_json(r));
                }));

    server.Post(R"(/sessions/([^/]+)/feedback)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = body_of(req);
                  const auto params = font_params_from_json(body.at("params"));
                  const auto flags = flags_from_json(body.value("flags", nlohmann::json()));
                  const auto r = engine.feedback(req.matches[1], params, flags,
                                                 optional_string(body, "environment"));
                  send(res, 200, to_json(r));
                }));

    server.Get(R"(/sessions/([^/]+)/label)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 send(res, 200, to_json(engine.get_label(req.matches[1])));
               }));

    server.Post(R"(/sessions/([^/]+)/label)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = body_of(req);
                  bool confirm = true;
                  if (auto it = body.find("confirm"); it != body.end()) {
                    if (!it->is_boolean()) throw Error(ErrorCode::ParseError, "confirm must be boolean");
                    confirm = it->get<bool>();
                  }
                  send(res, 200,
                       to_json(engine.set_label(req.matches[1], optional_string(body, "label"), confirm)));
                }));

    server.Patch(R"(/sessions/([^/]+)/label)",
                 guarded([this](const httplib::Request& req, httplib::Response& res) {
                   const auto body = body_of(req);
                   const auto instruction = optional_string(body, "instruction");
                   if (!instruction) throw Error(ErrorCode::InvalidParams, "instruction is required");
                   send(res, 200, to_json(engine.edit_label(req.matches[1], *instruction)));
                 }));

    server.Get(R"(/models/(.+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::string> user;
      if (req.has_param("user_id")) user = req.get_param_value("user_id");
      send(res, 200, engine.model(req.matches[1], user)->to_json());
    }));

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        send_error(res, res.status, res.status == 404 ? "NotFound" : "HttpError", "no such route");
      }
    });
  }
};

HttpService::HttpService(Engine& engine) : impl_(std::make_unique<Impl>(engine)) {}
HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) {
    throw Error(ErrorCode::InvalidConfig, "cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void HttpService::wait_until_ready() { impl_->server.wait_until_ready(); }

}  // namespace legible
