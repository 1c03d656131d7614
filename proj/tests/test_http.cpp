#include <doctest.h>

#include <nlohmann/json.hpp>

#include "legible/remote_labeler.hpp"
#include "legible/wire.hpp"
#include "support.hpp"

using namespace legible;
using json = nlohmann::json;

namespace {

json samples_body(std::int64_t t0, int n, double lux, double vib) {
  json arr = json::array();
  for (const auto& s : support::steady(t0, n, lux, vib)) arr.push_back(to_json(s));
  return {{"samples", arr}};
}

json post(httplib::Client& c, const std::string& path, const json& body, int expect) {
  auto res = c.Post(path, body.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == expect);
  return res->body.empty() ? json() : json::parse(res->body);
}

// Chat-completion stand-in answering from a queue of canned contents.
struct MockChat {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::vector<std::string> replies;
  std::vector<json> requests;
  std::string auth;
  int status = 200;
  std::mutex mu;

  MockChat() {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu);
      requests.push_back(json::parse(req.body));
      auth = req.get_header_value("Authorization");
      res.status = status;
      std::string content = replies.empty() ? "" : replies.front();
      if (!replies.empty()) replies.erase(replies.begin());
      res.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump(),
                      "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~MockChat() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_CASE("status mapping") {
  CHECK(http_status(ErrorCode::UnknownSession) == 404);
  CHECK(http_status(ErrorCode::UnknownModel) == 404);
  CHECK(http_status(ErrorCode::InvalidParams) == 400);
  CHECK(http_status(ErrorCode::InvalidCalibration) == 400);
  CHECK(http_status(ErrorCode::ParseError) == 400);
  CHECK(http_status(ErrorCode::InsufficientSamples) == 422);
  CHECK(http_status(ErrorCode::StorageError) == 503);
  CHECK(http_status(ErrorCode::LabelerUnavailable) == 502);
}

TEST_CASE("http session flow") {
  support::LiveService svc;
  auto c = svc.client();

  auto health = c.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body).at("group_version") == 1);

  const auto session = post(c, "/sessions", {{"user_id", "u1"}}, 201);
  const std::string base = "/sessions/" + session.at("session_id").get<std::string>();
  CHECK(session.at("ipd_cm") == 6.3);
  post(c, "/sessions", {{"user_id", "u1"}, {"ipd_cm", 3.0}}, 400);
  post(c, "/sessions", json::object(), 400);

  post(c, base + "/recommend", json::object(), 422);
  const auto ingest = post(c, base + "/sensors", samples_body(0, 10, 300, 0.1), 200);
  CHECK(ingest.at("accepted") == 10);
  post(c, base + "/sensors", {{"samples", {{{"ts_ms", 5}}}}}, 400);

  const auto rec = post(c, base + "/recommend", {{"environment", "office"}}, 200);
  CHECK(rec.at("scenario") == "Still-Office");
  CHECK(rec.at("model_scenario") == "GROUP");
  CHECK(rec.at("params").at("size_sp").get<double>() >= 12.0);
  CHECK(rec.at("features_used").contains("distance_cm"));

  const json target = {{"size_sp", 27.0}, {"weight_px", 2.0}, {"line_spacing_em", 0.5}, {"letter_spacing_em", 0.2}};
  auto bad = target;
  bad["size_sp"] = 50;
  const auto err = post(c, base + "/feedback", {{"params", bad}}, 400);
  CHECK(err.at("error") == "InvalidParams");
  post(c, base + "/feedback", {{"params", {{"size_sp", 20}}}}, 400);
  const auto fb = post(c, base + "/feedback", {{"params", target}}, 200);
  CHECK(fb.at("model_version") == 1);

  const auto rec2 = post(c, base + "/recommend", json::object(), 200);
  CHECK(rec2.at("model_scenario") == "Still-Office");
  CHECK(rec2.at("label_confirmed") == true);
  CHECK(rec2.at("params").at("size_sp").get<double>() > rec.at("params").at("size_sp").get<double>());

  auto label = c.Get(base + "/label");
  REQUIRE(label);
  CHECK(json::parse(label->body).at("scenario") == "Still-Office");
  auto patch = c.Patch(base + "/label", json{{"instruction", "I am not wearing glasses"}}.dump(), "application/json");
  REQUIRE(patch);
  CHECK(patch->status == 200);
  CHECK(json::parse(patch->body).at("scenario") == "Still-Office-no glasses");
  post(c, base + "/label", {{"label", "Walking-Park"}, {"confirm", false}}, 200);
  post(c, base + "/label", {{"label", "gibberish"}}, 400);

  auto model = c.Get("/models/Still-Office?user_id=u1");
  REQUIRE(model);
  CHECK(model->status == 200);
  CHECK(json::parse(model->body).at("version") == 1);
  auto group = c.Get("/models/GROUP");
  REQUIRE(group);
  CHECK(json::parse(group->body).at("scenario") == "GROUP");
  auto missing = c.Get("/models/Still-Moon?user_id=u1");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  auto del = c.Delete(base);
  REQUIRE(del);
  CHECK(del->status == 204);
  const auto gone = post(c, base + "/recommend", json::object(), 404);
  CHECK(gone.at("error") == "UnknownSession");

  auto junk = c.Post("/sessions", "{not json", "application/json");
  REQUIRE(junk);
  CHECK(junk->status == 400);
  auto preflight = c.Options(base + "/recommend");
  REQUIRE(preflight);
  CHECK(preflight->status == 204);
  CHECK(preflight->get_header_value("Access-Control-Allow-Methods").find("PATCH") != std::string::npos);
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

  auto nowhere = c.Get("/nowhere");
  REQUIRE(nowhere);
  CHECK(nowhere->status == 404);
}

TEST_CASE("remote labeler against a mock endpoint") {
  MockChat mock;
  RemoteLabeler labeler({mock.url(), "test-model", "k123", std::chrono::milliseconds(1000)});
  const LabelContext ctx{MotionState::Walking, std::string("campus"), {false, true, false}};

  mock.replies = {"\n  Walking-Campus-distracted  \nbecause you move"};
  CHECK(labeler.generate(ctx) == "Walking-Campus-distracted");
  REQUIRE(mock.requests.size() == 1);
  CHECK(mock.requests[0].at("model") == "test-model");
  CHECK(mock.requests[0].at("temperature") == 0);
  CHECK(mock.requests[0].at("messages").at(0).at("role") == "system");
  CHECK(mock.auth == "Bearer k123");

  const std::vector<ScenarioLabel> cands{ScenarioLabel(MotionState::Walking, "Campus")};
  mock.replies = {"NONE"};
  CHECK_FALSE(labeler.select(ctx, cands).has_value());
  mock.replies = {"Walking-Campus"};
  CHECK(labeler.select(ctx, cands) == "Walking-Campus");
  const auto content = mock.requests.back().at("messages").at(1).at("content").get<std::string>();
  CHECK(content.find("1. Walking-Campus") != std::string::npos);

  mock.status = 500;
  CHECK(support::code_of([&] { labeler.generate(ctx); }) == ErrorCode::LabelerUnavailable);
  mock.status = 200;

  RemoteLabeler dead({"http://127.0.0.1:1", "m", "", std::chrono::milliseconds(200)});
  CHECK(support::code_of([&] { dead.generate(ctx); }) == ErrorCode::LabelerUnavailable);
  CHECK(support::code_of([] { RemoteLabeler({}); }) == ErrorCode::InvalidConfig);

  // engine path: remote edit output is used when it parses
  auto shared = std::make_shared<RemoteLabeler>(RemoteLabelerConfig{mock.url(), "m", "", std::chrono::milliseconds(1000)});
  support::LiveService svc({}, shared);
  auto c = svc.client();
  const auto s = post(c, "/sessions", {{"user_id", "r"}}, 201).at("session_id").get<std::string>();
  post(c, "/sessions/" + s + "/sensors", samples_body(0, 10, 300, 0.1), 200);
  mock.replies = {"Still-Lab"};
  CHECK(post(c, "/sessions/" + s + "/recommend", {{"environment", "lab"}}, 200).at("scenario") == "Still-Lab");
  mock.replies = {"Still-Lab-no glasses"};
  auto patch = c.Patch("/sessions/" + s + "/label", json{{"instruction", "took my glasses off"}}.dump(),
                       "application/json");
  REQUIRE(patch);
  CHECK(json::parse(patch->body).at("scenario") == "Still-Lab-no glasses");
  // prose from the model leaves the label alone and says so
  mock.replies = {"I have updated your label."};
  patch = c.Patch("/sessions/" + s + "/label", json{{"instruction", "I am tired"}}.dump(), "application/json");
  REQUIRE(patch);
  const auto body = json::parse(patch->body);
  CHECK(body.at("scenario") == "Still-Lab-no glasses");
  CHECK(body.at("changed") == false);
  CHECK_FALSE(body.at("warnings").empty());
}
