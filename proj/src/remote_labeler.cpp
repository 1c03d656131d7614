#include "legible/remote_labeler.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "legible/error.hpp"

namespace legible {

namespace {

std::string context_block(const LabelContext& c) {
  std::string out = "Movement sensor reading: ";
  out += to_string(c.movement);
  out += "\nLocation information: ";
  out += c.environment_hint.value_or("unavailable");
  out += "\nPersonal factors: ";
  const auto d = c.flags.descriptors();
  if (d.empty()) {
    out += "none";
  } else {
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (i) out += ", ";
      out += d[i];
    }
  }
  return out;
}

std::string first_line(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
    if (!line.empty()) return std::string(line);
    pos = end + 1;
  }
  return {};
}

[[noreturn]] void unavailable(const std::string& what) {
  throw Error(ErrorCode::LabelerUnavailable, "remote labeler: " + what);
}

}  // namespace

RemoteLabeler::RemoteLabeler(RemoteLabelerConfig config, const PromptTemplates& prompts)
    : config_(std::move(config)), prompts_(prompts) {
  if (config_.base_url.empty()) {
    throw Error(ErrorCode::InvalidConfig, "remote labeler needs a base URL");
  }
}

nlohmann::json RemoteLabeler::select_messages(const LabelContext& context,
                                              std::span<const ScenarioLabel> candidates) const {
  std::string user = context_block(context);
  user += "\n\n";
  user += prompts_.step1;
  user += "\n";
  user += prompts_.step2;
  user += "\n";
  user += prompts_.step3;
  user += "\n\nExisting labels:\n";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    user += std::to_string(i + 1) + ". " + candidates[i].canonical() + "\n";
  }
  user += "Reply ";
  user += kNoMatchReply;
  user += " if none of them fits.\n\n";
  user += prompts_.example;
  user += "\n";
  user += prompts_.attention;
  return nlohmann::json::array(
      {{{"role", "system"},
        {"content", std::string(prompts_.system_role) + "\n" + std::string(prompts_.select_label_role)}},
       {{"role", "user"}, {"content", user}}});
}

nlohmann::json RemoteLabeler::generate_messages(const LabelContext& context) const {
  std::string user = context_block(context);
  user += "\n\n";
  user += prompts_.step1;
  user += "\n";
  user += prompts_.step2;
  user += "\n";
  user += prompts_.step3;
  user += "\n\n";
  user += prompts_.example;
  user += "\n";
  user += prompts_.attention;
  return nlohmann::json::array({{{"role", "system"}, {"content", std::string(prompts_.system_role)}},
                                {{"role", "user"}, {"content", user}}});
}

nlohmann::json RemoteLabeler::edit_messages(const ScenarioLabel& current,
                                            std::string_view instruction) const {
  std::string user(prompts_.user_description_prompt);
  user += "\nCurrent label: ";
  user += current.canonical();
  user += "\n";
  user += prompts_.user_step1;
  user += "\n";
  user += prompts_.user_step2;
  user += "\nUser says: ";
  user += instruction;
  user += "\n";
  user += prompts_.format_attention;
  return nlohmann::json::array({{{"role", "system"}, {"content", std::string(prompts_.system_role)}},
                                {{"role", "user"}, {"content", user}}});
}

std::string RemoteLabeler::complete(const nlohmann::json& messages) {
  const nlohmann::json body = {{"model", config_.model}, {"temperature", 0}, {"messages", messages}};
  std::string text;
  try {
    httplib::Client client(config_.base_url);
    client.set_tcp_nodelay(true);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
    if (!res) unavailable(httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) unavailable("HTTP " + std::to_string(res->status));
    const auto reply = nlohmann::json::parse(res->body);
    text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    unavailable(e.what());
  }
  return first_line(text);
}

std::optional<std::string> RemoteLabeler::select(const LabelContext& context,
                                                 std::span<const ScenarioLabel> candidates) {
  if (candidates.empty()) return std::nullopt;
  auto reply = complete(select_messages(context, candidates));
  if (reply.empty() || reply == kNoMatchReply) return std::nullopt;
  return reply;
}

std::string RemoteLabeler::generate(const LabelContext& context) {
  return complete(generate_messages(context));
}

std::string RemoteLabeler::edit(const ScenarioLabel& current, std::string_view instruction) {
  return complete(edit_messages(current, instruction));
}

}  // namespace legible
