#include "legible/wire.hpp"

#include <nlohmann/json.hpp>

#include "legible/error.hpp"

namespace legible {

nlohmann::json to_json(const PersonalFlags& f) {
  return {{"fatigued", f.fatigued}, {"distracted", f.distracted}, {"vision_reduced", f.vision_reduced}};
}

PersonalFlags flags_from_json(const nlohmann::json& j) {
  if (j.is_null()) return {};
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "flags must be an object");
  auto flag = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return false;
    if (!it->is_boolean()) throw Error(ErrorCode::ParseError, std::string("flag '") + key + "' must be boolean");
    return it->get<bool>();
  };
  return {flag("fatigued"), flag("distracted"), flag("vision_reduced")};
}

nlohmann::json to_json(const FeatureVector& f) {
  nlohmann::json out = nlohmann::json::object();
  for (std::size_t i = 0; i < kFeatureCount; ++i) out[std::string(kFeatureNames[i])] = f.values[i];
  return out;
}

nlohmann::json to_json(const Recommendation& r) {
  return {{"params", to_json(r.params)},
          {"scenario", r.scenario},
          {"label_confirmed", r.label_confirmed},
          {"model_scenario", r.model_scenario},
          {"model_version", r.model_version},
          {"features_used", to_json(r.features_used)},
          {"motion", std::string(to_string(r.motion))},
          {"distance_imputed", r.context.distance_imputed},
          {"window_ms", r.context.window_ms},
          {"latency_ms", r.latency_ms},
          {"warnings", r.warnings}};
}

nlohmann::json to_json(const FeedbackResult& r) {
  return {{"scenario", r.scenario}, {"model_version", r.model_version}, {"user_rows", r.user_rows}};
}

nlohmann::json to_json(const LabelState& s) {
  return {{"scenario", s.scenario},
          {"confirmed", s.confirmed},
          {"changed", s.changed},
          {"warnings", s.warnings}};
}

nlohmann::json to_json(const IngestResult& r) {
  return {{"accepted", r.accepted}, {"rejected", r.rejected}, {"window_size", r.window_size}};
}

nlohmann::json to_json(const SessionInfo& s) {
  return {{"session_id", s.session_id}, {"user_id", s.user_id}, {"ipd_cm", s.ipd_cm}};
}

}  // namespace legible
