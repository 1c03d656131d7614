#pragma once

#include <nlohmann/json_fwd.hpp>

#include "legible/engine.hpp"
#include "legible/modeling.hpp"
#include "legible/personal_flags.hpp"

namespace legible {

// JSON shapes shared by the HTTP protocol and the replay log.

nlohmann::json to_json(const PersonalFlags& f);
/// Missing keys default to false; non-boolean values throw ParseError.
PersonalFlags flags_from_json(const nlohmann::json& j);

/// Named object in kFeatureNames order.
nlohmann::json to_json(const FeatureVector& f);

nlohmann::json to_json(const Recommendation& r);
nlohmann::json to_json(const FeedbackResult& r);
nlohmann::json to_json(const LabelState& s);
nlohmann::json to_json(const IngestResult& r);
nlohmann::json to_json(const SessionInfo& s);

}  // namespace legible
