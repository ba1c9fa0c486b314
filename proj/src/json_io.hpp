#pragma once

#include <json.hpp>

#include "recusal/learner.hpp"

// Internal JSON helpers shared by the classifier and oracle serializers.
namespace recusal::detail {

nlohmann::ordered_json classifier_to_json(const Classifier& c);

// `context` prefixes error messages (usually the file path).
Classifier classifier_from_json(const nlohmann::json& j, const std::string& context);

}  // namespace recusal::detail
