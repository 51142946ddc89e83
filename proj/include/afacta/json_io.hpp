#pragma once

// nlohmann::json conversions for the domain types. Enums serialize by name;
// an unparseable verdict has "stance": null.

#include <json.hpp>

#include "afacta/core.hpp"

namespace afacta {

void to_json(nlohmann::json& j, const TokenUsage& u);
void from_json(const nlohmann::json& j, TokenUsage& u);

void to_json(nlohmann::json& j, const SentenceRecord& r);
void from_json(const nlohmann::json& j, SentenceRecord& r);

void to_json(nlohmann::json& j, const FactExtractionRecord& r);
void from_json(const nlohmann::json& j, FactExtractionRecord& r);

void to_json(nlohmann::json& j, const StepVerdict& v);
void from_json(const nlohmann::json& j, StepVerdict& v);

void to_json(nlohmann::json& j, const AggregateAnnotation& a);
void from_json(const nlohmann::json& j, AggregateAnnotation& a);

void to_json(nlohmann::json& j, const GuidelineAnswer& g);
void from_json(const nlohmann::json& j, GuidelineAnswer& g);

}  // namespace afacta
