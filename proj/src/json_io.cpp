#include "afacta/json_io.hpp"

#include "afacta/errors.hpp"

namespace afacta {

using nlohmann::json;

namespace {

template <typename T>
T required(const json& j, const char* key) {
    if (!j.contains(key)) throw DataError(std::string("missing field '") + key + "'");
    return j.at(key).get<T>();
}

std::optional<std::string> optional_string(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

}  // namespace

void to_json(json& j, const TokenUsage& u) {
    j = json{{"prompt_tokens", u.prompt_tokens}, {"completion_tokens", u.completion_tokens}};
}

void from_json(const json& j, TokenUsage& u) {
    u.prompt_tokens = j.value("prompt_tokens", std::uint64_t{0});
    u.completion_tokens = j.value("completion_tokens", std::uint64_t{0});
}

void to_json(json& j, const SentenceRecord& r) {
    j = json{{"record_id", r.record_id},
             {"corpus_id", r.corpus_id},
             {"position", r.position},
             {"text", r.text},
             {"prev_text", r.prev_text ? json(*r.prev_text) : json(nullptr)},
             {"next_text", r.next_text ? json(*r.next_text) : json(nullptr)},
             {"domain", std::string(to_string(r.domain))}};
}

void from_json(const json& j, SentenceRecord& r) {
    r.record_id = required<std::string>(j, "record_id");
    r.corpus_id = required<std::string>(j, "corpus_id");
    r.position = required<std::uint64_t>(j, "position");
    r.text = required<std::string>(j, "text");
    r.prev_text = optional_string(j, "prev_text");
    r.next_text = optional_string(j, "next_text");
    r.domain = parse_domain(j.value("domain", std::string("PoliticalSpeech")));
}

void to_json(json& j, const FactExtractionRecord& r) {
    j = json{{"ANALYSIS", r.analysis},
             {"FACT_PART", r.fact_part},
             {"VERIFIABLE_REASON", r.verifiable_reason},
             {"VERIFIABILITY", r.verifiability},
             {"CATEGORY", std::string(to_string(r.category))}};
}

void from_json(const json& j, FactExtractionRecord& r) {
    r.analysis = required<std::string>(j, "ANALYSIS");
    r.fact_part = required<std::string>(j, "FACT_PART");
    r.verifiable_reason = required<std::string>(j, "VERIFIABLE_REASON");
    r.verifiability = required<bool>(j, "VERIFIABILITY");
    r.category = parse_category(required<std::string>(j, "CATEGORY"));
}

void to_json(json& j, const StepVerdict& v) {
    j = json{{"step", std::string(to_string(v.step))},
             {"stance", v.stance ? json(std::string(to_string(*v.stance))) : json(nullptr)},
             {"vote_weight", v.vote_weight.votes()},
             {"raw_response", v.raw_response},
             {"structured", v.structured ? json(*v.structured) : json(nullptr)},
             {"usage", v.usage}};
}

void from_json(const json& j, StepVerdict& v) {
    v.step = parse_step(required<std::string>(j, "step"));
    v.stance = j.contains("stance") && !j["stance"].is_null()
                   ? std::optional(parse_label(j["stance"].get<std::string>()))
                   : std::nullopt;
    v.vote_weight = HalfVotes{static_cast<int>(std::lround(required<double>(j, "vote_weight") * 2))};
    v.raw_response = j.value("raw_response", std::string{});
    if (j.contains("structured") && !j["structured"].is_null()) {
        v.structured = j["structured"].get<FactExtractionRecord>();
    } else {
        v.structured.reset();
    }
    v.usage = j.value("usage", TokenUsage{});
}

void to_json(json& j, const AggregateAnnotation& a) {
    j = json{{"record_id", a.record_id},
             {"verdicts", a.verdicts},
             {"vote_total", a.vote_total.votes()},
             {"label", std::string(to_string(a.label))},
             {"tier", std::string(to_string(a.tier))},
             {"provisional", a.provisional}};
}

void from_json(const json& j, AggregateAnnotation& a) {
    a.record_id = required<std::string>(j, "record_id");
    a.verdicts = required<std::vector<StepVerdict>>(j, "verdicts");
    a.vote_total = HalfVotes{static_cast<int>(std::lround(required<double>(j, "vote_total") * 2))};
    a.label = parse_label(required<std::string>(j, "label"));
    a.tier = parse_tier(required<std::string>(j, "tier"));
    a.provisional = j.value("provisional", false);
}

void to_json(json& j, const GuidelineAnswer& g) {
    j = json{{"q1", std::string(to_string(g.q1))},
             {"q2", g.q2 ? json(std::string(to_string(*g.q2))) : json(nullptr)}};
}

void from_json(const json& j, GuidelineAnswer& g) {
    g.q1 = parse_q1(required<std::string>(j, "q1"));
    g.q2 = j.contains("q2") && !j["q2"].is_null() ? std::optional(parse_q2(j["q2"].get<std::string>()))
                                                  : std::nullopt;
}

}  // namespace afacta
