#include "afacta/core.hpp"

#include <algorithm>
#include <cctype>

#include "afacta/errors.hpp"

namespace afacta {

namespace {

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<Enum, N>& values, std::string_view kind) {
    for (Enum v : values) {
        if (to_string(v) == s) return v;
    }
    throw ValidationError("unknown " + std::string(kind) + " '" + std::string(s) + "'");
}

}  // namespace

void SentenceRecord::validate() const {
    if (record_id.empty()) throw ValidationError("record_id is empty");
    if (corpus_id.empty()) throw ValidationError("record " + record_id + ": corpus_id is empty");
    if (is_blank(text)) throw ValidationError("record " + record_id + ": text is blank");
}

StepVerdict make_verdict(Step step, std::optional<BinaryLabel> stance, std::string raw,
                         std::optional<FactExtractionRecord> structured, TokenUsage usage) {
    if (structured && step != Step::FactExtraction) {
        throw ValidationError("structured record attached to a non fact-extraction verdict");
    }
    if (step == Step::FactExtraction && stance && !structured) {
        throw ValidationError("parsed fact-extraction verdict needs its structured record");
    }
    return StepVerdict{step, stance, default_vote_weight(step), std::move(raw),
                       std::move(structured), usage};
}

const StepVerdict& AggregateAnnotation::verdict(Step step) const {
    for (const auto& v : verdicts) {
        if (v.step == step) return v;
    }
    throw ValidationError("annotation " + record_id + " has no verdict for " +
                          std::string(to_string(step)));
}

void GuidelineAnswer::validate() const {
    if (q1 == Q1Answer::B_Maybe && !q2) {
        throw ValidationError("q2 is required when q1 is B_Maybe");
    }
    if (q1 != Q1Answer::B_Maybe && q2) {
        throw ValidationError("q2 is only allowed when q1 is B_Maybe");
    }
}

BinaryLabel project_guideline_answer(const GuidelineAnswer& answer) {
    answer.validate();
    switch (answer.q1) {
        case Q1Answer::A_Yes:
            return BinaryLabel::FactualClaim;
        case Q1Answer::C_No:
            return BinaryLabel::NonClaim;
        case Q1Answer::B_Maybe:
            return *answer.q2 == Q2Answer::A_LeansFact ? BinaryLabel::FactualClaim
                                                       : BinaryLabel::NonClaim;
    }
    return BinaryLabel::NonClaim;
}

std::string_view to_string(Domain d) noexcept {
    return d == Domain::PoliticalSpeech ? "PoliticalSpeech" : "SocialMedia";
}

std::string_view to_string(BinaryLabel l) noexcept {
    return l == BinaryLabel::FactualClaim ? "FactualClaim" : "NonClaim";
}

std::string_view to_string(Step s) noexcept {
    switch (s) {
        case Step::Direct: return "Direct";
        case Step::FactExtraction: return "FactExtraction";
        case Step::JudgeOrderA: return "JudgeOrderA";
        case Step::JudgeOrderB: return "JudgeOrderB";
    }
    return "?";
}

std::string_view to_string(Category c) noexcept {
    static constexpr std::array<std::string_view, 6> names = {"C0", "C1", "C2", "C3", "C4", "C5"};
    return names[static_cast<std::size_t>(c)];
}

std::string_view to_string(Tier t) noexcept {
    return t == Tier::PerfectlyConsistent ? "PerfectlyConsistent" : "Inconsistent";
}

std::string_view to_string(Q1Answer q) noexcept {
    switch (q) {
        case Q1Answer::A_Yes: return "A_Yes";
        case Q1Answer::B_Maybe: return "B_Maybe";
        case Q1Answer::C_No: return "C_No";
    }
    return "?";
}

std::string_view to_string(Q2Answer q) noexcept {
    return q == Q2Answer::A_LeansFact ? "A_LeansFact" : "B_LeansOpinion";
}

Domain parse_domain(std::string_view s) {
    return parse_enum(s, std::array{Domain::PoliticalSpeech, Domain::SocialMedia}, "domain");
}

BinaryLabel parse_label(std::string_view s) {
    return parse_enum(s, std::array{BinaryLabel::FactualClaim, BinaryLabel::NonClaim}, "label");
}

Step parse_step(std::string_view s) { return parse_enum(s, kAllSteps, "step"); }

Category parse_category(std::string_view s) {
    return parse_enum(s,
                      std::array{Category::C0, Category::C1, Category::C2, Category::C3,
                                 Category::C4, Category::C5},
                      "category");
}

Tier parse_tier(std::string_view s) {
    return parse_enum(s, std::array{Tier::PerfectlyConsistent, Tier::Inconsistent}, "tier");
}

Q1Answer parse_q1(std::string_view s) {
    return parse_enum(s, std::array{Q1Answer::A_Yes, Q1Answer::B_Maybe, Q1Answer::C_No}, "q1");
}

Q2Answer parse_q2(std::string_view s) {
    return parse_enum(s, std::array{Q2Answer::A_LeansFact, Q2Answer::B_LeansOpinion}, "q2");
}

}  // namespace afacta
