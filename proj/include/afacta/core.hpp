#pragma once

// Domain types shared by every stage of the annotation pipeline.

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace afacta {

enum class Domain { PoliticalSpeech, SocialMedia };

// FactualClaim is the positive class.
enum class BinaryLabel { FactualClaim, NonClaim };

// The four verdict slots. Step 3 contributes two verdicts, one per
// argument order: JudgeOrderA has the verifiable argument in slot A,
// JudgeOrderB has it in slot B.
enum class Step { Direct, FactExtraction, JudgeOrderA, JudgeOrderB };
inline constexpr std::array<Step, 4> kAllSteps = {
    Step::Direct, Step::FactExtraction, Step::JudgeOrderA, Step::JudgeOrderB};

// C0 means no category matched.
enum class Category { C0, C1, C2, C3, C4, C5 };

enum class Tier { PerfectlyConsistent, Inconsistent };

enum class Q1Answer { A_Yes, B_Maybe, C_No };
enum class Q2Answer { A_LeansFact, B_LeansOpinion };

// Vote arithmetic in exact halves. HalfVotes{3} is 1.5 votes.
struct HalfVotes {
    int halves = 0;

    constexpr double votes() const noexcept { return halves / 2.0; }
    constexpr HalfVotes& operator+=(HalfVotes o) noexcept {
        halves += o.halves;
        return *this;
    }
    friend constexpr HalfVotes operator+(HalfVotes a, HalfVotes b) noexcept {
        return HalfVotes{a.halves + b.halves};
    }
    friend constexpr auto operator<=>(HalfVotes, HalfVotes) = default;
};

inline constexpr HalfVotes kLabelThreshold{3};   // 1.5 votes
inline constexpr HalfVotes kMaxVoteTotal{6};     // 3 votes

struct TokenUsage {
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;

    std::uint64_t total() const noexcept { return prompt_tokens + completion_tokens; }
    TokenUsage& operator+=(const TokenUsage& o) noexcept {
        prompt_tokens += o.prompt_tokens;
        completion_tokens += o.completion_tokens;
        return *this;
    }
    friend TokenUsage operator+(TokenUsage a, const TokenUsage& b) noexcept { return a += b; }
    friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct SentenceRecord {
    std::string record_id;
    std::string corpus_id;
    std::uint64_t position = 0;
    std::string text;
    std::optional<std::string> prev_text;
    std::optional<std::string> next_text;
    Domain domain = Domain::PoliticalSpeech;

    // Throws ValidationError when text is blank or ids are empty.
    void validate() const;
    friend bool operator==(const SentenceRecord&, const SentenceRecord&) = default;
};

struct FactExtractionRecord {
    std::string analysis;
    std::string fact_part;
    std::string verifiable_reason;
    bool verifiability = false;
    Category category = Category::C0;

    // true with C0 or false with C1-C5.
    bool has_category_conflict() const noexcept {
        return verifiability == (category == Category::C0);
    }
    friend bool operator==(const FactExtractionRecord&, const FactExtractionRecord&) = default;
};

// Default weight of a step: 1 vote for Direct and FactExtraction, 1/2 per judge order.
constexpr HalfVotes default_vote_weight(Step step) noexcept {
    return (step == Step::Direct || step == Step::FactExtraction) ? HalfVotes{2} : HalfVotes{1};
}

struct StepVerdict {
    Step step = Step::Direct;
    // Empty when the reply stayed unparseable after the re-ask policy.
    std::optional<BinaryLabel> stance;
    HalfVotes vote_weight{2};
    std::string raw_response;
    std::optional<FactExtractionRecord> structured;
    TokenUsage usage;

    bool unparseable() const noexcept { return !stance.has_value(); }
    friend bool operator==(const StepVerdict&, const StepVerdict&) = default;
};

StepVerdict make_verdict(Step step, std::optional<BinaryLabel> stance, std::string raw,
                         std::optional<FactExtractionRecord> structured = std::nullopt,
                         TokenUsage usage = {});

struct AggregateAnnotation {
    std::string record_id;
    std::vector<StepVerdict> verdicts;  // one per Step, in kAllSteps order
    HalfVotes vote_total;
    BinaryLabel label = BinaryLabel::NonClaim;
    Tier tier = Tier::Inconsistent;
    // Set when at least one verdict was unparseable; the label then comes
    // from the parseable verdicts only.
    bool provisional = false;

    const StepVerdict& verdict(Step step) const;
    friend bool operator==(const AggregateAnnotation&, const AggregateAnnotation&) = default;
};

struct GuidelineAnswer {
    Q1Answer q1 = Q1Answer::C_No;
    std::optional<Q2Answer> q2;

    // q2 must be present iff q1 is B_Maybe.
    void validate() const;
    friend bool operator==(const GuidelineAnswer&, const GuidelineAnswer&) = default;
};

// A and B/A are positive; C and B/B are negative.
BinaryLabel project_guideline_answer(const GuidelineAnswer& answer);

struct ExpertLabels {
    std::string record_id;
    std::map<std::string, GuidelineAnswer> per_annotator;
    std::optional<BinaryLabel> resolved_gold;
};

std::string_view to_string(Domain d) noexcept;
std::string_view to_string(BinaryLabel l) noexcept;
std::string_view to_string(Step s) noexcept;
std::string_view to_string(Category c) noexcept;
std::string_view to_string(Tier t) noexcept;
std::string_view to_string(Q1Answer q) noexcept;
std::string_view to_string(Q2Answer q) noexcept;

// Inverse of to_string; throw ValidationError on unknown names.
Domain parse_domain(std::string_view s);
BinaryLabel parse_label(std::string_view s);
Step parse_step(std::string_view s);
Category parse_category(std::string_view s);
Tier parse_tier(std::string_view s);
Q1Answer parse_q1(std::string_view s);
Q2Answer parse_q2(std::string_view s);

inline BinaryLabel flip(BinaryLabel l) noexcept {
    return l == BinaryLabel::FactualClaim ? BinaryLabel::NonClaim : BinaryLabel::FactualClaim;
}

}  // namespace afacta
