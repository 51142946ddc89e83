#pragma once

// Strict mapping from raw model replies to stances. Every function either
// returns a stance or throws ParseError; nothing defaults silently.

#include <string>
#include <string_view>

#include "afacta/core.hpp"
#include "afacta/prompts.hpp"

namespace afacta {

enum class Confidence {
    Exact,       // allowed surface form, up to trailing punctuation/whitespace
    Normalized,  // allowed form after case folding
    Extracted,   // answer pulled out of surrounding prose
};
std::string_view to_string(Confidence c) noexcept;

struct ParseOutcome {
    BinaryLabel stance = BinaryLabel::NonClaim;
    Confidence confidence = Confidence::Exact;
    std::string raw;

    friend bool operator==(const ParseOutcome&, const ParseOutcome&) = default;
};

// yes -> FactualClaim, no -> NonClaim.
ParseOutcome parse_yes_no(std::string_view raw);

// First balanced JSON object carrying all five keys. VERIFIABILITY may be a
// boolean or the strings "true"/"false"; CATEGORY must be C0..C5.
FactExtractionRecord parse_fact_extraction(std::string_view raw);

inline BinaryLabel fact_extraction_stance(const FactExtractionRecord& r) noexcept {
    return r.verifiability ? BinaryLabel::FactualClaim : BinaryLabel::NonClaim;
}

// a_side names the argument that sat in slot A for this call.
ParseOutcome parse_judge(std::string_view raw, ArgumentSide a_side);

// Token after the last "[Answer]:" marker; whole-text yes/no when absent.
ParseOutcome parse_sc_cot(std::string_view raw);

}  // namespace afacta
