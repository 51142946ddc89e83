#include <doctest.h>

#include <random>

#include <json.hpp>

#include "afacta/errors.hpp"
#include "afacta/parser.hpp"
#include "malformed_corpus.hpp"
#include "worked_examples.hpp"

using namespace afacta;
using nlohmann::json;

namespace {

void parse_any(const malformed::Case& c) {
    switch (c.kind) {
        case malformed::Kind::YesNo: parse_yes_no(c.reply); break;
        case malformed::Kind::FactExtraction: parse_fact_extraction(c.reply); break;
        case malformed::Kind::Judge: parse_judge(c.reply, ArgumentSide::Verifiable); break;
        case malformed::Kind::ScCot: parse_sc_cot(c.reply); break;
    }
}

}  // namespace

TEST_CASE("worked example replies parse to the stated stances") {
    auto rec = parse_fact_extraction(worked::kStep2Reply);
    CHECK(rec.verifiability);
    CHECK(rec.category == Category::C1);
    CHECK(rec.fact_part == "There hasn't been any loss of life due to the storms.");
    CHECK(fact_extraction_stance(rec) == BinaryLabel::FactualClaim);

    auto j = parse_judge(worked::kJudgeReply, ArgumentSide::Verifiable);
    CHECK(j.stance == BinaryLabel::FactualClaim);
    CHECK(j.confidence == Confidence::Exact);
    // Same leaning with the slots swapped means the opposite stance.
    CHECK(parse_judge(worked::kJudgeReply, ArgumentSide::Unverifiable).stance == BinaryLabel::NonClaim);
}

TEST_CASE("yes/no confidence levels") {
    CHECK(parse_yes_no("Yes").confidence == Confidence::Exact);
    CHECK(parse_yes_no("No.").confidence == Confidence::Exact);
    CHECK(parse_yes_no("  No \n").stance == BinaryLabel::NonClaim);
    CHECK(parse_yes_no("yes").confidence == Confidence::Normalized);
    CHECK(parse_yes_no("\"Yes\"").confidence == Confidence::Normalized);
    CHECK(parse_yes_no("**NO**").confidence == Confidence::Normalized);
    auto e = parse_yes_no("Yes, it mentions a specific law.");
    CHECK(e.stance == BinaryLabel::FactualClaim);
    CHECK(e.confidence == Confidence::Extracted);
    CHECK(parse_yes_no("no.").confidence == Confidence::Normalized);
    CHECK_THROWS_AS(parse_yes_no("I think the answer is Yes and also No"), ParseError);
    CHECK(parse_yes_no("Yes and no").stance == BinaryLabel::FactualClaim);
    auto f = parse_yes_no("The answer is no.");
    CHECK(f.stance == BinaryLabel::NonClaim);
    CHECK(f.confidence == Confidence::Extracted);
}

TEST_CASE("judge replies in several surface forms") {
    CHECK(parse_judge("Lean towards B", ArgumentSide::Verifiable).stance == BinaryLabel::NonClaim);
    CHECK(parse_judge("lean towards a", ArgumentSide::Verifiable).confidence == Confidence::Normalized);
    auto p = parse_judge("Having read both, I lean towards Assistant B.", ArgumentSide::Unverifiable);
    CHECK(p.stance == BinaryLabel::FactualClaim);
    CHECK(p.confidence == Confidence::Extracted);
    CHECK(parse_judge("Leans toward \"A\"", ArgumentSide::Verifiable).stance == BinaryLabel::FactualClaim);
    CHECK(parse_judge("Lean towards A. I lean towards A.", ArgumentSide::Verifiable).stance ==
          BinaryLabel::FactualClaim);
}

TEST_CASE("self-consistency replies use the last answer marker") {
    CHECK(parse_sc_cot("Reasoning...\n[Answer]: Yes").stance == BinaryLabel::FactualClaim);
    CHECK(parse_sc_cot("[Answer]: No at first.\nRevised [answer]: yes").stance ==
          BinaryLabel::FactualClaim);
    CHECK(parse_sc_cot("No").stance == BinaryLabel::NonClaim);
}

TEST_CASE("fact extraction accepts string booleans and loose key case") {
    auto r = parse_fact_extraction(
        R"({"analysis": "a", "Fact_Part": "f", "verifiable_reason": "r", "VERIFIABILITY": " False ", "category": " c0 "})");
    CHECK_FALSE(r.verifiability);
    CHECK(r.category == Category::C0);
}

TEST_CASE("fact extraction finds the object inside arbitrary wrapping") {
    const std::vector<std::string> prefixes = {"", "Sure! Here is the JSON:\n", "```json\n",
                                               "Note {unbalanced and then\n", "Output: "};
    const std::vector<std::string> suffixes = {"", "\n```", "\nLet me know {if} you need more.",
                                               " }", "\n\nThanks"};
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> cat(0, 5), coin(0, 1);
    for (int i = 0; i < 300; ++i) {
        bool v = coin(rng);
        int c = cat(rng);
        json obj{{"ANALYSIS", "text with {braces} and \"quotes\" #" + std::to_string(i)},
                 {"FACT_PART", "part } {"},
                 {"VERIFIABLE_REASON", "r"},
                 {"VERIFIABILITY", coin(rng) ? json(v) : json(v ? "true" : "false")},
                 {"CATEGORY", "C" + std::to_string(c)}};
        std::string body = obj.dump(coin(rng) ? 2 : -1);
        std::string raw = prefixes[i % prefixes.size()] + body + suffixes[(i / 5) % suffixes.size()];
        CAPTURE(raw);
        auto r = parse_fact_extraction(raw);
        CHECK(r.verifiability == v);
        CHECK(static_cast<int>(r.category) == c);
        CHECK(r.fact_part == "part } {");
    }
}

TEST_CASE("malformed replies raise ParseError and keep the raw text") {
    auto cases = malformed::corpus();
    CHECK(cases.size() == 50);
    for (const auto& c : cases) {
        CAPTURE(c.reply);
        CHECK_THROWS_AS(parse_any(c), ParseError);
        try {
            parse_any(c);
        } catch (const ParseError& e) {
            CHECK(e.raw() == c.reply);
        }
    }
}
