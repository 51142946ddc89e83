#pragma once

// Self-consistency chain-of-thought baseline: n sampled completions of one
// prompt, majority vote, and accuracy by agreement level.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "afacta/core.hpp"
#include "afacta/metrics.hpp"
#include "afacta/parser.hpp"

#include <json.hpp>

namespace afacta {

class Gateway;
class PromptEngine;

struct ScCotSample {
    std::string raw;
    std::optional<ParseOutcome> parsed;  // empty when the reply was unparseable
    TokenUsage usage;
};

struct ScCotAnnotation {
    std::string record_id;
    int requested = 0;
    std::vector<ScCotSample> samples;  // generation order
    std::optional<BinaryLabel> majority_label;
    // Parsed samples agreeing with majority_label.
    int consistency_level = 0;
    // Too few parsed samples, or a tie among them.
    bool failed = false;
};

struct MajorityVote {
    BinaryLabel label;
    int level;
};

// Strict majority; empty on a tie or with no stances.
std::optional<MajorityVote> majority_vote(std::span<const BinaryLabel> stances);

// Builds the annotation from already generated replies. Unparseable
// replies are dropped from the vote; fewer than ceil(n/2) parsed replies,
// or a tie among them, marks the annotation failed.
ScCotAnnotation tally_sc_cot(std::string record_id, int requested, std::vector<ScCotSample> samples);

// Issues n independent sampled completions. n must be positive and odd.
ScCotAnnotation run_sc_cot(const SentenceRecord& rec, int n, Gateway& gateway,
                           const PromptEngine& prompts, const std::string& model);

struct CurvePoint {
    std::optional<double> accuracy;  // empty for an empty bucket
    std::size_t count = 0;
};

// Accuracy per consistency level. Failed annotations are not bucketed.
// Throws DataError naming any record without a gold label.
std::map<int, CurvePoint> consistency_curve(std::span<const ScCotAnnotation> annos,
                                            const LabelMap& gold);

// For x = 1..N: accuracy of the shared label on records whose first x
// samples all parsed and agree. The subsets shrink as x grows.
std::map<int, CurvePoint> prefix_consistency_curve(std::span<const ScCotAnnotation> annos,
                                                   const LabelMap& gold);

// "level,accuracy,count" (or "x,accuracy,count") rows.
std::string curve_csv(const std::map<int, CurvePoint>& curve, const std::string& key_column);

void to_json(nlohmann::json& j, const ScCotAnnotation& a);
void from_json(const nlohmann::json& j, ScCotAnnotation& a);

}  // namespace afacta
