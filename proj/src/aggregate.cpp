#include "afacta/aggregate.hpp"

#include <algorithm>
#include <array>

#include "afacta/errors.hpp"

namespace afacta {

AggregateAnnotation aggregate(std::string record_id, std::vector<StepVerdict> verdicts) {
    if (verdicts.size() != kAllSteps.size()) {
        throw ValidationError("record " + record_id + ": expected 4 verdicts, got " +
                              std::to_string(verdicts.size()));
    }
    std::array<bool, 4> seen{};
    for (const auto& v : verdicts) {
        auto idx = static_cast<std::size_t>(v.step);
        if (seen[idx]) {
            throw ValidationError("record " + record_id + ": duplicate verdict for " +
                                  std::string(to_string(v.step)));
        }
        seen[idx] = true;
    }
    std::sort(verdicts.begin(), verdicts.end(),
              [](const StepVerdict& a, const StepVerdict& b) { return a.step < b.step; });

    AggregateAnnotation out;
    out.record_id = std::move(record_id);
    bool any_unparseable = false;
    HalfVotes available;
    for (const auto& v : verdicts) {
        available += v.vote_weight;
        if (v.unparseable()) {
            any_unparseable = true;
        } else if (*v.stance == BinaryLabel::FactualClaim) {
            out.vote_total += v.vote_weight;
        }
    }
    // More than half of the weight that all four verdicts could cast; with
    // the default weights that is the 1.5-vote threshold.
    out.label = out.vote_total.halves * 2 > available.halves ? BinaryLabel::FactualClaim
                                                             : BinaryLabel::NonClaim;
    bool extreme = out.vote_total == HalfVotes{0} || out.vote_total == available;
    out.tier = (extreme && !any_unparseable) ? Tier::PerfectlyConsistent : Tier::Inconsistent;
    out.provisional = any_unparseable;
    out.verdicts = std::move(verdicts);
    return out;
}

bool judges_agree(const AggregateAnnotation& annotation) {
    const auto& a = annotation.verdict(Step::JudgeOrderA);
    const auto& b = annotation.verdict(Step::JudgeOrderB);
    return !a.unparseable() && !b.unparseable() && *a.stance == *b.stance;
}

double position_inconsistency_rate(std::span<const AggregateAnnotation> annotations) {
    std::size_t counted = 0;
    std::size_t disagree = 0;
    for (const auto& ann : annotations) {
        const auto& a = ann.verdict(Step::JudgeOrderA);
        const auto& b = ann.verdict(Step::JudgeOrderB);
        if (a.unparseable() || b.unparseable()) continue;
        ++counted;
        if (*a.stance != *b.stance) ++disagree;
    }
    if (counted == 0) {
        throw DomainError("position inconsistency rate needs at least one sample with both "
                          "judge verdicts parsed");
    }
    return static_cast<double>(disagree) / static_cast<double>(counted);
}

}  // namespace afacta
