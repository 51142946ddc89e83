#pragma once

#include <span>
#include <string>
#include <vector>

#include "afacta/core.hpp"

namespace afacta {

// Weighted vote over one verdict per step. The label is FactualClaim only
// above 1.5 votes, so a 1.5 tie is NonClaim. The sample is
// PerfectlyConsistent only at 0 or 3 votes with every verdict parseable.
// Unparseable verdicts add nothing and mark the result provisional.
AggregateAnnotation aggregate(std::string record_id, std::vector<StepVerdict> verdicts);

// Whether the two judge orders reached the same stance.
bool judges_agree(const AggregateAnnotation& annotation);

// Fraction of samples whose two judge verdicts disagree. Samples with an
// unparseable judge verdict are left out; throws DomainError when no sample
// remains.
double position_inconsistency_rate(std::span<const AggregateAnnotation> annotations);

}  // namespace afacta
