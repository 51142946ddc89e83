#pragma once

// Agreement and accuracy figures, conditioned on annotation consistency,
// plus the significance helpers used to compare training mixes.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "afacta/core.hpp"

namespace afacta {

// Labels keyed by record_id.
using LabelMap = std::map<std::string, BinaryLabel>;

// Fraction of positions where gold and pred agree. Throws DataError on a
// length mismatch or an empty input.
double accuracy(std::span<const BinaryLabel> gold, std::span<const BinaryLabel> pred);
// Same over record ids; both maps must cover the same ids.
double accuracy(const LabelMap& gold, const LabelMap& pred);

// (p_o - p_e) / (1 - p_e). When both raters use one identical constant label
// (p_e = 1) the result is 1.0.
double cohen_kappa(std::span<const BinaryLabel> a, std::span<const BinaryLabel> b);

enum class Scope { Full, ConsistentSubset, InconsistentSubset };
std::string_view to_string(Scope s) noexcept;

struct EvalReport {
    Scope scope = Scope::Full;
    double subset_fraction = 0.0;
    std::size_t n = 0;
    // Empty when the scope holds no records.
    std::optional<double> accuracy_vs_gold;
    std::optional<double> avg_kappa_to_experts;
    std::optional<double> inter_expert_kappa;
    std::optional<double> avg_expert_accuracy;
};

// One report per scope (full set, perfectly consistent, inconsistent). The
// record set is the keys of model_pred; every other input must cover it.
std::vector<EvalReport> expert_suite(const LabelMap& gold, const LabelMap& expert1,
                                     const LabelMap& expert2, const LabelMap& model_pred,
                                     const std::map<std::string, Tier>& tiers);

struct StepReport {
    std::string name;  // "Step 1", "Step 2", "Step 3"
    std::size_t n = 0;
    std::optional<double> accuracy;
    std::optional<double> avg_kappa_to_experts;
    // Step 3 only: the per-order figures that were averaged.
    std::vector<std::pair<Step, EvalReport>> orders;
};

// Per reasoning path. Step 3 averages the scores of its two judge orders.
// Records whose verdict for a step is unparseable are left out of that step.
std::vector<StepReport> per_step_suite(const LabelMap& gold, const LabelMap& expert1,
                                       const LabelMap& expert2,
                                       std::span<const AggregateAnnotation> annotations);

struct FisherResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// -2 * sum(ln p), referred to chi-square with 2k degrees of freedom.
FisherResult fisher_aggregate(std::span<const double> p_values);

// Two-sided pooled-variance two-sample t-test.
double two_sample_t(std::span<const double> xs, std::span<const double> ys);

nlohmann::json to_json(const EvalReport& r);
nlohmann::json to_json(const StepReport& r);

// Aligned text tables: scopes as column groups, agreement and accuracy
// (percent) per group.
std::string format_eval_table(std::span<const EvalReport> reports, const std::string& model_name);
std::string format_step_table(std::span<const StepReport> reports, const std::string& model_name);

}  // namespace afacta
