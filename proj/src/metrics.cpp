#include "afacta/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "afacta/aggregate.hpp"
#include "afacta/errors.hpp"
#include "afacta/stats.hpp"

namespace afacta {

using nlohmann::json;

double accuracy(std::span<const BinaryLabel> gold, std::span<const BinaryLabel> pred) {
    if (gold.size() != pred.size()) {
        throw DataError("accuracy: " + std::to_string(gold.size()) + " gold labels vs " +
                        std::to_string(pred.size()) + " predictions");
    }
    if (gold.empty()) throw DataError("accuracy: no labels");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) hits += gold[i] == pred[i];
    return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double accuracy(const LabelMap& gold, const LabelMap& pred) {
    std::vector<BinaryLabel> g;
    std::vector<BinaryLabel> p;
    std::string missing;
    for (const auto& [id, label] : pred) {
        auto it = gold.find(id);
        if (it == gold.end()) {
            missing += (missing.empty() ? "" : ", ") + id;
            continue;
        }
        g.push_back(it->second);
        p.push_back(label);
    }
    if (!missing.empty() || gold.size() != pred.size()) {
        throw DataError("accuracy: label sets are not aligned" +
                        (missing.empty() ? std::string{} : " (no gold for " + missing + ")"));
    }
    return accuracy(g, p);
}

double cohen_kappa(std::span<const BinaryLabel> a, std::span<const BinaryLabel> b) {
    if (a.size() != b.size()) {
        throw DataError("cohen_kappa: " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + " labels");
    }
    if (a.empty()) throw DataError("cohen_kappa: no labels");
    const double n = static_cast<double>(a.size());
    double agree = 0;
    double a_pos = 0;
    double b_pos = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        agree += a[i] == b[i];
        a_pos += a[i] == BinaryLabel::FactualClaim;
        b_pos += b[i] == BinaryLabel::FactualClaim;
    }
    double p_o = agree / n;
    double p_e = (a_pos / n) * (b_pos / n) + ((n - a_pos) / n) * ((n - b_pos) / n);
    if (p_e >= 1.0) return 1.0;
    return (p_o - p_e) / (1.0 - p_e);
}

std::string_view to_string(Scope s) noexcept {
    switch (s) {
        case Scope::Full: return "Full";
        case Scope::ConsistentSubset: return "ConsistentSubset";
        case Scope::InconsistentSubset: return "InconsistentSubset";
    }
    return "?";
}

namespace {

std::vector<BinaryLabel> pick(const LabelMap& labels, const std::vector<std::string>& ids) {
    std::vector<BinaryLabel> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(labels.at(id));
    return out;
}

void require_coverage(const LabelMap& labels, const std::vector<std::string>& ids,
                      const std::string& what) {
    std::string missing;
    std::size_t count = 0;
    for (const auto& id : ids) {
        if (labels.count(id)) continue;
        if (count++ < 20) missing += (missing.empty() ? "" : ", ") + id;
    }
    if (count) {
        throw DataError(what + " missing for " + std::to_string(count) + " record(s): " + missing +
                        (count > 20 ? ", ..." : ""));
    }
}

EvalReport score_scope(Scope scope, const std::vector<std::string>& ids, std::size_t total,
                       const LabelMap& gold, const LabelMap& e1, const LabelMap& e2,
                       const LabelMap& model) {
    EvalReport r;
    r.scope = scope;
    r.n = ids.size();
    r.subset_fraction = total ? static_cast<double>(ids.size()) / static_cast<double>(total) : 0.0;
    if (ids.empty()) return r;
    auto g = pick(gold, ids);
    auto h1 = pick(e1, ids);
    auto h2 = pick(e2, ids);
    auto m = pick(model, ids);
    r.avg_expert_accuracy = (accuracy(g, h1) + accuracy(g, h2)) / 2.0;
    r.accuracy_vs_gold = accuracy(g, m);
    r.inter_expert_kappa = cohen_kappa(h1, h2);
    r.avg_kappa_to_experts = (cohen_kappa(h1, m) + cohen_kappa(h2, m)) / 2.0;
    return r;
}

}  // namespace

std::vector<EvalReport> expert_suite(const LabelMap& gold, const LabelMap& expert1,
                                     const LabelMap& expert2, const LabelMap& model_pred,
                                     const std::map<std::string, Tier>& tiers) {
    std::vector<std::string> all;
    std::vector<std::string> con;
    std::vector<std::string> inc;
    for (const auto& [id, _] : model_pred) {
        all.push_back(id);
        auto it = tiers.find(id);
        if (it == tiers.end()) continue;
        (it->second == Tier::PerfectlyConsistent ? con : inc).push_back(id);
    }
    std::vector<std::string> no_tier;
    for (const auto& id : all) {
        if (!tiers.count(id)) no_tier.push_back(id);
    }
    if (!no_tier.empty()) throw DataError("tier missing for record " + no_tier.front());
    require_coverage(gold, all, "gold label");
    require_coverage(expert1, all, "expert 1 label");
    require_coverage(expert2, all, "expert 2 label");

    return {score_scope(Scope::Full, all, all.size(), gold, expert1, expert2, model_pred),
            score_scope(Scope::ConsistentSubset, con, all.size(), gold, expert1, expert2,
                        model_pred),
            score_scope(Scope::InconsistentSubset, inc, all.size(), gold, expert1, expert2,
                        model_pred)};
}

std::vector<StepReport> per_step_suite(const LabelMap& gold, const LabelMap& expert1,
                                       const LabelMap& expert2,
                                       std::span<const AggregateAnnotation> annotations) {
    std::vector<std::string> ids;
    for (const auto& a : annotations) ids.push_back(a.record_id);
    require_coverage(gold, ids, "gold label");
    require_coverage(expert1, ids, "expert 1 label");
    require_coverage(expert2, ids, "expert 2 label");

    auto step_scope = [&](Step step) {
        LabelMap pred;
        std::vector<std::string> in_scope;
        for (const auto& a : annotations) {
            const auto& v = a.verdict(step);
            if (v.unparseable()) continue;
            pred[a.record_id] = *v.stance;
            in_scope.push_back(a.record_id);
        }
        return score_scope(Scope::Full, in_scope, annotations.size(), gold, expert1, expert2,
                           pred);
    };
    auto from_scope = [](std::string name, const EvalReport& r) {
        StepReport s;
        s.name = std::move(name);
        s.n = r.n;
        s.accuracy = r.accuracy_vs_gold;
        s.avg_kappa_to_experts = r.avg_kappa_to_experts;
        return s;
    };

    std::vector<StepReport> out;
    out.push_back(from_scope("Step 1", step_scope(Step::Direct)));
    out.push_back(from_scope("Step 2", step_scope(Step::FactExtraction)));

    auto ra = step_scope(Step::JudgeOrderA);
    auto rb = step_scope(Step::JudgeOrderB);
    StepReport s3;
    s3.name = "Step 3";
    s3.n = std::min(ra.n, rb.n);
    auto mean = [](const std::optional<double>& x, const std::optional<double>& y) {
        return (x && y) ? std::optional<double>((*x + *y) / 2.0) : std::nullopt;
    };
    s3.accuracy = mean(ra.accuracy_vs_gold, rb.accuracy_vs_gold);
    s3.avg_kappa_to_experts = mean(ra.avg_kappa_to_experts, rb.avg_kappa_to_experts);
    s3.orders = {{Step::JudgeOrderA, ra}, {Step::JudgeOrderB, rb}};
    out.push_back(std::move(s3));
    return out;
}

FisherResult fisher_aggregate(std::span<const double> p_values) {
    if (p_values.empty()) throw DomainError("fisher_aggregate: no p-values");
    double sum_log = 0.0;
    for (double p : p_values) {
        if (!(p > 0.0) || p > 1.0) {
            throw DomainError("fisher_aggregate: p-value outside (0, 1]: " + std::to_string(p));
        }
        sum_log += std::log(p);
    }
    FisherResult r;
    r.statistic = -2.0 * sum_log;
    if (r.statistic == 0.0) r.statistic = 0.0;  // drop the sign of -0.0
    r.p_value = stats::chi_square_upper_tail(r.statistic, 2.0 * static_cast<double>(p_values.size()));
    return r;
}

double two_sample_t(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() < 2 || ys.size() < 2) {
        throw DomainError("two_sample_t: each sample needs at least two values");
    }
    auto mean = [](std::span<const double> v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    auto sum_sq = [](std::span<const double> v, double m) {
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return s;
    };
    double mx = mean(xs);
    double my = mean(ys);
    double nx = static_cast<double>(xs.size());
    double ny = static_cast<double>(ys.size());
    double dof = nx + ny - 2.0;
    double pooled = (sum_sq(xs, mx) + sum_sq(ys, my)) / dof;
    double se = std::sqrt(pooled * (1.0 / nx + 1.0 / ny));
    if (se == 0.0) return mx == my ? 1.0 : 0.0;
    return stats::students_t_two_sided((mx - my) / se, dof);
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string cell(const std::optional<double>& v, bool percent) {
    if (!v) return "-";
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(percent ? 2 : 3) << (percent ? *v * 100.0 : *v);
    return ss.str();
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string scope_header(const EvalReport& r) {
    std::ostringstream ss;
    const char* name = r.scope == Scope::Full               ? "S"
                       : r.scope == Scope::ConsistentSubset ? "S_con"
                                                            : "S_inc";
    ss << name << " (" << std::fixed << std::setprecision(2) << r.subset_fraction * 100.0 << ")";
    return ss.str();
}

}  // namespace

json to_json(const EvalReport& r) {
    return json{{"scope", std::string(to_string(r.scope))},
                {"subset_fraction", r.subset_fraction},
                {"n", r.n},
                {"accuracy_vs_gold", opt(r.accuracy_vs_gold)},
                {"avg_kappa_to_experts", opt(r.avg_kappa_to_experts)},
                {"inter_expert_kappa", opt(r.inter_expert_kappa)},
                {"avg_expert_accuracy", opt(r.avg_expert_accuracy)}};
}

json to_json(const StepReport& r) {
    json j{{"step", r.name},
           {"n", r.n},
           {"accuracy", opt(r.accuracy)},
           {"avg_kappa_to_experts", opt(r.avg_kappa_to_experts)}};
    if (!r.orders.empty()) {
        json orders = json::object();
        for (const auto& [step, rep] : r.orders) orders[std::string(to_string(step))] = to_json(rep);
        j["orders"] = orders;
    }
    return j;
}

std::string format_eval_table(std::span<const EvalReport> reports, const std::string& model_name) {
    constexpr std::size_t label_w = 16;
    constexpr std::size_t col_w = 11;
    std::ostringstream out;
    out << pad("", label_w);
    for (const auto& r : reports) out << pad(scope_header(r), col_w * 2 + 2);
    out << '\n' << pad("", label_w);
    for (std::size_t i = 0; i < reports.size(); ++i) {
        out << pad("Agreement", col_w) << pad("Accuracy", col_w) << "  ";
    }
    out << '\n' << pad("Human experts", label_w);
    for (const auto& r : reports) {
        out << pad(cell(r.inter_expert_kappa, false), col_w)
            << pad(cell(r.avg_expert_accuracy, true), col_w) << "  ";
    }
    out << '\n' << pad(model_name, label_w);
    for (const auto& r : reports) {
        out << pad(cell(r.avg_kappa_to_experts, false), col_w)
            << pad(cell(r.accuracy_vs_gold, true), col_w) << "  ";
    }
    out << '\n';
    return out.str();
}

std::string format_step_table(std::span<const StepReport> reports, const std::string& model_name) {
    constexpr std::size_t label_w = 16;
    constexpr std::size_t col_w = 11;
    std::ostringstream out;
    out << pad("", label_w);
    for (const auto& r : reports) out << pad(r.name, col_w * 2 + 2);
    out << '\n' << pad("", label_w);
    for (std::size_t i = 0; i < reports.size(); ++i) {
        out << pad("Agreement", col_w) << pad("Accuracy", col_w) << "  ";
    }
    out << '\n' << pad(model_name, label_w);
    for (const auto& r : reports) {
        out << pad(cell(r.avg_kappa_to_experts, false), col_w) << pad(cell(r.accuracy, true), col_w)
            << "  ";
    }
    out << '\n';
    return out.str();
}

}  // namespace afacta
