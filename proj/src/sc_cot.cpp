#include "afacta/sc_cot.hpp"

#include <iomanip>
#include <sstream>

#include "afacta/errors.hpp"
#include "afacta/gateway.hpp"
#include "afacta/json_io.hpp"
#include "afacta/prompts.hpp"

namespace afacta {

std::optional<MajorityVote> majority_vote(std::span<const BinaryLabel> stances) {
    int pos = 0;
    for (auto s : stances) pos += s == BinaryLabel::FactualClaim;
    int neg = static_cast<int>(stances.size()) - pos;
    if (pos == neg) return std::nullopt;
    return pos > neg ? MajorityVote{BinaryLabel::FactualClaim, pos}
                     : MajorityVote{BinaryLabel::NonClaim, neg};
}

ScCotAnnotation tally_sc_cot(std::string record_id, int requested, std::vector<ScCotSample> samples) {
    ScCotAnnotation out;
    out.record_id = std::move(record_id);
    out.requested = requested;
    std::vector<BinaryLabel> stances;
    for (const auto& s : samples) {
        if (s.parsed) stances.push_back(s.parsed->stance);
    }
    out.samples = std::move(samples);
    const auto needed = static_cast<std::size_t>((requested + 1) / 2);
    auto vote = majority_vote(stances);
    if (stances.size() < needed || !vote) {
        out.failed = true;
        return out;
    }
    out.majority_label = vote->label;
    out.consistency_level = vote->level;
    return out;
}

ScCotAnnotation run_sc_cot(const SentenceRecord& rec, int n, Gateway& gateway,
                           const PromptEngine& prompts, const std::string& model) {
    if (n < 1 || n % 2 == 0) {
        throw ValidationError("self-consistency needs a positive odd sample count, got " +
                              std::to_string(n));
    }
    const auto bundle = prompts.render_sc_cot(rec);
    std::vector<ScCotSample> samples;
    samples.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto req = ChatRequest::from_bundle(bundle, model, "sc_cot");
        req.salt["sample_index"] = std::to_string(i);
        auto resp = gateway.complete(req);
        ScCotSample sample{resp.text, std::nullopt, resp.usage};
        try {
            sample.parsed = parse_sc_cot(resp.text);
        } catch (const ParseError&) {
        }
        samples.push_back(std::move(sample));
    }
    return tally_sc_cot(rec.record_id, n, std::move(samples));
}

namespace {

void require_gold(std::span<const ScCotAnnotation> annos, const LabelMap& gold) {
    std::string missing;
    for (const auto& a : annos) {
        if (!gold.count(a.record_id)) missing += (missing.empty() ? "" : ", ") + a.record_id;
    }
    if (!missing.empty()) throw DataError("no gold label for: " + missing);
}

CurvePoint finish(std::size_t hits, std::size_t count) {
    CurvePoint p;
    p.count = count;
    if (count) p.accuracy = static_cast<double>(hits) / static_cast<double>(count);
    return p;
}

}  // namespace

std::map<int, CurvePoint> consistency_curve(std::span<const ScCotAnnotation> annos,
                                            const LabelMap& gold) {
    require_gold(annos, gold);
    std::map<int, std::pair<std::size_t, std::size_t>> buckets;  // level -> (hits, count)
    for (const auto& a : annos) {
        if (a.failed) continue;
        auto& b = buckets[a.consistency_level];
        b.first += *a.majority_label == gold.at(a.record_id);
        ++b.second;
    }
    std::map<int, CurvePoint> out;
    for (const auto& [level, b] : buckets) out[level] = finish(b.first, b.second);
    return out;
}

std::map<int, CurvePoint> prefix_consistency_curve(std::span<const ScCotAnnotation> annos,
                                                   const LabelMap& gold) {
    require_gold(annos, gold);
    std::size_t longest = 0;
    for (const auto& a : annos) longest = std::max(longest, a.samples.size());

    std::map<int, CurvePoint> out;
    for (std::size_t x = 1; x <= longest; ++x) {
        std::size_t hits = 0;
        std::size_t count = 0;
        for (const auto& a : annos) {
            if (a.samples.size() < x) continue;
            const auto& first = a.samples.front().parsed;
            if (!first) continue;
            bool unanimous = true;
            for (std::size_t i = 1; i < x && unanimous; ++i) {
                const auto& s = a.samples[i].parsed;
                unanimous = s && s->stance == first->stance;
            }
            if (!unanimous) continue;
            ++count;
            hits += first->stance == gold.at(a.record_id);
        }
        out[static_cast<int>(x)] = finish(hits, count);
    }
    return out;
}

std::string curve_csv(const std::map<int, CurvePoint>& curve, const std::string& key_column) {
    std::ostringstream out;
    out << key_column << ",accuracy,count\n";
    for (const auto& [key, p] : curve) {
        out << key << ',';
        if (p.accuracy) out << std::setprecision(17) << *p.accuracy;
        out << ',' << p.count << '\n';
    }
    return out.str();
}

void to_json(nlohmann::json& j, const ScCotAnnotation& a) {
    auto samples = nlohmann::json::array();
    for (const auto& s : a.samples) {
        nlohmann::json sj{{"raw", s.raw}, {"usage", s.usage}, {"stance", nullptr}};
        if (s.parsed) {
            sj["stance"] = std::string(to_string(s.parsed->stance));
            sj["confidence"] = std::string(to_string(s.parsed->confidence));
        }
        samples.push_back(std::move(sj));
    }
    j = nlohmann::json{
        {"record_id", a.record_id},
        {"requested", a.requested},
        {"majority_label",
         a.majority_label ? nlohmann::json(std::string(to_string(*a.majority_label))) : nlohmann::json(nullptr)},
        {"consistency_level", a.consistency_level},
        {"failed", a.failed},
        {"samples", samples}};
}

void from_json(const nlohmann::json& j, ScCotAnnotation& a) {
    a.record_id = j.at("record_id").get<std::string>();
    a.requested = j.at("requested").get<int>();
    a.samples.clear();
    for (const auto& sj : j.at("samples")) {
        ScCotSample s{sj.at("raw").get<std::string>(), std::nullopt, sj.at("usage").get<TokenUsage>()};
        if (!sj.at("stance").is_null()) {
            // Re-derive confidence from the stored text.
            try {
                s.parsed = parse_sc_cot(s.raw);
            } catch (const ParseError&) {
                throw DataError("stored sc-cot sample no longer parses for " + a.record_id);
            }
        }
        a.samples.push_back(std::move(s));
    }
    auto tallied = tally_sc_cot(a.record_id, a.requested, std::move(a.samples));
    a = std::move(tallied);
}

}  // namespace afacta
