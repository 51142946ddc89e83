#include "afacta/pipeline.hpp"

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include "afacta/aggregate.hpp"
#include "afacta/gateway.hpp"
#include "afacta/hash.hpp"
#include "afacta/json_io.hpp"
#include "afacta/parser.hpp"
#include "afacta/prompts.hpp"

namespace afacta {

using nlohmann::json;

Annotator::Annotator(Gateway& gateway, const PromptEngine& prompts, AnnotatorOptions options)
    : gateway_(gateway), prompts_(prompts), options_(std::move(options)) {
    if (options_.max_reasks < 0) throw ConfigError("max_reasks must be >= 0");
}

ChatRequest step_request(const PromptBundle& bundle, const std::string& model, const char* tag,
                         int attempt) {
    auto req = ChatRequest::from_bundle(bundle, model, tag);
    if (attempt > 0) {
        req.decode.temperature = 0.0;
        req.salt["reask"] = std::to_string(attempt);
    }
    return req;
}

namespace {

struct Parsed {
    std::optional<BinaryLabel> stance;
    std::optional<FactExtractionRecord> structured;
};

// One step with the re-ask policy applied. Returns the verdict; the raw
// text is that of the last attempt and usage covers all attempts.
StepVerdict ask(Gateway& gateway, const PromptBundle& bundle, const std::string& model,
                const char* tag, Step step, int max_reasks,
                const std::function<Parsed(const std::string&)>& parse) {
    TokenUsage usage;
    std::string raw;
    for (int attempt = 0; attempt <= max_reasks; ++attempt) {
        auto resp = gateway.complete(step_request(bundle, model, tag, attempt));
        usage += resp.usage;
        raw = resp.text;
        try {
            auto p = parse(raw);
            return make_verdict(step, p.stance, raw, std::move(p.structured), usage);
        } catch (const ParseError&) {
        }
    }
    return make_verdict(step, std::nullopt, raw, std::nullopt, usage);
}

}  // namespace

AnnotatedRecord Annotator::annotate(const SentenceRecord& rec) const {
    std::vector<StepVerdict> done;
    RecordStatus reached = RecordStatus::Pending;
    AnnotatedRecord out;
    out.record = rec;
    const auto& model = options_.model;
    const int reasks = options_.max_reasks;

    try {
        done.push_back(ask(gateway_, prompts_.render_step1(rec), model, kTagDirect, Step::Direct,
                           reasks, [](const std::string& raw) {
                               return Parsed{parse_yes_no(raw).stance, std::nullopt};
                           }));
        reached = RecordStatus::Step1Done;

        done.push_back(ask(gateway_, prompts_.render_step2(rec), model, kTagFactExtraction,
                           Step::FactExtraction, reasks, [](const std::string& raw) {
                               auto r = parse_fact_extraction(raw);
                               return Parsed{fact_extraction_stance(r), r};
                           }));
        reached = RecordStatus::Step2Done;
        if (const auto& s = done.back().structured; s && s->has_category_conflict()) {
            out.warnings.push_back("category_conflict: VERIFIABILITY=" +
                                   std::string(s->verifiability ? "true" : "false") +
                                   " with CATEGORY=" + std::string(to_string(s->category)));
        }

        auto argue = [&](ArgumentSide side, const char* tag) {
            auto resp = gateway_.complete(ChatRequest::from_bundle(
                prompts_.render_step3_argument(rec, side), model, tag));
            return ArgumentText{resp.text, resp.usage};
        };
        out.argument_verifiable = argue(ArgumentSide::Verifiable, kTagArgueVerifiable);
        out.argument_unverifiable = argue(ArgumentSide::Unverifiable, kTagArgueUnverifiable);
        reached = RecordStatus::ArgumentsDone;

        const auto& verifiable = out.argument_verifiable.text;
        const auto& unverifiable = out.argument_unverifiable.text;
        done.push_back(ask(gateway_, prompts_.render_step3_judge(rec, verifiable, unverifiable),
                           model, kTagJudgeOrderA, Step::JudgeOrderA, reasks,
                           [](const std::string& raw) {
                               return Parsed{parse_judge(raw, ArgumentSide::Verifiable).stance,
                                             std::nullopt};
                           }));
        done.push_back(ask(gateway_, prompts_.render_step3_judge(rec, unverifiable, verifiable),
                           model, kTagJudgeOrderB, Step::JudgeOrderB, reasks,
                           [](const std::string& raw) {
                               return Parsed{parse_judge(raw, ArgumentSide::Unverifiable).stance,
                                             std::nullopt};
                           }));
    } catch (const TransportError& e) {
        throw RecordError(e.what(), reached, std::move(done));
    } catch (const CacheMissError& e) {
        throw RecordError(e.what(), reached, std::move(done));
    }

    for (const auto& v : done) {
        if (v.unparseable()) {
            out.warnings.push_back("unparseable: " + std::string(to_string(v.step)));
        }
    }
    out.annotation = aggregate(rec.record_id, std::move(done));
    return out;
}

// ------------------------------------------------------------- campaign

json CampaignSummary::to_json() const {
    json usage_j = json::object();
    for (const auto& [tag, u] : usage) usage_j[tag] = u;
    json fails = json::array();
    for (const auto& [id, err] : failures) fails.push_back({{"record_id", id}, {"error", err}});
    auto frac = [&](std::size_t k) {
        return annotated ? json(static_cast<double>(k) / static_cast<double>(annotated))
                         : json(nullptr);
    };
    return json{{"total", total},
                {"annotated", annotated},
                {"resumed", resumed},
                {"failed", failed},
                {"pending", pending},
                {"perfectly_consistent", consistent},
                {"inconsistent", inconsistent},
                {"silver_fraction", frac(consistent)},
                {"needs_review_fraction", frac(inconsistent)},
                {"unparseable_verdicts", unparseable_verdicts},
                {"category_conflicts", category_conflicts},
                {"position_inconsistency_rate",
                 position_inconsistency_rate ? json(*position_inconsistency_rate) : json(nullptr)},
                {"usage", usage_j},
                {"failures", fails}};
}

std::map<std::string, TokenUsage> usage_by_step(std::span<const AnnotatedRecord> records) {
    std::map<std::string, TokenUsage> out;
    for (const auto& r : records) {
        for (const auto& v : r.annotation.verdicts) {
            switch (v.step) {
                case Step::Direct: out[kTagDirect] += v.usage; break;
                case Step::FactExtraction: out[kTagFactExtraction] += v.usage; break;
                case Step::JudgeOrderA: out[kTagJudgeOrderA] += v.usage; break;
                case Step::JudgeOrderB: out[kTagJudgeOrderB] += v.usage; break;
            }
        }
        out[kTagArgueVerifiable] += r.argument_verifiable.usage;
        out[kTagArgueUnverifiable] += r.argument_unverifiable.usage;
    }
    return out;
}

CampaignSummary summarize(std::span<const AnnotatedRecord> records) {
    CampaignSummary s;
    s.total = records.size();
    s.annotated = records.size();
    std::vector<AggregateAnnotation> anns;
    for (const auto& r : records) {
        const auto& a = r.annotation;
        (a.tier == Tier::PerfectlyConsistent ? s.consistent : s.inconsistent)++;
        for (const auto& v : a.verdicts) {
            s.unparseable_verdicts += v.unparseable();
            if (v.structured && v.structured->has_category_conflict()) ++s.category_conflicts;
        }
        anns.push_back(a);
    }
    try {
        s.position_inconsistency_rate = position_inconsistency_rate(anns);
    } catch (const DomainError&) {
    }
    s.usage = usage_by_step(records);
    return s;
}

CampaignSummary run_campaign(std::span<const SentenceRecord> corpus, const Annotator& annotator,
                             RunStore& store, CampaignOptions options) {
    if (options.concurrency < 1) throw ConfigError("concurrency must be positive");
    auto state = store.load_state();

    std::vector<const SentenceRecord*> todo;
    std::size_t resumed = 0;
    for (const auto& rec : corpus) {
        auto it = state.find(rec.record_id);
        if (it != state.end() && it->second.status == RecordStatus::Aggregated) {
            ++resumed;
            continue;
        }
        todo.push_back(&rec);
    }
    if (options.stop_after && *options.stop_after < todo.size()) todo.resize(*options.stop_after);

    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::mutex fatal_mu;
    std::exception_ptr fatal;

    auto worker = [&] {
        while (!abort.load()) {
            std::size_t i = next++;
            if (i >= todo.size()) return;
            const auto& rec = *todo[i];
            StateLine line;
            line.record_id = rec.record_id;
            try {
                line.result = annotator.annotate(rec);
                line.status = RecordStatus::Aggregated;
            } catch (const RecordError& e) {
                line.status = RecordStatus::Failed;
                line.reached = e.reached();
                line.partial = e.partial();
                line.error = e.what();
            } catch (...) {
                std::lock_guard lock(fatal_mu);
                if (!fatal) fatal = std::current_exception();
                abort = true;
                return;
            }
            store.append_state(line);
        }
    };

    const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(options.concurrency),
                                                 std::max<std::size_t>(todo.size(), 1));
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }
    if (fatal) std::rethrow_exception(fatal);

    state = store.load_state();
    store.write_annotations(corpus, state);

    std::vector<AnnotatedRecord> done;
    CampaignSummary failures_only;
    for (const auto& rec : corpus) {
        auto it = state.find(rec.record_id);
        if (it == state.end()) continue;
        if (it->second.status == RecordStatus::Aggregated) {
            done.push_back(*it->second.result);
        } else if (it->second.status == RecordStatus::Failed) {
            failures_only.failures.emplace_back(rec.record_id, it->second.error);
        }
    }
    auto summary = summarize(done);
    summary.total = corpus.size();
    summary.resumed = resumed;
    summary.failures = std::move(failures_only.failures);
    summary.failed = summary.failures.size();
    summary.pending = summary.total - summary.annotated - summary.failed;
    return summary;
}

json run_identity(const AnnotatorOptions& options, const PromptEngine& prompts,
                  const std::string& corpus_sha256) {
    return json{{"model", options.model},
                {"max_reasks", options.max_reasks},
                {"templates_version", prompts.version()},
                {"templates_digest", prompts.digest()},
                {"corpus_sha256", corpus_sha256}};
}

std::string run_fingerprint(const json& identity) { return sha256_hex(identity.dump()); }

}  // namespace afacta
