#pragma once

// Campaign set-ups shared by the pipeline tests and the acceptance binary.

#include <memory>
#include <string>
#include <vector>

#include "afacta/dataset.hpp"
#include "afacta/gateway.hpp"
#include "afacta/pipeline.hpp"
#include "afacta/prompts.hpp"
#include "oracles.hpp"

namespace scenario {

inline std::vector<afacta::SentenceRecord> fixture_corpus() {
    return afacta::load_corpus(testing_support::fixture_dir() / "corpus.jsonl");
}

inline std::shared_ptr<afacta::Gateway> fixture_gateway(int concurrency = 1) {
    auto cache = std::make_shared<afacta::ResponseCache>(testing_support::fixture_dir() / "cache.jsonl");
    return std::make_shared<afacta::Gateway>(std::make_shared<afacta::ReplayBackend>(cache),
                                             concurrency);
}

struct FixtureRun {
    afacta::CampaignSummary summary;
    std::size_t calls = 0;
};

// Replays the shipped fixture into dir.
inline FixtureRun replay_fixture(const std::filesystem::path& dir, int max_reasks = 1,
                                 afacta::CampaignOptions campaign = {}) {
    static const afacta::PromptEngine prompts;
    auto corpus = fixture_corpus();
    auto gateway = fixture_gateway(std::max(1, campaign.concurrency));
    afacta::AnnotatorOptions opts;
    opts.max_reasks = max_reasks;
    afacta::Annotator annotator(*gateway, prompts, opts);
    afacta::RunStore store(dir);
    auto identity = afacta::run_identity(opts, prompts, "fixture");
    store.init(identity, afacta::run_fingerprint(identity));
    FixtureRun out;
    out.summary = afacta::run_campaign(corpus, annotator, store, campaign);
    out.calls = gateway->call_count();
    return out;
}

inline std::string fact_json(bool verifiable, const std::string& category) {
    return std::string(R"({"ANALYSIS": "a", "FACT_PART": "f", "VERIFIABLE_REASON": "r", "VERIFIABILITY": )") +
           (verifiable ? "true" : "false") + R"(, "CATEGORY": ")" + category + "\"}";
}

// Fixed replies per call-plan tag, repeated forever.
inline std::shared_ptr<afacta::ScriptedBackend> fixed_backend(const std::string& direct,
                                                              const std::string& fact,
                                                              const std::string& judge_a,
                                                              const std::string& judge_b) {
    using afacta::ScriptedBackend;
    auto b = std::make_shared<ScriptedBackend>();
    b->add_rule(ScriptedBackend::tag_is(afacta::kTagDirect), {direct}, true);
    b->add_rule(ScriptedBackend::tag_is(afacta::kTagFactExtraction), {fact}, true);
    b->add_rule(ScriptedBackend::tag_is(afacta::kTagArgueVerifiable), {"It is checkable."}, true);
    b->add_rule(ScriptedBackend::tag_is(afacta::kTagArgueUnverifiable), {"It is opinion."}, true);
    b->add_rule(ScriptedBackend::tag_is(afacta::kTagJudgeOrderA), {judge_a}, true);
    b->add_rule(ScriptedBackend::tag_is(afacta::kTagJudgeOrderB), {judge_b}, true);
    return b;
}

inline std::vector<afacta::SentenceRecord> synthetic_corpus(std::size_t n, bool linked = true) {
    std::vector<afacta::SentenceRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        afacta::SentenceRecord r;
        r.record_id = "s" + std::to_string(i);
        r.corpus_id = "synthetic";
        r.position = i;
        r.text = "Sentence number " + std::to_string(i) + " about the budget.";
        out.push_back(r);
    }
    for (std::size_t i = 0; linked && i < n; ++i) {
        if (i > 0) out[i].prev_text = out[i - 1].text;
        if (i + 1 < n) out[i].next_text = out[i + 1].text;
    }
    return out;
}

}  // namespace scenario
