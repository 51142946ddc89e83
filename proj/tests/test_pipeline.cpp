#include <doctest.h>

#include <set>

#include "afacta/aggregate.hpp"
#include "afacta/errors.hpp"
#include "afacta/gateway.hpp"
#include "afacta/pipeline.hpp"
#include "afacta/prompts.hpp"
#include "builders.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"

using namespace afacta;
using testing_support::slurp;

namespace {

const PromptEngine& prompts() {
    static const PromptEngine engine;
    return engine;
}

CampaignSummary run_scripted(const std::shared_ptr<ChatBackend>& backend, std::size_t n,
                             const std::filesystem::path& dir, int max_reasks = 1,
                             int concurrency = 1, bool linked = true) {
    Gateway gw(backend, 4);
    AnnotatorOptions opts;
    opts.max_reasks = max_reasks;
    Annotator annotator(gw, prompts(), opts);
    RunStore store(dir);
    auto corpus = scenario::synthetic_corpus(n, linked);
    return run_campaign(corpus, annotator, store, CampaignOptions{concurrency, std::nullopt});
}

}  // namespace

TEST_CASE("fixture replay is byte-identical across runs, concurrency and resume") {
    testing_support::TempDir tmp;
    auto first = scenario::replay_fixture(tmp / "a");
    CHECK(first.summary.complete());
    CHECK(first.summary.annotated == 25);
    auto reference = slurp(tmp / "a" / "annotations.jsonl");
    CHECK_FALSE(reference.empty());

    for (const char* name : {"b", "c"}) {
        scenario::replay_fixture(tmp / name);
        CHECK(slurp(tmp / name / "annotations.jsonl") == reference);
    }
    scenario::replay_fixture(tmp / "d", 1, CampaignOptions{4, std::nullopt});
    CHECK(slurp(tmp / "d" / "annotations.jsonl") == reference);

    auto part = scenario::replay_fixture(tmp / "e", 1, CampaignOptions{1, 9});
    CHECK(part.summary.annotated == 9);
    CHECK(part.summary.pending == 16);
    CHECK_FALSE(part.summary.complete());
    auto rest = scenario::replay_fixture(tmp / "e");
    CHECK(rest.summary.resumed == 9);
    CHECK(rest.summary.annotated == 25);
    CHECK(rest.calls < first.calls);
    CHECK(slurp(tmp / "e" / "annotations.jsonl") == reference);

    auto again = scenario::replay_fixture(tmp / "e");
    CHECK(again.calls == 0);
    CHECK(again.summary.resumed == 25);
}

TEST_CASE("fixture campaign counts") {
    testing_support::TempDir tmp;
    auto no_reask = scenario::replay_fixture(tmp / "a", 0);
    CHECK(no_reask.calls == 150);
    CHECK(no_reask.summary.unparseable_verdicts == 4);
    auto with_reask = scenario::replay_fixture(tmp / "b", 1);
    CHECK(with_reask.calls == 154);
    CHECK(with_reask.summary.unparseable_verdicts == 1);
    CHECK(with_reask.summary.category_conflicts == 1);
    CHECK(with_reask.summary.consistent + with_reask.summary.inconsistent == 25);
}

TEST_CASE("the call plan issues exactly six completions per record") {
    testing_support::TempDir tmp;
    auto backend = scenario::fixed_backend("Yes", scenario::fact_json(true, "C2"), "Lean towards A",
                                           "Lean towards B");
    auto summary = run_scripted(backend, 12, tmp.path(), 1, 3);
    CHECK(summary.annotated == 12);
    CHECK(backend->call_count() == 72);
    std::map<std::string, int> per_tag;
    std::set<std::string> hashes;
    for (const auto& c : backend->calls()) {
        ++per_tag[c.tag];
        hashes.insert(c.hash());
        CHECK(c.decode.temperature == 0.0);
        CHECK(c.decode.seed == 42);
    }
    CHECK(hashes.size() == 72);
    CHECK(per_tag.size() == 6);
    for (const auto& [tag, n] : per_tag) CHECK(n == 12);
    for (const auto& [tag, u] : summary.usage) CHECK(per_tag.count(tag));
}

TEST_CASE("judge order B sees the arguments swapped") {
    auto backend = scenario::fixed_backend("Yes", scenario::fact_json(true, "C2"), "Lean towards A",
                                           "Lean towards B");
    Gateway gw(backend, 1);
    Annotator annotator(gw, prompts());
    annotator.annotate(scenario::synthetic_corpus(1)[0]);
    std::string a, b;
    for (const auto& c : backend->calls()) {
        if (c.tag == std::string(kTagJudgeOrderA)) a = c.user;
        if (c.tag == std::string(kTagJudgeOrderB)) b = c.user;
    }
    CHECK(a.find("Assistant A's View: \"It is checkable.\"") != std::string::npos);
    CHECK(b.find("Assistant A's View: \"It is opinion.\"") != std::string::npos);
}

TEST_CASE("re-asks add one call per parse failure and use a salted request") {
    auto make = [] {
        auto b = std::make_shared<ScriptedBackend>();
        b->add_rule(ScriptedBackend::tag_is(kTagDirect), {"Hmm, hard to say.", "Yes"});
        b->add_rule(ScriptedBackend::tag_is(kTagFactExtraction), {scenario::fact_json(true, "C1")}, true);
        b->add_rule(ScriptedBackend::any(), {"Lean towards A"}, true);
        return b;
    };
    auto rec = scenario::synthetic_corpus(1)[0];

    auto b1 = make();
    Gateway g1(b1, 1);
    auto r1 = Annotator(g1, prompts(), AnnotatorOptions{"m", 1}).annotate(rec);
    CHECK(b1->call_count() == 7);
    auto calls = b1->calls();
    CHECK(calls[0].salt.empty());
    CHECK(calls[1].salt.at("reask") == "1");
    CHECK(calls[1].decode.temperature == 0.0);
    CHECK(calls[0].hash() != calls[1].hash());
    CHECK(r1.annotation.verdict(Step::Direct).stance == BinaryLabel::FactualClaim);
    CHECK_FALSE(r1.annotation.provisional);

    auto b0 = make();
    Gateway g0(b0, 1);
    auto r0 = Annotator(g0, prompts(), AnnotatorOptions{"m", 0}).annotate(rec);
    CHECK(b0->call_count() == 6);
    CHECK(r0.annotation.verdict(Step::Direct).unparseable());
    CHECK(r0.annotation.provisional);
    CHECK(r0.annotation.tier == Tier::Inconsistent);
    CHECK(std::find(r0.warnings.begin(), r0.warnings.end(), "unparseable: Direct") != r0.warnings.end());
}

TEST_CASE("a judge that always picks slot A is fully position-inconsistent") {
    testing_support::TempDir tmp;
    auto backend = scenario::fixed_backend("Yes", scenario::fact_json(true, "C2"), "Lean towards A",
                                           "Lean towards A");
    auto s = run_scripted(backend, 10, tmp.path());
    REQUIRE(s.position_inconsistency_rate);
    CHECK(*s.position_inconsistency_rate == 1.0);
    CHECK(s.consistent == 0);
    CHECK(s.inconsistent == 10);
}

TEST_CASE("unanimous positive replies are all perfectly consistent claims") {
    testing_support::TempDir tmp;
    auto backend = scenario::fixed_backend("Yes", scenario::fact_json(true, "C3"), "Lean towards A",
                                           "Lean towards B");
    auto s = run_scripted(backend, 10, tmp.path());
    CHECK(s.consistent == 10);
    CHECK(*s.position_inconsistency_rate == 0.0);
    for (const auto& a : read_annotations(tmp / "annotations.jsonl")) {
        CHECK(a.annotation.label == BinaryLabel::FactualClaim);
        CHECK(a.annotation.vote_total == HalfVotes{6});
    }
}

TEST_CASE("category conflicts are kept as warnings") {
    auto backend = scenario::fixed_backend("No", scenario::fact_json(true, "C0"), "Lean towards B",
                                           "Lean towards A");
    Gateway gw(backend, 1);
    auto r = Annotator(gw, prompts()).annotate(scenario::synthetic_corpus(1)[0]);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].rfind("category_conflict:", 0) == 0);
    CHECK(r.annotation.verdict(Step::FactExtraction).stance == BinaryLabel::FactualClaim);
}

TEST_CASE("transport failures mark the record failed and the campaign continues") {
    class Flaky : public ChatBackend {
    public:
        explicit Flaky(std::shared_ptr<ScriptedBackend> inner) : inner_(std::move(inner)) {}
        ChatResponse complete(const ChatRequest& req) override {
            if (broken && req.user.find("number 3 ") != std::string::npos &&
                req.tag == std::string(kTagArgueVerifiable)) {
                throw TransportError("connection reset");
            }
            return inner_->complete(req);
        }
        bool broken = true;

    private:
        std::shared_ptr<ScriptedBackend> inner_;
    };
    testing_support::TempDir tmp;
    auto flaky = std::make_shared<Flaky>(scenario::fixed_backend(
        "Yes", scenario::fact_json(true, "C2"), "Lean towards A", "Lean towards B"));
    // Unlinked, so only record s3 has its own text in the prompt.
    auto s = run_scripted(flaky, 6, tmp.path(), 1, 1, false);
    CHECK(s.failed == 1);
    CHECK(s.annotated == 5);
    CHECK_FALSE(s.complete());
    REQUIRE(s.failures.size() == 1);
    CHECK(s.failures[0].first == "s3");
    auto state = RunStore(tmp.path()).load_state();
    CHECK(state["s3"].status == RecordStatus::Failed);
    CHECK(state["s3"].reached == RecordStatus::Step2Done);
    CHECK(state["s3"].partial.size() == 2);
    CHECK(read_annotations(tmp / "annotations.jsonl").size() == 5);

    flaky->broken = false;
    auto retry = run_scripted(flaky, 6, tmp.path(), 1, 1, false);
    CHECK(retry.complete());
    CHECK(retry.resumed == 5);
    CHECK(retry.annotated == 6);
}

TEST_CASE("replay misses surface as record failures") {
    testing_support::TempDir tmp;
    auto gw = scenario::fixture_gateway();
    Annotator annotator(*gw, prompts());
    RunStore store(tmp.path());
    auto corpus = scenario::synthetic_corpus(2);
    auto s = run_campaign(corpus, annotator, store);
    CHECK(s.failed == 2);
    CHECK(s.failures[0].second.find("replay cache has no response") != std::string::npos);
}

TEST_CASE("run identity changes with settings and templates") {
    AnnotatorOptions a;
    auto base = run_fingerprint(run_identity(a, prompts(), "abc"));
    CHECK(base == run_fingerprint(run_identity(a, prompts(), "abc")));
    CHECK(base != run_fingerprint(run_identity(a, prompts(), "abd")));
    auto b = a;
    b.model = "other";
    CHECK(base != run_fingerprint(run_identity(b, prompts(), "abc")));
    auto c = a;
    c.max_reasks = 0;
    CHECK(base != run_fingerprint(run_identity(c, prompts(), "abc")));

    testing_support::TempDir tmp;
    scenario::replay_fixture(tmp.path(), 1);
    CHECK_THROWS_AS(scenario::replay_fixture(tmp.path(), 0), ConfigError);
}

TEST_CASE("summary JSON carries the headline fractions") {
    std::vector<AnnotatedRecord> recs{build::annotated("a", 0, {true, true, true, true}),
                                      build::annotated("b", 1, {true, false, true, false}),
                                      build::annotated("c", 2, {false, false, false, false}),
                                      build::annotated("d", 3, {true, std::nullopt, true, true})};
    auto s = summarize(recs);
    CHECK(s.consistent == 2);
    CHECK(s.inconsistent == 2);
    CHECK(s.unparseable_verdicts == 1);
    auto j = s.to_json();
    CHECK(j["silver_fraction"] == doctest::Approx(0.5));
    CHECK(j["needs_review_fraction"] == doctest::Approx(0.5));
    CHECK(*s.position_inconsistency_rate == doctest::Approx(1.0 / 4.0));
}
