#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "afacta/errors.hpp"
#include "afacta/dataset.hpp"
#include "builders.hpp"
#include "oracles.hpp"

using namespace afacta;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    for (const auto& l : lines) out << l << '\n';
}

std::string row(const std::string& id, const std::string& corpus, int pos, const std::string& text) {
    return json{{"record_id", id}, {"corpus_id", corpus}, {"position", pos}, {"text", text}}.dump();
}

std::set<std::string> ids(const std::vector<TierEntry>& v) {
    std::set<std::string> out;
    for (const auto& e : v) out.insert(e.record_id);
    return out;
}

std::string data_error(const fs::path& p) {
    try {
        load_corpus(p);
    } catch (const DataError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("corpus loading links neighbours within each corpus") {
    testing_support::TempDir tmp;
    auto p = tmp / "c.jsonl";
    write_lines(p, {row("b1", "B", 1, "B one"), row("a0", "A", 0, "A zero"), "",
                    row("a1", "A", 1, "A one"), row("b0", "B", 0, "B zero"),
                    row("a2", "A", 2, "A two")});
    auto recs = load_corpus(p);
    REQUIRE(recs.size() == 5);
    std::map<std::string, SentenceRecord> by_id;
    for (const auto& r : recs) by_id[r.record_id] = r;
    CHECK_FALSE(by_id["a0"].prev_text);
    CHECK(by_id["a0"].next_text == "A one");
    CHECK(by_id["a1"].prev_text == "A zero");
    CHECK(by_id["a1"].next_text == "A two");
    CHECK_FALSE(by_id["a2"].next_text);
    CHECK(by_id["b1"].prev_text == "B zero");
    CHECK(by_id["b0"].domain == Domain::PoliticalSpeech);
    CHECK(load_corpus(p, Domain::SocialMedia)[0].domain == Domain::SocialMedia);

    auto fixture = load_corpus(testing_support::fixture_dir() / "corpus.jsonl");
    CHECK(fixture.size() == 25);
}

TEST_CASE("corpus errors name the offending line") {
    testing_support::TempDir tmp;
    auto p = tmp / "c.jsonl";

    write_lines(p, {row("a", "A", 0, "x"), row("a", "A", 1, "y")});
    CHECK(data_error(p).find(":2:") != std::string::npos);
    CHECK(data_error(p).find("duplicate record_id") != std::string::npos);

    write_lines(p, {row("a", "A", 0, "x"), row("b", "A", 2, "y")});
    CHECK(data_error(p).find("gap") != std::string::npos);

    write_lines(p, {row("a", "A", 0, "x"), row("b", "A", 0, "y")});
    CHECK(data_error(p).find("repeats position") != std::string::npos);

    write_lines(p, {row("a", "A", 0, "x"), "{not json"});
    CHECK(data_error(p).find(":2:") != std::string::npos);

    write_lines(p, {row("a", "A", 0, "   ")});
    CHECK(data_error(p).find(":1:") != std::string::npos);

    write_lines(p, {R"({"record_id": "a", "corpus_id": "A", "text": "no position"})"});
    CHECK_FALSE(data_error(p).empty());

    CHECK_THROWS_AS(load_corpus(tmp / "absent.jsonl"), DataError);
}

TEST_CASE("gold and expert labels load from corpus and side files") {
    auto labels = load_corpus_labels(testing_support::fixture_dir() / "corpus.jsonl");
    CHECK(labels.gold.size() == 25);
    CHECK(labels.experts.size() == 25);
    CHECK(labels.experts.begin()->second.per_annotator.size() == 2);

    testing_support::TempDir tmp;
    write_lines(tmp / "g.jsonl", {R"({"record_id": "a", "label": 1})",
                                  R"({"record_id": "b", "gold": "NonClaim"})"});
    auto gold = load_gold_file(tmp / "g.jsonl");
    CHECK(gold["a"] == BinaryLabel::FactualClaim);
    CHECK(gold["b"] == BinaryLabel::NonClaim);
    write_lines(tmp / "dup.jsonl", {R"({"record_id": "a", "label": 1})", R"({"record_id": "a", "label": 0})"});
    CHECK_THROWS_AS(load_gold_file(tmp / "dup.jsonl"), DataError);

    write_lines(tmp / "e.jsonl", {R"({"record_id": "a", "annotator": "x", "q1": "B_Maybe", "q2": "A_LeansFact"})",
                                  R"({"record_id": "a", "annotator": "y", "q1": "C_No"})"});
    auto experts = load_experts_file(tmp / "e.jsonl");
    CHECK(project_guideline_answer(experts["a"].per_annotator["x"]) == BinaryLabel::FactualClaim);
    CHECK(project_guideline_answer(experts["a"].per_annotator["y"]) == BinaryLabel::NonClaim);

    CHECK(label_from_json(json(true)) == BinaryLabel::FactualClaim);
    CHECK_THROWS_AS(label_from_json(json(2)), DataError);
}

TEST_CASE("tier partition invariants over random annotation sets") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> size(0, 60);
    std::bernoulli_distribution resolve(0.3), coin(0.5);
    for (int round = 0; round < 500; ++round) {
        std::vector<AnnotatedRecord> annotated;
        std::map<std::string, BinaryLabel> resolutions;
        int n = size(rng);
        for (int i = 0; i < n; ++i) {
            auto id = "r" + std::to_string(i);
            annotated.push_back(build::annotated(id, i, build::random_pattern(rng, true)));
            if (resolve(rng)) resolutions[id] = build::label(coin(rng));
        }
        auto p = partition_tiers(annotated, resolutions);
        auto s = ids(p.silver), b = ids(p.bronze), g = ids(p.gold);

        CHECK(p.silver.size() + p.bronze.size() == annotated.size());
        std::vector<std::string> overlap;
        std::set_intersection(s.begin(), s.end(), b.begin(), b.end(), std::back_inserter(overlap));
        CHECK(overlap.empty());

        for (const auto& a : annotated) {
            const auto& id = a.record.record_id;
            bool consistent = a.annotation.tier == Tier::PerfectlyConsistent;
            CHECK(s.count(id) == (consistent ? 1u : 0u));
            CHECK(g.count(id) == ((consistent || resolutions.count(id)) ? 1u : 0u));
        }
        for (const auto& e : p.gold) {
            if (auto it = resolutions.find(e.record_id); it != resolutions.end()) {
                CHECK(e.label == it->second);
                CHECK(e.human_resolved);
            } else {
                CHECK_FALSE(e.human_resolved);
            }
        }
        for (const auto& e : p.bronze_exportable()) CHECK_FALSE(resolutions.count(e.record_id));

        auto rows = training_rows(p, {TrainingTier::Gold, TrainingTier::Silver, TrainingTier::Bronze},
                                  42);
        std::set<std::string> row_ids;
        for (const auto& r : rows) {
            CHECK(row_ids.insert(r.record_id).second);
            if (resolutions.count(r.record_id)) CHECK(r.tier == TrainingTier::Gold);
        }
        CHECK(row_ids.size() == annotated.size());
    }
    std::vector<AnnotatedRecord> one{build::annotated("x", 0, {true, true, true, true})};
    CHECK_THROWS_AS(partition_tiers(one, {{"ghost", BinaryLabel::NonClaim}}), DataError);
}

TEST_CASE("training export formats and seed determinism") {
    std::vector<AnnotatedRecord> annotated;
    for (int i = 0; i < 20; ++i) {
        bool pos = i % 2;
        annotated.push_back(build::annotated("r" + std::to_string(i), i,
                                             i < 12 ? oracle::Pattern{pos, pos, pos, pos}
                                                    : oracle::Pattern{true, false, true, false}));
    }
    annotated[3].record.text = "Quote \"this\", please";
    auto p = partition_tiers(annotated, {{"r15", BinaryLabel::FactualClaim}});

    testing_support::TempDir tmp;
    auto n = export_training(p, {TrainingTier::Gold, TrainingTier::Silver}, tmp / "a.csv",
                             ExportFormat::Csv, 42);
    CHECK(n == 13);
    auto csv = testing_support::slurp(tmp / "a.csv");
    CHECK(csv.rfind("text,label,tier\n", 0) == 0);
    CHECK(csv.find("\"Quote \"\"this\"\", please\"") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 14);

    export_training(p, {TrainingTier::Gold, TrainingTier::Silver}, tmp / "b.csv", ExportFormat::Csv, 42);
    CHECK(testing_support::slurp(tmp / "b.csv") == csv);
    export_training(p, {TrainingTier::Gold, TrainingTier::Silver}, tmp / "c.csv", ExportFormat::Csv, 7);
    CHECK(testing_support::slurp(tmp / "c.csv") != csv);

    auto m = export_training(p, {TrainingTier::Bronze}, tmp / "d.jsonl", ExportFormat::Jsonl, 1);
    CHECK(m == 7);
    std::ifstream in(tmp / "d.jsonl");
    std::string line;
    while (std::getline(in, line)) {
        auto j = json::parse(line);
        CHECK(j["tier"] == "bronze");
        CHECK(j.contains("text"));
        CHECK((j["label"] == 0 || j["label"] == 1));
    }
    CHECK_THROWS_AS(export_training(p, {}, tmp / "e.csv", ExportFormat::Csv, 1), ValidationError);
    CHECK(parse_training_tier("silver") == TrainingTier::Silver);
    CHECK_THROWS_AS(parse_training_tier("platinum"), ValidationError);
}

TEST_CASE("resolution log round-trips and the last resolve wins") {
    testing_support::TempDir tmp;
    auto p = tmp / "res.jsonl";
    CHECK(read_resolutions(p).empty());
    ResolutionEvent label{ResolutionEvent::Kind::Label, "r1", "ann", {Q1Answer::A_Yes, {}},
                          BinaryLabel::FactualClaim, "t0", false};
    auto resolve = label;
    resolve.kind = ResolutionEvent::Kind::Resolve;
    auto redo = resolve;
    redo.answer = {Q1Answer::B_Maybe, Q2Answer::B_LeansOpinion};
    redo.label = BinaryLabel::NonClaim;
    redo.supersede = true;
    append_resolution(p, label);
    append_resolution(p, resolve);
    append_resolution(p, redo);
    {
        std::ofstream out(p, std::ios::app);
        out << "{\"type\": \"resolve\", \"record";
    }
    auto events = read_resolutions(p);
    REQUIRE(events.size() == 3);
    CHECK(events[2].answer == redo.answer);
    CHECK(events[2].supersede);
    auto eff = effective_resolutions(events);
    CHECK(eff.size() == 1);
    CHECK(eff["r1"] == BinaryLabel::NonClaim);
}

TEST_CASE("run store: last state wins, torn lines ignored, fingerprint guarded") {
    testing_support::TempDir tmp;
    RunStore store(tmp / "run");
    store.init(json{{"model", "m"}}, "fp1");
    CHECK_NOTHROW(RunStore(tmp / "run").init(json{{"model", "m"}}, "fp1"));
    CHECK_THROWS_AS(RunStore(tmp / "run").init(json{{"model", "x"}}, "fp2"), ConfigError);

    auto rec = build::annotated("r0", 0, {true, true, true, true});
    StateLine failed;
    failed.record_id = "r0";
    failed.status = RecordStatus::Failed;
    failed.reached = RecordStatus::Step1Done;
    failed.partial = {build::verdict(Step::Direct, true)};
    failed.error = "boom";
    store.append_state(failed);
    StateLine done{"r0", RecordStatus::Aggregated, rec, {}, {}, {}};
    store.append_state(done);
    StateLine other = failed;
    other.record_id = "r1";
    store.append_state(other);
    {
        std::ofstream out(store.paths().state(), std::ios::app);
        out << R"({"record_id": "r1", "status": "Aggreg)";
    }
    auto state = store.load_state();
    REQUIRE(state.size() == 2);
    CHECK(state["r0"].status == RecordStatus::Aggregated);
    CHECK(state["r0"].result->annotation.label == BinaryLabel::FactualClaim);
    CHECK(state["r1"].status == RecordStatus::Failed);
    CHECK(state["r1"].reached == RecordStatus::Step1Done);
    CHECK(state["r1"].partial.size() == 1);
    CHECK(state["r1"].error == "boom");

    std::vector<SentenceRecord> order{rec.record, build::sentence("r1", 1, "other")};
    store.write_annotations(order, state);
    auto back = read_annotations(store.paths().annotations());
    REQUIRE(back.size() == 1);
    CHECK(back[0].record.record_id == "r0");
    CHECK(json(back[0]) == json(rec));
}
