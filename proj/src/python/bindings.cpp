#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "afacta/aggregate.hpp"
#include "afacta/dataset.hpp"
#include "afacta/errors.hpp"
#include "afacta/gateway.hpp"
#include "afacta/hash.hpp"
#include "afacta/json_io.hpp"
#include "afacta/metrics.hpp"
#include "afacta/parser.hpp"
#include "afacta/pipeline.hpp"
#include "afacta/prompts.hpp"
#include "afacta/sc_cot.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::object& o) {
    return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

std::vector<afacta::BinaryLabel> labels(const std::vector<int>& v) {
    std::vector<afacta::BinaryLabel> out;
    out.reserve(v.size());
    for (int x : v) {
        if (x != 0 && x != 1) throw afacta::ValidationError("labels must be 0 or 1");
        out.push_back(x ? afacta::BinaryLabel::FactualClaim : afacta::BinaryLabel::NonClaim);
    }
    return out;
}

py::dict outcome(const afacta::ParseOutcome& o) {
    py::dict d;
    d["stance"] = std::string(to_string(o.stance));
    d["confidence"] = std::string(to_string(o.confidence));
    return d;
}

afacta::SentenceRecord record_from(const py::object& o) {
    auto j = from_py(o);
    if (!j.contains("corpus_id")) j["corpus_id"] = "python";
    if (!j.contains("position")) j["position"] = 0;
    if (!j.contains("record_id")) j["record_id"] = "r0";
    auto rec = j.get<afacta::SentenceRecord>();
    rec.validate();
    return rec;
}

py::dict bundle(const afacta::PromptBundle& b) {
    py::dict d;
    d["system"] = b.system;
    d["user"] = b.user;
    d["temperature"] = b.decode.temperature;
    d["top_p"] = b.decode.top_p;
    d["max_tokens"] = b.decode.max_tokens;
    d["seed"] = b.decode.seed ? py::object(py::int_(*b.decode.seed)) : py::object(py::none());
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Factual-claim annotation pipeline core";

    auto base = py::register_exception<afacta::Error>(m, "Error");
    py::register_exception<afacta::ParseError>(m, "ParseError", base.ptr());
    py::register_exception<afacta::ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<afacta::ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<afacta::DataError>(m, "DataError", base.ptr());
    py::register_exception<afacta::DomainError>(m, "DomainError", base.ptr());
    py::register_exception<afacta::TransportError>(m, "TransportError", base.ptr());
    py::register_exception<afacta::CacheMissError>(m, "CacheMissError", base.ptr());

    m.def("parse_yes_no", [](const std::string& s) { return outcome(afacta::parse_yes_no(s)); },
          py::arg("reply"));
    m.def("parse_sc_cot", [](const std::string& s) { return outcome(afacta::parse_sc_cot(s)); },
          py::arg("reply"));
    m.def(
        "parse_judge",
        [](const std::string& s, bool verifiable_in_a) {
            return outcome(afacta::parse_judge(
                s, verifiable_in_a ? afacta::ArgumentSide::Verifiable : afacta::ArgumentSide::Unverifiable));
        },
        py::arg("reply"), py::arg("verifiable_in_a") = true);
    m.def(
        "parse_fact_extraction",
        [](const std::string& s) {
            auto r = afacta::parse_fact_extraction(s);
            auto d = to_py(json(r)).cast<py::dict>();
            d["stance"] = std::string(to_string(afacta::fact_extraction_stance(r)));
            d["category_conflict"] = r.has_category_conflict();
            return d;
        },
        py::arg("reply"));

    m.def(
        "aggregate",
        [](const std::vector<std::optional<bool>>& stances) {
            if (stances.size() != 4) {
                throw afacta::ValidationError("expected four stances: direct, fact extraction, judge A, judge B");
            }
            std::vector<afacta::StepVerdict> verdicts;
            for (std::size_t i = 0; i < 4; ++i) {
                std::optional<afacta::BinaryLabel> s;
                if (stances[i]) {
                    s = *stances[i] ? afacta::BinaryLabel::FactualClaim : afacta::BinaryLabel::NonClaim;
                }
                std::optional<afacta::FactExtractionRecord> structured;
                if (afacta::kAllSteps[i] == afacta::Step::FactExtraction && stances[i]) {
                    structured = afacta::FactExtractionRecord{};
                    structured->verifiability = *stances[i];
                    structured->category = *stances[i] ? afacta::Category::C1 : afacta::Category::C0;
                }
                verdicts.push_back(afacta::make_verdict(afacta::kAllSteps[i], s, "", structured));
            }
            auto a = afacta::aggregate("python", std::move(verdicts));
            py::dict d;
            d["vote_total"] = a.vote_total.votes();
            d["label"] = std::string(to_string(a.label));
            d["tier"] = std::string(to_string(a.tier));
            d["provisional"] = a.provisional;
            return d;
        },
        py::arg("stances"),
        "Stances in call-plan order (direct, fact extraction, judge A, judge B); None is unparseable.");

    m.def("cohen_kappa",
          [](const std::vector<int>& a, const std::vector<int>& b) {
              return afacta::cohen_kappa(labels(a), labels(b));
          },
          py::arg("a"), py::arg("b"));
    m.def("accuracy",
          [](const std::vector<int>& gold, const std::vector<int>& pred) {
              return afacta::accuracy(labels(gold), labels(pred));
          },
          py::arg("gold"), py::arg("pred"));
    m.def(
        "fisher_aggregate",
        [](const std::vector<double>& ps) {
            auto r = afacta::fisher_aggregate(ps);
            return py::make_tuple(r.statistic, r.p_value);
        },
        py::arg("p_values"));
    m.def("two_sample_t",
          [](const std::vector<double>& x, const std::vector<double>& y) { return afacta::two_sample_t(x, y); },
          py::arg("xs"), py::arg("ys"));
    m.def(
        "majority_vote",
        [](const std::vector<bool>& stances) -> py::object {
            std::vector<afacta::BinaryLabel> v;
            for (bool s : stances) v.push_back(s ? afacta::BinaryLabel::FactualClaim : afacta::BinaryLabel::NonClaim);
            auto r = afacta::majority_vote(v);
            if (!r) return py::none();
            return py::make_tuple(std::string(to_string(r->label)), r->level);
        },
        py::arg("stances"));

    m.def("sha256_hex", [](const std::string& s) { return afacta::sha256_hex(s); }, py::arg("data"));

    m.def(
        "render_prompts",
        [](const py::object& record, std::optional<std::filesystem::path> templates) {
            auto rec = record_from(record);
            auto engine = templates ? afacta::PromptEngine(*templates) : afacta::PromptEngine();
            py::dict d;
            d["direct"] = bundle(engine.render_step1(rec));
            d["fact_extraction"] = bundle(engine.render_step2(rec));
            d["argue_verifiable"] = bundle(engine.render_step3_argument(rec, afacta::ArgumentSide::Verifiable));
            d["argue_unverifiable"] =
                bundle(engine.render_step3_argument(rec, afacta::ArgumentSide::Unverifiable));
            d["sc_cot"] = bundle(engine.render_sc_cot(rec));
            return d;
        },
        py::arg("record"), py::arg("templates") = py::none(),
        "Prompts for one record given as a dict with at least 'text' (and optionally domain, prev_text, next_text).");

    m.def(
        "annotate_replay",
        [](const std::filesystem::path& corpus_path, const std::filesystem::path& cache_path,
           const std::filesystem::path& out_dir, int max_reasks, int concurrency,
           std::optional<std::size_t> stop_after) {
            auto corpus = afacta::load_corpus(corpus_path);
            afacta::BackendConfig cfg;
            cfg.kind = afacta::BackendKind::Replay;
            cfg.cache_path = cache_path;
            cfg.max_concurrency = concurrency;
            auto gateway = afacta::Gateway::from_config(cfg);
            afacta::PromptEngine prompts;
            afacta::AnnotatorOptions opts;
            opts.max_reasks = max_reasks;
            afacta::Annotator annotator(*gateway, prompts, opts);
            afacta::RunStore store(out_dir);
            auto identity = afacta::run_identity(opts, prompts, "python:" + corpus_path.filename().string());
            store.init(identity, afacta::run_fingerprint(identity));
            afacta::CampaignSummary summary;
            {
                py::gil_scoped_release release;
                summary = afacta::run_campaign(corpus, annotator, store,
                                               afacta::CampaignOptions{concurrency, stop_after});
            }
            auto j = summary.to_json();
            j["completions_issued"] = gateway->call_count();
            return to_py(j);
        },
        py::arg("corpus"), py::arg("cache"), py::arg("out_dir"), py::arg("max_reasks") = 1,
        py::arg("concurrency") = 1, py::arg("stop_after") = py::none(),
        "Annotate a corpus from a recorded response cache; returns the campaign summary.");

    m.def(
        "read_annotations",
        [](const std::filesystem::path& p) {
            json arr = json::array();
            for (const auto& a : afacta::read_annotations(p)) arr.push_back(a);
            return to_py(arr);
        },
        py::arg("path"));

    m.def(
        "split_tiers",
        [](const std::filesystem::path& annotations, std::optional<std::filesystem::path> resolutions) {
            auto annotated = afacta::read_annotations(annotations);
            std::map<std::string, afacta::BinaryLabel> res;
            if (resolutions) {
                auto events = afacta::read_resolutions(*resolutions);
                res = afacta::effective_resolutions(events);
            }
            auto p = afacta::partition_tiers(annotated, res);
            auto ids = [](const std::vector<afacta::TierEntry>& v) {
                std::vector<std::string> out;
                for (const auto& e : v) out.push_back(e.record_id);
                return out;
            };
            py::dict d;
            d["gold"] = ids(p.gold);
            d["silver"] = ids(p.silver);
            d["bronze"] = ids(p.bronze);
            return d;
        },
        py::arg("annotations"), py::arg("resolutions") = py::none());
}
