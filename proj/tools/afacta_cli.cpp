// afacta: command-line driver for annotation campaigns, the SC-CoT
// baseline, evaluation, tier splitting, export and the review service.
//
// Exit codes: 0 ok, 1 configuration, 2 data, 3 transport.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "afacta/dataset.hpp"
#include "afacta/errors.hpp"
#include "afacta/gateway.hpp"
#include "afacta/hash.hpp"
#include "afacta/json_io.hpp"
#include "afacta/metrics.hpp"
#include "afacta/pipeline.hpp"
#include "afacta/prompts.hpp"
#include "afacta/review.hpp"
#include "afacta/sc_cot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace afacta;

namespace {

enum Exit { kOk = 0, kConfig = 1, kData = 2, kTransport = 3 };

struct BackendFlags {
    std::string backend = "replay";
    std::string model = "gpt-4-0613";
    std::string cache;
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    std::string script;
    std::string templates;
    bool record = false;
    bool replay = false;
    int concurrency = 4;
    int max_attempts = 5;
    int timeout_s = 60;
};

void add_backend_flags(CLI::App* cmd, BackendFlags& f) {
    cmd->add_option("--backend", f.backend, "http, replay or scripted")
        ->check(CLI::IsMember({"http", "replay", "scripted"}));
    cmd->add_option("--model", f.model, "Model name sent with every request");
    cmd->add_option("--cache", f.cache, "Response cache (JSONL)");
    cmd->add_option("--endpoint", f.endpoint, "Chat-completions URL for --backend http");
    cmd->add_option("--api-key-env", f.api_key_env, "Environment variable holding the API key");
    cmd->add_option("--script", f.script, "Script file for --backend scripted");
    cmd->add_option("--templates", f.templates, "Template root overriding the built-in set");
    cmd->add_flag("--record", f.record, "With --backend http, store every response in the cache");
    cmd->add_flag("--replay", f.replay, "Shorthand for --backend replay");
    cmd->add_option("--concurrency", f.concurrency, "Parallel requests / records")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-attempts", f.max_attempts, "HTTP attempts per request")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--timeout", f.timeout_s, "HTTP timeout in seconds")->check(CLI::PositiveNumber);
}

BackendConfig backend_config(const BackendFlags& f, const fs::path& default_cache) {
    BackendConfig c;
    c.kind = parse_backend_kind(f.replay ? "replay" : f.backend);
    c.max_concurrency = f.concurrency;
    c.record = f.record;
    c.retry.max_attempts = f.max_attempts;
    c.timeout = std::chrono::seconds(f.timeout_s);
    if (!f.cache.empty()) {
        c.cache_path = f.cache;
    } else if (!default_cache.empty()) {
        c.cache_path = default_cache;
    }
    if (c.kind == BackendKind::HttpChatCompletion) {
        c.endpoint_url = f.endpoint;
        if (!f.api_key_env.empty()) c.api_key_env = f.api_key_env;
    }
    if (!f.script.empty()) c.script_path = f.script;
    return c;
}

PromptEngine make_prompts(const BackendFlags& f) {
    return f.templates.empty() ? PromptEngine() : PromptEngine(fs::path(f.templates));
}

std::string file_sha256(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + p.string());
    out << text;
}

std::string fmt_pct(double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * v << '%';
    return s.str();
}

void print_usage_table(std::ostream& os, const std::map<std::string, TokenUsage>& usage) {
    TokenUsage total;
    os << std::left << std::setw(22) << "tag" << std::right << std::setw(14) << "prompt"
       << std::setw(14) << "completion" << std::setw(14) << "total" << '\n';
    for (const auto& [tag, u] : usage) {
        os << std::left << std::setw(22) << tag << std::right << std::setw(14) << u.prompt_tokens
           << std::setw(14) << u.completion_tokens << std::setw(14) << u.total() << '\n';
        total += u;
    }
    os << std::left << std::setw(22) << "all" << std::right << std::setw(14) << total.prompt_tokens
       << std::setw(14) << total.completion_tokens << std::setw(14) << total.total() << '\n';
}

fs::path resolutions_beside(const std::string& explicit_path, const fs::path& annotations) {
    if (!explicit_path.empty()) return explicit_path;
    return annotations.parent_path() / "resolutions.jsonl";
}

std::map<std::string, BinaryLabel> load_resolutions(const fs::path& p) {
    auto events = read_resolutions(p);
    return effective_resolutions(events);
}

json tier_entry_json(const TierEntry& e) {
    return json{{"record_id", e.record_id},
                {"text", e.text},
                {"label", std::string(to_string(e.label))},
                {"human_resolved", e.human_resolved}};
}

std::set<TrainingTier> parse_tiers(const std::vector<std::string>& names) {
    std::set<TrainingTier> out;
    for (const auto& n : names) out.insert(parse_training_tier(n));
    return out;
}

// ----------------------------------------------------------- subcommands

struct AnnotateArgs {
    std::string corpus;
    std::string out;
    std::string domain = "PoliticalSpeech";
    int max_reasks = 1;
    std::size_t stop_after = 0;
};

int cmd_annotate(const AnnotateArgs& a, const BackendFlags& bf) {
    const auto domain = parse_domain(a.domain);
    RunStore store(a.out);
    auto cfg = backend_config(bf, store.paths().cache());
    // Backend problems surface here, before any record is touched.
    auto gateway = Gateway::from_config(cfg);
    auto prompts = make_prompts(bf);
    auto corpus = load_corpus(a.corpus, domain);

    AnnotatorOptions opts{bf.model, a.max_reasks};
    auto identity = run_identity(opts, prompts, file_sha256(a.corpus));
    const auto fp = run_fingerprint(identity);
    json config{{"identity", identity},
                {"fingerprint", fp},
                {"backend", std::string(to_string(cfg.kind))},
                {"corpus", a.corpus},
                {"domain", a.domain}};
    store.init(config, fp);

    Annotator annotator(*gateway, prompts, opts);
    CampaignOptions copts;
    copts.concurrency = bf.concurrency;
    if (a.stop_after) copts.stop_after = a.stop_after;
    auto summary = run_campaign(corpus, annotator, store, copts);

    auto sj = summary.to_json();
    sj["completions_issued"] = gateway->call_count();
    write_text(store.paths().dir / "summary.json", sj.dump(2) + "\n");
    std::cerr << "annotated " << summary.annotated << "/" << summary.total;
    if (summary.annotated) {
        std::cerr << "  perfectly consistent " << fmt_pct(double(summary.consistent) / summary.annotated)
                  << "  needs review " << fmt_pct(double(summary.inconsistent) / summary.annotated);
    }
    std::cerr << "  unparseable verdicts " << summary.unparseable_verdicts;
    if (summary.position_inconsistency_rate) {
        std::cerr << "  position inconsistency " << fmt_pct(*summary.position_inconsistency_rate);
    }
    std::cerr << '\n';
    std::cout << sj.dump(2) << '\n';
    return summary.failed ? kTransport : kOk;
}

struct ScCotArgs {
    std::string corpus;
    std::string out;
    std::string gold;
    std::string domain = "PoliticalSpeech";
    int n = 11;
};

int cmd_sc_cot(const ScCotArgs& a, const BackendFlags& bf) {
    if (a.n < 1 || a.n % 2 == 0) {
        throw ConfigError("-n must be a positive odd number, got " + std::to_string(a.n));
    }
    const fs::path out(a.out);
    auto cfg = backend_config(bf, out / "cache.jsonl");
    auto gateway = Gateway::from_config(cfg);
    auto prompts = make_prompts(bf);
    auto corpus = load_corpus(a.corpus, parse_domain(a.domain));
    LabelMap gold = a.gold.empty() ? load_corpus_labels(a.corpus).gold : load_gold_file(a.gold);

    std::vector<ScCotAnnotation> results(corpus.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr fatal;
    std::mutex mu;
    {
        std::vector<std::jthread> pool;
        for (int w = 0; w < bf.concurrency; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i; (i = next++) < corpus.size();) {
                    try {
                        results[i] = run_sc_cot(corpus[i], a.n, *gateway, prompts, bf.model);
                    } catch (...) {
                        std::lock_guard lock(mu);
                        if (!fatal) fatal = std::current_exception();
                        next = corpus.size();
                    }
                }
            });
        }
    }
    if (fatal) std::rethrow_exception(fatal);

    std::ostringstream lines;
    std::size_t failed = 0;
    for (const auto& r : results) {
        lines << json(r).dump() << '\n';
        failed += r.failed;
    }
    write_text(out / "sc_cot.jsonl", lines.str());

    json summary{{"records", results.size()}, {"failed", failed}, {"n", a.n},
                 {"completions_issued", gateway->call_count()}};
    if (!gold.empty()) {
        write_text(out / "consistency_curve.csv",
                   curve_csv(consistency_curve(results, gold), "level"));
        write_text(out / "prefix_curve.csv",
                   curve_csv(prefix_consistency_curve(results, gold), "x"));
        std::size_t hits = 0, scored = 0;
        for (const auto& r : results) {
            if (r.failed) continue;
            ++scored;
            hits += *r.majority_label == gold.at(r.record_id);
        }
        summary["accuracy"] = scored ? json(double(hits) / double(scored)) : json(nullptr);
    } else {
        std::cerr << "no gold labels; curves not written\n";
    }
    std::cout << summary.dump(2) << '\n';
    return kOk;
}

struct EvaluateArgs {
    std::string annotations;
    std::string gold;
    std::string experts;
    std::string corpus;
    std::string out;
};

int cmd_evaluate(const EvaluateArgs& a, const BackendFlags& bf) {
    auto annotated = read_annotations(a.annotations);
    LabelMap gold;
    std::map<std::string, ExpertLabels> experts;
    if (!a.corpus.empty()) {
        auto labels = load_corpus_labels(a.corpus);
        gold = std::move(labels.gold);
        experts = std::move(labels.experts);
    }
    if (!a.gold.empty()) gold = load_gold_file(a.gold);
    if (!a.experts.empty()) experts = load_experts_file(a.experts);

    LabelMap pred;
    std::map<std::string, Tier> tiers;
    std::vector<AggregateAnnotation> anns;
    for (const auto& r : annotated) {
        pred[r.record.record_id] = r.annotation.label;
        tiers[r.record.record_id] = r.annotation.tier;
        anns.push_back(r.annotation);
    }

    std::set<std::string> annotators;
    for (const auto& [id, e] : experts) {
        for (const auto& [who, ans] : e.per_annotator) annotators.insert(who);
    }
    if (annotators.size() < 2) throw DataError("evaluation needs labels from two experts");
    const std::string e1_name = *annotators.begin();
    const std::string e2_name = *std::next(annotators.begin());

    LabelMap e1, e2;
    std::string missing;
    for (const auto& [id, label] : pred) {
        auto it = experts.find(id);
        bool ok = gold.count(id) && it != experts.end() && it->second.per_annotator.count(e1_name) &&
                  it->second.per_annotator.count(e2_name);
        if (!ok) {
            missing += (missing.empty() ? "" : ", ") + id;
            continue;
        }
        e1[id] = project_guideline_answer(it->second.per_annotator.at(e1_name));
        e2[id] = project_guideline_answer(it->second.per_annotator.at(e2_name));
    }
    if (!missing.empty()) throw DataError("records lacking gold or expert labels: " + missing);

    auto reports = expert_suite(gold, e1, e2, pred, tiers);
    auto steps = per_step_suite(gold, e1, e2, anns);
    std::cout << format_eval_table(reports, bf.model) << '\n' << format_step_table(steps, bf.model);

    if (!a.out.empty()) {
        json j{{"experts", {e1_name, e2_name}}, {"reports", json::array()}, {"steps", json::array()}};
        for (const auto& r : reports) j["reports"].push_back(to_json(r));
        for (const auto& s : steps) j["steps"].push_back(to_json(s));
        write_text(a.out, j.dump(2) + "\n");
    }
    return kOk;
}

struct SplitArgs {
    std::string annotations;
    std::string resolutions;
    std::string out;
};

int cmd_split(const SplitArgs& a) {
    auto annotated = read_annotations(a.annotations);
    auto parts = partition_tiers(annotated, load_resolutions(resolutions_beside(a.resolutions, a.annotations)));
    const fs::path out(a.out);
    auto dump = [&](const char* name, const std::vector<TierEntry>& entries) {
        std::ostringstream s;
        for (const auto& e : entries) s << tier_entry_json(e).dump() << '\n';
        write_text(out / name, s.str());
    };
    dump("gold.jsonl", parts.gold);
    dump("silver.jsonl", parts.silver);
    dump("bronze.jsonl", parts.bronze);
    json j{{"annotated", annotated.size()},
           {"gold", parts.gold.size()},
           {"silver", parts.silver.size()},
           {"bronze", parts.bronze.size()},
           {"bronze_unresolved", parts.bronze_exportable().size()}};
    std::cout << j.dump(2) << '\n';
    return kOk;
}

struct ExportArgs {
    std::string annotations;
    std::string resolutions;
    std::string out;
    std::string format = "csv";
    std::vector<std::string> tiers{"gold", "silver"};
    std::uint64_t seed = 42;
};

int cmd_export(const ExportArgs& a) {
    auto annotated = read_annotations(a.annotations);
    auto parts = partition_tiers(annotated, load_resolutions(resolutions_beside(a.resolutions, a.annotations)));
    auto fmt = a.format == "jsonl" ? ExportFormat::Jsonl : ExportFormat::Csv;
    auto n = export_training(parts, parse_tiers(a.tiers), a.out, fmt, a.seed);
    std::cerr << "wrote " << n << " rows to " << a.out << '\n';
    return kOk;
}

struct ServeArgs {
    std::string annotations;
    std::string resolutions;
    std::string bind = "127.0.0.1:8080";
    std::string static_dir;
    std::string guideline;
    bool blind = false;
    bool double_annotation = false;
    int lease_seconds = 300;
};

ReviewServer* g_server = nullptr;

int cmd_review_serve(const ServeArgs& a) {
    auto colon = a.bind.rfind(':');
    if (colon == std::string::npos) throw ConfigError("--bind expects host:port");
    ServerOptions so;
    so.host = a.bind.substr(0, colon);
    try {
        so.port = std::stoi(a.bind.substr(colon + 1));
    } catch (const std::exception&) {
        throw ConfigError("bad port in --bind " + a.bind);
    }
    if (!a.static_dir.empty()) so.static_dir = a.static_dir;
    if (!a.guideline.empty()) {
        std::ifstream in(a.guideline, std::ios::binary);
        if (!in) throw ConfigError("cannot read guideline " + a.guideline);
        std::ostringstream s;
        s << in.rdbuf();
        so.guideline = s.str();
    }
    ReviewConfig rc;
    rc.blind = a.blind;
    rc.double_annotation = a.double_annotation;
    rc.lease = std::chrono::seconds(a.lease_seconds);

    ReviewStore store(read_annotations(a.annotations), resolutions_beside(a.resolutions, a.annotations), rc);
    ReviewServer server(store, so);
    g_server = &server;
    std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
    });
    std::cerr << "review queue: " << store.queue_size() << " items on " << a.bind << '\n';
    server.run();
    g_server = nullptr;
    return kOk;
}

struct UsageArgs {
    std::string annotations;
    std::string sc_cot;
};

int cmd_report_usage(const UsageArgs& a) {
    std::map<std::string, TokenUsage> usage;
    if (!a.annotations.empty()) {
        auto annotated = read_annotations(a.annotations);
        usage = usage_by_step(annotated);
    }
    if (!a.sc_cot.empty()) {
        std::ifstream in(a.sc_cot, std::ios::binary);
        if (!in) throw DataError("cannot read " + a.sc_cot);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto r = json::parse(line).get<ScCotAnnotation>();
            for (const auto& s : r.samples) usage[kTagScCot] += s.usage;
        }
    }
    if (a.annotations.empty() && a.sc_cot.empty()) {
        throw ConfigError("report-usage needs --annotations and/or --sc-cot");
    }
    print_usage_table(std::cout, usage);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Factual-claim annotation pipeline"};
    app.set_config("--config", "", "TOML file with option defaults");
    app.require_subcommand(1);

    BackendFlags bf;
    AnnotateArgs annotate;
    ScCotArgs sc;
    EvaluateArgs ev;
    SplitArgs split;
    ExportArgs exp;
    ServeArgs serve;
    UsageArgs usage;

    auto* c_annotate = app.add_subcommand("annotate", "Run the three reasoning paths over a corpus");
    c_annotate->add_option("--corpus", annotate.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    c_annotate->add_option("--out", annotate.out, "Run directory")->required();
    c_annotate->add_option("--domain", annotate.domain, "Default domain for records without one")
        ->check(CLI::IsMember({"PoliticalSpeech", "SocialMedia"}));
    c_annotate->add_option("--max-reasks", annotate.max_reasks, "Re-asks after an unparseable reply")
        ->check(CLI::NonNegativeNumber);
    c_annotate->add_option("--stop-after", annotate.stop_after, "Stop after this many records");
    add_backend_flags(c_annotate, bf);

    auto* c_sc = app.add_subcommand("sc-cot", "Self-consistency chain-of-thought baseline");
    c_sc->add_option("--corpus", sc.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    c_sc->add_option("--out", sc.out, "Output directory")->required();
    c_sc->add_option("-n,--samples", sc.n, "Samples per record (odd)");
    c_sc->add_option("--gold", sc.gold, "Gold JSONL (defaults to corpus gold fields)");
    c_sc->add_option("--domain", sc.domain, "Default domain")
        ->check(CLI::IsMember({"PoliticalSpeech", "SocialMedia"}));
    add_backend_flags(c_sc, bf);

    auto* c_eval = app.add_subcommand("evaluate", "Agreement and accuracy against experts and gold");
    c_eval->add_option("--annotations", ev.annotations)->required()->check(CLI::ExistingFile);
    c_eval->add_option("--gold", ev.gold, "Gold JSONL")->check(CLI::ExistingFile);
    c_eval->add_option("--experts", ev.experts, "Expert labels JSONL")->check(CLI::ExistingFile);
    c_eval->add_option("--corpus", ev.corpus, "Corpus JSONL carrying gold/expert fields")
        ->check(CLI::ExistingFile);
    c_eval->add_option("--out", ev.out, "Write reports as JSON");
    c_eval->add_option("--model", bf.model, "Model name for the table");

    auto* c_split = app.add_subcommand("split", "Write gold/silver/bronze tiers");
    c_split->add_option("--annotations", split.annotations)->required()->check(CLI::ExistingFile);
    c_split->add_option("--resolutions", split.resolutions, "Review log (default: beside annotations)");
    c_split->add_option("--out", split.out, "Output directory")->required();

    auto* c_export = app.add_subcommand("export", "Shuffled training file from selected tiers");
    c_export->add_option("--annotations", exp.annotations)->required()->check(CLI::ExistingFile);
    c_export->add_option("--resolutions", exp.resolutions, "Review log (default: beside annotations)");
    c_export->add_option("--out", exp.out, "Output file")->required();
    c_export->add_option("--format", exp.format)->check(CLI::IsMember({"csv", "jsonl"}));
    c_export->add_option("--tiers", exp.tiers, "gold, silver, bronze")->delimiter(',');
    c_export->add_option("--seed", exp.seed, "Shuffle seed");

    auto* c_serve = app.add_subcommand("review-serve", "Serve the review queue over HTTP");
    c_serve->add_option("--annotations", serve.annotations)->required()->check(CLI::ExistingFile);
    c_serve->add_option("--resolutions", serve.resolutions, "Review log (default: beside annotations)");
    c_serve->add_option("--bind", serve.bind, "host:port");
    c_serve->add_option("--static", serve.static_dir, "Directory with the review UI bundle");
    c_serve->add_option("--guideline", serve.guideline, "Guideline text file");
    c_serve->add_flag("--blind", serve.blind, "Hide model rationales");
    c_serve->add_flag("--double", serve.double_annotation, "Two labels per item before resolution");
    c_serve->add_option("--lease-seconds", serve.lease_seconds)->check(CLI::PositiveNumber);

    auto* c_usage = app.add_subcommand("report-usage", "Token usage per request kind");
    c_usage->add_option("--annotations", usage.annotations)->check(CLI::ExistingFile);
    c_usage->add_option("--sc-cot", usage.sc_cot, "sc_cot.jsonl")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*c_annotate) return cmd_annotate(annotate, bf);
        if (*c_sc) return cmd_sc_cot(sc, bf);
        if (*c_eval) return cmd_evaluate(ev, bf);
        if (*c_split) return cmd_split(split);
        if (*c_export) return cmd_export(exp);
        if (*c_serve) return cmd_review_serve(serve);
        if (*c_usage) return cmd_report_usage(usage);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kConfig;
    } catch (const TransportError& e) {
        std::cerr << "transport error: " << e.what() << '\n';
        return kTransport;
    } catch (const CacheMissError& e) {
        std::cerr << "cache miss: " << e.what() << '\n';
        return kTransport;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}
