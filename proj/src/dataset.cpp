#include "afacta/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "afacta/errors.hpp"
#include "afacta/json_io.hpp"

namespace afacta {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Parsed lines of a JSONL file with their 1-based line numbers.
std::vector<std::pair<std::size_t, json>> read_jsonl(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::pair<std::size_t, json>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": not a JSON object");
        }
        out.emplace_back(lineno, std::move(j));
    }
    return out;
}

std::string where(const fs::path& path, std::size_t lineno) {
    return path.string() + ":" + std::to_string(lineno) + ": ";
}

}  // namespace

// ------------------------------------------------------------- corpus

BinaryLabel label_from_json(const json& j) {
    if (j.is_number_integer()) {
        auto v = j.get<long long>();
        if (v == 1) return BinaryLabel::FactualClaim;
        if (v == 0) return BinaryLabel::NonClaim;
    } else if (j.is_boolean()) {
        return j.get<bool>() ? BinaryLabel::FactualClaim : BinaryLabel::NonClaim;
    } else if (j.is_string()) {
        return parse_label(j.get<std::string>());
    }
    throw DataError("not a label: " + j.dump());
}

std::vector<SentenceRecord> load_corpus(const fs::path& path, Domain default_domain) {
    struct Row {
        std::size_t lineno;
        SentenceRecord rec;
    };
    std::vector<Row> rows;
    std::map<std::string, std::size_t> seen_ids;
    for (auto& [lineno, j] : read_jsonl(path)) {
        SentenceRecord rec;
        try {
            if (!j.contains("domain")) j["domain"] = std::string(to_string(default_domain));
            rec = j.get<SentenceRecord>();
            rec.prev_text.reset();
            rec.next_text.reset();
            rec.validate();
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where(path, lineno) + e.what());
        } catch (const Error& e) {
            throw DataError(where(path, lineno) + e.what());
        }
        if (auto [it, fresh] = seen_ids.emplace(rec.record_id, lineno); !fresh) {
            throw DataError(where(path, lineno) + "duplicate record_id '" + rec.record_id +
                            "' (first on line " + std::to_string(it->second) + ")");
        }
        rows.push_back(Row{lineno, std::move(rec)});
    }

    // Group by corpus, check contiguity, then link neighbours.
    std::map<std::string, std::vector<std::size_t>> by_corpus;
    for (std::size_t i = 0; i < rows.size(); ++i) by_corpus[rows[i].rec.corpus_id].push_back(i);
    for (auto& [corpus, idx] : by_corpus) {
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return rows[a].rec.position < rows[b].rec.position;
        });
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const auto& row = rows[idx[k]];
            if (row.rec.position != k) {
                bool dup = k > 0 && rows[idx[k - 1]].rec.position == row.rec.position;
                throw DataError(where(path, row.lineno) + "corpus '" + corpus + "' " +
                                (dup ? "repeats position " : "has a gap before position ") +
                                std::to_string(row.rec.position));
            }
        }
        for (std::size_t k = 0; k < idx.size(); ++k) {
            auto& rec = rows[idx[k]].rec;
            if (k > 0) rec.prev_text = rows[idx[k - 1]].rec.text;
            if (k + 1 < idx.size()) rec.next_text = rows[idx[k + 1]].rec.text;
        }
    }

    std::vector<SentenceRecord> out;
    out.reserve(rows.size());
    for (auto& r : rows) out.push_back(std::move(r.rec));
    return out;
}

CorpusLabels load_corpus_labels(const fs::path& path) {
    CorpusLabels out;
    for (const auto& [lineno, j] : read_jsonl(path)) {
        try {
            auto id = j.at("record_id").get<std::string>();
            if (j.contains("gold") && !j["gold"].is_null()) out.gold[id] = label_from_json(j["gold"]);
            if (j.contains("expert_labels") && j["expert_labels"].is_object()) {
                ExpertLabels e;
                e.record_id = id;
                for (const auto& [annotator, ans] : j["expert_labels"].items()) {
                    auto g = ans.get<GuidelineAnswer>();
                    g.validate();
                    e.per_annotator[annotator] = g;
                }
                out.experts[id] = std::move(e);
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where(path, lineno) + e.what());
        } catch (const Error& e) {
            throw DataError(where(path, lineno) + e.what());
        }
    }
    return out;
}

LabelMap load_gold_file(const fs::path& path) {
    LabelMap out;
    for (const auto& [lineno, j] : read_jsonl(path)) {
        try {
            auto id = j.at("record_id").get<std::string>();
            const json& v = j.contains("label") ? j["label"] : j.at("gold");
            if (!out.emplace(id, label_from_json(v)).second) {
                throw DataError("duplicate gold label for '" + id + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where(path, lineno) + e.what());
        } catch (const Error& e) {
            throw DataError(where(path, lineno) + e.what());
        }
    }
    return out;
}

std::map<std::string, ExpertLabels> load_experts_file(const fs::path& path) {
    std::map<std::string, ExpertLabels> out;
    for (const auto& [lineno, j] : read_jsonl(path)) {
        try {
            auto id = j.at("record_id").get<std::string>();
            auto annotator = j.at("annotator").get<std::string>();
            auto ans = j.get<GuidelineAnswer>();
            ans.validate();
            auto& e = out[id];
            e.record_id = id;
            e.per_annotator[annotator] = ans;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where(path, lineno) + e.what());
        } catch (const Error& e) {
            throw DataError(where(path, lineno) + e.what());
        }
    }
    return out;
}

// ------------------------------------------------------ annotated records

void to_json(json& j, const AnnotatedRecord& r) {
    j = json{{"record", r.record},
             {"annotation", r.annotation},
             {"arguments",
              {{"verifiable", {{"text", r.argument_verifiable.text}, {"usage", r.argument_verifiable.usage}}},
               {"unverifiable",
                {{"text", r.argument_unverifiable.text}, {"usage", r.argument_unverifiable.usage}}}}},
             {"warnings", r.warnings}};
}

void from_json(const json& j, AnnotatedRecord& r) {
    r.record = j.at("record").get<SentenceRecord>();
    r.annotation = j.at("annotation").get<AggregateAnnotation>();
    const auto& args = j.at("arguments");
    r.argument_verifiable = {args.at("verifiable").value("text", std::string{}),
                             args.at("verifiable").value("usage", TokenUsage{})};
    r.argument_unverifiable = {args.at("unverifiable").value("text", std::string{}),
                               args.at("unverifiable").value("usage", TokenUsage{})};
    r.warnings = j.value("warnings", std::vector<std::string>{});
}

std::vector<AnnotatedRecord> read_annotations(const fs::path& path) {
    std::vector<AnnotatedRecord> out;
    for (const auto& [lineno, j] : read_jsonl(path)) {
        try {
            out.push_back(j.get<AnnotatedRecord>());
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where(path, lineno) + e.what());
        } catch (const Error& e) {
            throw DataError(where(path, lineno) + e.what());
        }
    }
    return out;
}

// --------------------------------------------------------------- tiers

std::string_view to_string(TrainingTier t) noexcept {
    switch (t) {
        case TrainingTier::Gold: return "gold";
        case TrainingTier::Silver: return "silver";
        case TrainingTier::Bronze: return "bronze";
    }
    return "?";
}

TrainingTier parse_training_tier(std::string_view s) {
    if (s == "gold") return TrainingTier::Gold;
    if (s == "silver") return TrainingTier::Silver;
    if (s == "bronze") return TrainingTier::Bronze;
    throw ValidationError("unknown tier '" + std::string(s) + "' (gold, silver, bronze)");
}

std::vector<TierEntry> TierPartition::bronze_exportable() const {
    std::vector<TierEntry> out;
    std::copy_if(bronze.begin(), bronze.end(), std::back_inserter(out),
                 [&](const TierEntry& e) {
                     return std::none_of(gold.begin(), gold.end(), [&](const TierEntry& g) {
                         return g.human_resolved && g.record_id == e.record_id;
                     });
                 });
    return out;
}

TierPartition partition_tiers(std::span<const AnnotatedRecord> annotated,
                              const std::map<std::string, BinaryLabel>& resolutions) {
    std::set<std::string> known;
    for (const auto& a : annotated) known.insert(a.record.record_id);
    for (const auto& [id, _] : resolutions) {
        if (!known.count(id)) throw DataError("resolution for unknown record '" + id + "'");
    }

    TierPartition p;
    for (const auto& a : annotated) {
        TierEntry auto_entry{a.record.record_id, a.record.text, a.annotation.label, false};
        bool consistent = a.annotation.tier == Tier::PerfectlyConsistent;
        (consistent ? p.silver : p.bronze).push_back(auto_entry);
        if (auto it = resolutions.find(a.record.record_id); it != resolutions.end()) {
            p.gold.push_back(TierEntry{a.record.record_id, a.record.text, it->second, true});
        } else if (consistent) {
            p.gold.push_back(auto_entry);
        }
    }
    return p;
}

std::vector<TrainingRow> training_rows(const TierPartition& partition,
                                       const std::set<TrainingTier>& tiers, std::uint64_t seed) {
    std::vector<TrainingRow> rows;
    std::set<std::string> taken;
    auto take = [&](const std::vector<TierEntry>& entries, TrainingTier tier) {
        if (!tiers.count(tier)) return;
        for (const auto& e : entries) {
            if (!taken.insert(e.record_id).second) continue;
            rows.push_back(TrainingRow{e.record_id, e.text,
                                       e.label == BinaryLabel::FactualClaim ? 1 : 0, tier});
        }
    };
    take(partition.gold, TrainingTier::Gold);
    take(partition.silver, TrainingTier::Silver);
    take(partition.bronze_exportable(), TrainingTier::Bronze);

    // std::shuffle and uniform_int_distribution differ across standard
    // libraries; mt19937_64 output does not.
    std::mt19937_64 rng(seed);
    for (std::size_t i = rows.size(); i > 1; --i) {
        const std::uint64_t bound = i;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t r;
        do {
            r = rng();
        } while (r >= limit);
        std::swap(rows[i - 1], rows[static_cast<std::size_t>(r % bound)]);
    }
    return rows;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::size_t export_training(const TierPartition& partition, const std::set<TrainingTier>& tiers,
                            const fs::path& path, ExportFormat format, std::uint64_t seed) {
    if (tiers.empty()) throw ValidationError("no tiers selected for export");
    auto rows = training_rows(partition, tiers, seed);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    if (format == ExportFormat::Csv) {
        out << "text,label,tier\n";
        for (const auto& r : rows) {
            out << csv_field(r.text) << ',' << r.label << ',' << to_string(r.tier) << '\n';
        }
    } else {
        for (const auto& r : rows) {
            out << json{{"text", r.text}, {"label", r.label}, {"tier", to_string(r.tier)}}.dump()
                << '\n';
        }
    }
    return rows.size();
}

// --------------------------------------------------------- resolution log

void append_resolution(const fs::path& path, const ResolutionEvent& e) {
    json j{{"type", e.kind == ResolutionEvent::Kind::Label ? "label" : "resolve"},
           {"record_id", e.record_id},
           {"annotator", e.annotator},
           {"answer", e.answer},
           {"label", std::string(to_string(e.label))},
           {"timestamp", e.timestamp},
           {"supersede", e.supersede}};
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw DataError("cannot append to " + path.string());
    out << j.dump() << '\n';
    out.flush();
}

std::vector<ResolutionEvent> read_resolutions(const fs::path& path) {
    std::vector<ResolutionEvent> out;
    if (!fs::exists(path)) return out;
    std::ifstream in(path, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;  // torn trailing write
        ResolutionEvent e;
        e.kind = j.value("type", std::string("label")) == "resolve" ? ResolutionEvent::Kind::Resolve
                                                                    : ResolutionEvent::Kind::Label;
        e.record_id = j.at("record_id").get<std::string>();
        e.annotator = j.value("annotator", std::string{});
        e.answer = j.at("answer").get<GuidelineAnswer>();
        e.label = parse_label(j.at("label").get<std::string>());
        e.timestamp = j.value("timestamp", std::string{});
        e.supersede = j.value("supersede", false);
        out.push_back(std::move(e));
    }
    return out;
}

std::map<std::string, BinaryLabel> effective_resolutions(std::span<const ResolutionEvent> events) {
    std::map<std::string, BinaryLabel> out;
    for (const auto& e : events) {
        if (e.kind == ResolutionEvent::Kind::Resolve) out[e.record_id] = e.label;
    }
    return out;
}

// -------------------------------------------------------------- run state

std::string_view to_string(RecordStatus s) noexcept {
    switch (s) {
        case RecordStatus::Pending: return "Pending";
        case RecordStatus::Step1Done: return "Step1Done";
        case RecordStatus::Step2Done: return "Step2Done";
        case RecordStatus::ArgumentsDone: return "ArgumentsDone";
        case RecordStatus::Aggregated: return "Aggregated";
        case RecordStatus::Failed: return "Failed";
    }
    return "?";
}

RecordStatus parse_record_status(std::string_view s) {
    for (auto st : {RecordStatus::Pending, RecordStatus::Step1Done, RecordStatus::Step2Done,
                    RecordStatus::ArgumentsDone, RecordStatus::Aggregated, RecordStatus::Failed}) {
        if (to_string(st) == s) return st;
    }
    throw DataError("unknown record status '" + std::string(s) + "'");
}

json to_json(const StateLine& line) {
    json j{{"record_id", line.record_id}, {"status", std::string(to_string(line.status))}};
    if (line.result) j["result"] = *line.result;
    if (line.status == RecordStatus::Failed) {
        j["reached"] = std::string(to_string(line.reached));
        j["partial"] = line.partial;
        j["error"] = line.error;
    }
    return j;
}

StateLine state_line_from_json(const json& j) {
    StateLine s;
    s.record_id = j.at("record_id").get<std::string>();
    s.status = parse_record_status(j.at("status").get<std::string>());
    if (j.contains("result")) s.result = j["result"].get<AnnotatedRecord>();
    if (j.contains("reached")) s.reached = parse_record_status(j["reached"].get<std::string>());
    if (j.contains("partial")) s.partial = j["partial"].get<std::vector<StepVerdict>>();
    s.error = j.value("error", std::string{});
    return s;
}

RunStore::RunStore(fs::path dir) : paths_{std::move(dir)} { fs::create_directories(paths_.dir); }

void RunStore::init(const json& config, const std::string& fingerprint) {
    if (fs::exists(paths_.config())) {
        std::ifstream in(paths_.config());
        json existing = json::parse(in, nullptr, false);
        if (existing.is_discarded()) throw ConfigError("corrupt " + paths_.config().string());
        auto old = existing.value("fingerprint", std::string{});
        if (old != fingerprint) {
            throw ConfigError("run directory " + paths_.dir.string() +
                              " belongs to a different configuration (fingerprint " + old +
                              ", now " + fingerprint + ")");
        }
        return;
    }
    json out = config;
    out["fingerprint"] = fingerprint;
    std::ofstream f(paths_.config(), std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + paths_.config().string());
    f << out.dump(2) << '\n';
}

std::map<std::string, StateLine> RunStore::load_state() const {
    std::map<std::string, StateLine> out;
    std::ifstream in(paths_.state(), std::ios::binary);
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;  // torn trailing write
        try {
            auto s = state_line_from_json(j);
            out[s.record_id] = std::move(s);
        } catch (const std::exception&) {
            continue;
        }
    }
    return out;
}

void RunStore::append_state(const StateLine& line) {
    std::lock_guard lock(mu_);
    std::ofstream out(paths_.state(), std::ios::app | std::ios::binary);
    if (!out) throw DataError("cannot append to " + paths_.state().string());
    out << to_json(line).dump() << '\n';
    out.flush();
}

void RunStore::write_annotations(std::span<const SentenceRecord> corpus_order,
                                 const std::map<std::string, StateLine>& state) const {
    auto tmp = paths_.annotations();
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        for (const auto& rec : corpus_order) {
            auto it = state.find(rec.record_id);
            if (it == state.end() || it->second.status != RecordStatus::Aggregated) continue;
            out << json(*it->second.result).dump() << '\n';
        }
    }
    fs::rename(tmp, paths_.annotations());
}

}  // namespace afacta
