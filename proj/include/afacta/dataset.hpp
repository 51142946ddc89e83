#pragma once

// Corpus ingestion, tier partitioning, training export and the on-disk run
// directory: runs/<run_id>/{config.json,state.jsonl,cache.jsonl,annotations.jsonl}
// plus resolutions.jsonl once human review starts.

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "afacta/core.hpp"
#include "afacta/metrics.hpp"

namespace afacta {

// ------------------------------------------------------------- corpus

// JSONL, one object per sentence: {record_id, corpus_id, position, text,
// domain?, gold?, expert_labels?}. Positions must run 0..n-1 within each
// corpus_id and record ids must be unique; violations raise DataError
// naming the offending line. Context comes from positional neighbours in
// the same corpus.
std::vector<SentenceRecord> load_corpus(const std::filesystem::path& path,
                                        Domain default_domain = Domain::PoliticalSpeech);

struct CorpusLabels {
    LabelMap gold;
    std::map<std::string, ExpertLabels> experts;
};

// gold / expert_labels fields of a corpus file, when present.
CorpusLabels load_corpus_labels(const std::filesystem::path& path);

// JSONL {record_id, label} (or {record_id, gold}); labels are
// "FactualClaim"/"NonClaim" or 1/0.
LabelMap load_gold_file(const std::filesystem::path& path);

// JSONL {record_id, annotator, q1, q2?}.
std::map<std::string, ExpertLabels> load_experts_file(const std::filesystem::path& path);

BinaryLabel label_from_json(const nlohmann::json& j);

// ------------------------------------------------------ annotated records

struct ArgumentText {
    std::string text;
    TokenUsage usage;
};

struct AnnotatedRecord {
    SentenceRecord record;
    AggregateAnnotation annotation;
    ArgumentText argument_verifiable;
    ArgumentText argument_unverifiable;
    std::vector<std::string> warnings;
};

void to_json(nlohmann::json& j, const AnnotatedRecord& r);
void from_json(const nlohmann::json& j, AnnotatedRecord& r);

std::vector<AnnotatedRecord> read_annotations(const std::filesystem::path& path);

// --------------------------------------------------------------- tiers

enum class TrainingTier { Gold, Silver, Bronze };
std::string_view to_string(TrainingTier t) noexcept;
TrainingTier parse_training_tier(std::string_view s);

struct TierEntry {
    std::string record_id;
    std::string text;
    BinaryLabel label = BinaryLabel::NonClaim;
    bool human_resolved = false;
};

// gold: consistent auto-labels plus every human-resolved record (with the
// human label). silver: consistent auto-labels. bronze: inconsistent
// auto-labels. silver and bronze partition the annotated set.
struct TierPartition {
    std::vector<TierEntry> gold;
    std::vector<TierEntry> silver;
    std::vector<TierEntry> bronze;

    // bronze minus records a human has resolved.
    std::vector<TierEntry> bronze_exportable() const;
};

// resolutions maps record_id to the human label. Unknown ids raise DataError.
TierPartition partition_tiers(std::span<const AnnotatedRecord> annotated,
                              const std::map<std::string, BinaryLabel>& resolutions);

struct TrainingRow {
    std::string record_id;
    std::string text;
    int label = 0;  // FactualClaim = 1
    TrainingTier tier = TrainingTier::Gold;
};

// Rows of the selected tiers, one per record (a record in several tiers is
// taken from the highest: gold, then silver, then bronze), shuffled with a
// Fisher-Yates pass driven by mt19937_64(seed).
std::vector<TrainingRow> training_rows(const TierPartition& partition,
                                       const std::set<TrainingTier>& tiers, std::uint64_t seed);

enum class ExportFormat { Csv, Jsonl };

// CSV header text,label,tier or JSONL {text,label,tier}. Returns the row count.
std::size_t export_training(const TierPartition& partition, const std::set<TrainingTier>& tiers,
                            const std::filesystem::path& path, ExportFormat format,
                            std::uint64_t seed);

std::string csv_field(std::string_view s);

// --------------------------------------------------------- resolution log

// One line per review event. "label" records an annotator's answer;
// "resolve" fixes the human label of a record. A later resolve for the same
// record needs supersede = true and then replaces the earlier one.
struct ResolutionEvent {
    enum class Kind { Label, Resolve };
    Kind kind = Kind::Label;
    std::string record_id;
    std::string annotator;
    GuidelineAnswer answer;
    BinaryLabel label = BinaryLabel::NonClaim;
    std::string timestamp;
    bool supersede = false;
};

void append_resolution(const std::filesystem::path& path, const ResolutionEvent& event);
std::vector<ResolutionEvent> read_resolutions(const std::filesystem::path& path);
// Label of the last resolve event per record.
std::map<std::string, BinaryLabel> effective_resolutions(std::span<const ResolutionEvent> events);

// -------------------------------------------------------------- run state

enum class RecordStatus { Pending, Step1Done, Step2Done, ArgumentsDone, Aggregated, Failed };
std::string_view to_string(RecordStatus s) noexcept;
RecordStatus parse_record_status(std::string_view s);

struct StateLine {
    std::string record_id;
    RecordStatus status = RecordStatus::Pending;
    std::optional<AnnotatedRecord> result;  // Aggregated only
    // Failed only: how far the record got, and the verdicts produced so far.
    RecordStatus reached = RecordStatus::Pending;
    std::vector<StepVerdict> partial;
    std::string error;
};

struct RunPaths {
    std::filesystem::path dir;

    std::filesystem::path config() const { return dir / "config.json"; }
    std::filesystem::path state() const { return dir / "state.jsonl"; }
    std::filesystem::path cache() const { return dir / "cache.jsonl"; }
    std::filesystem::path annotations() const { return dir / "annotations.jsonl"; }
    std::filesystem::path resolutions() const { return dir / "resolutions.jsonl"; }
};

// Checkpoint store for one run. State lines are appended one record at a
// time; the last line per record wins and a torn final line is ignored.
class RunStore {
public:
    explicit RunStore(std::filesystem::path dir);

    // Writes config.json, or checks that an existing one has the same
    // fingerprint (ConfigError otherwise).
    void init(const nlohmann::json& config, const std::string& fingerprint);

    std::map<std::string, StateLine> load_state() const;
    void append_state(const StateLine& line);

    // Aggregated records in corpus order, written atomically.
    void write_annotations(std::span<const SentenceRecord> corpus_order,
                           const std::map<std::string, StateLine>& state) const;

    const RunPaths& paths() const noexcept { return paths_; }

private:
    RunPaths paths_;
    std::mutex mu_;
};

nlohmann::json to_json(const StateLine& line);
StateLine state_line_from_json(const nlohmann::json& j);

}  // namespace afacta
