#pragma once

// Per-record orchestration of the three reasoning paths and the
// checkpointed campaign runner built on it.
//
// Call plan for one record (6 completions when every reply parses):
//   direct, fact_extraction, argue_verifiable, argue_unverifiable,
//   judge_order_a (verifiable argument in slot A), judge_order_b (swapped).
// The two arguments are generated once and reused by both judge orders.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "afacta/core.hpp"
#include "afacta/dataset.hpp"
#include "afacta/errors.hpp"

namespace afacta {

class Gateway;
class PromptEngine;
struct ChatRequest;
struct PromptBundle;

inline constexpr const char* kTagDirect = "direct";
inline constexpr const char* kTagFactExtraction = "fact_extraction";
inline constexpr const char* kTagArgueVerifiable = "argue_verifiable";
inline constexpr const char* kTagArgueUnverifiable = "argue_unverifiable";
inline constexpr const char* kTagJudgeOrderA = "judge_order_a";
inline constexpr const char* kTagJudgeOrderB = "judge_order_b";
inline constexpr const char* kTagScCot = "sc_cot";

struct AnnotatorOptions {
    std::string model = "gpt-4-0613";
    // Extra attempts after a ParseError. A verdict still unparseable after
    // them is recorded as such and forces the Inconsistent tier.
    int max_reasks = 1;
};

// The request for one attempt of a step; attempts after the first carry a
// "reask" salt so they do not hit the cached first reply.
ChatRequest step_request(const PromptBundle& bundle, const std::string& model, const char* tag,
                         int attempt);

// A record that could not finish: transport failure or replay miss.
class RecordError : public Error {
public:
    RecordError(const std::string& what, RecordStatus reached, std::vector<StepVerdict> partial)
        : Error(what), reached_(reached), partial_(std::move(partial)) {}
    RecordStatus reached() const noexcept { return reached_; }
    const std::vector<StepVerdict>& partial() const noexcept { return partial_; }

private:
    RecordStatus reached_;
    std::vector<StepVerdict> partial_;
};

class Annotator {
public:
    Annotator(Gateway& gateway, const PromptEngine& prompts, AnnotatorOptions options = {});

    // Runs the full call plan. TransportError and CacheMissError surface as
    // RecordError; ConfigError propagates unchanged.
    AnnotatedRecord annotate(const SentenceRecord& rec) const;

    const AnnotatorOptions& options() const noexcept { return options_; }

private:
    Gateway& gateway_;
    const PromptEngine& prompts_;
    AnnotatorOptions options_;
};

struct CampaignOptions {
    int concurrency = 1;
    // Process at most this many pending records, then stop as if killed.
    std::optional<std::size_t> stop_after;
};

struct CampaignSummary {
    std::size_t total = 0;
    std::size_t annotated = 0;         // Aggregated, including resumed ones
    std::size_t resumed = 0;           // already Aggregated before this invocation
    std::size_t failed = 0;
    std::size_t pending = 0;           // not attempted (stop_after)
    std::size_t consistent = 0;
    std::size_t inconsistent = 0;
    std::size_t unparseable_verdicts = 0;
    std::size_t category_conflicts = 0;
    std::optional<double> position_inconsistency_rate;
    std::map<std::string, TokenUsage> usage;
    std::vector<std::pair<std::string, std::string>> failures;  // record_id, error

    bool complete() const noexcept { return pending == 0 && failed == 0; }
    nlohmann::json to_json() const;
};

// Annotates every record that is not yet Aggregated in the store, then
// rewrites annotations.jsonl in corpus order. Failed records are retried
// on the next invocation.
CampaignSummary run_campaign(std::span<const SentenceRecord> corpus, const Annotator& annotator,
                             RunStore& store, CampaignOptions options = {});

// Summary over a set of annotated records.
CampaignSummary summarize(std::span<const AnnotatedRecord> records);

// Token usage per request tag, recovered from stored annotations.
std::map<std::string, TokenUsage> usage_by_step(std::span<const AnnotatedRecord> records);

// The settings that decide annotation output; hashing them gives the run
// fingerprint checked on resume.
nlohmann::json run_identity(const AnnotatorOptions& options, const PromptEngine& prompts,
                            const std::string& corpus_sha256);
std::string run_fingerprint(const nlohmann::json& identity);

}  // namespace afacta
