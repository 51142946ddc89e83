#pragma once

// Provider-agnostic chat completion with record/replay caching.
//
// A Gateway wraps one ChatBackend, bounds the number of in-flight calls,
// optionally records every response into an append-only JSONL cache, and
// accumulates token usage per request tag.

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "afacta/core.hpp"
#include "afacta/hash.hpp"
#include "afacta/prompts.hpp"

namespace afacta {

struct ChatRequest {
    std::string model_name;
    std::string system;
    std::string user;
    DecodeSettings decode;
    // Extra provider metadata that is part of the request identity
    // (sample index for self-consistency, re-ask attempt, ...).
    std::map<std::string, std::string> salt;
    // Accounting label for usage_report(). Not part of the identity.
    std::string tag;

    static ChatRequest from_bundle(const PromptBundle& bundle, std::string model, std::string tag);

    // Stable key order, no whitespace.
    nlohmann::json canonical() const;
    std::string canonical_string() const;
    // Lowercase hex SHA-256 of canonical_string().
    std::string hash() const;
};

struct ChatResponse {
    std::string text;
    TokenUsage usage;
    nlohmann::json provider_meta = nlohmann::json::object();
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const ChatRequest& req) = 0;
};

struct CacheEntry {
    std::string hash;
    nlohmann::json request;
    ChatResponse response;
    std::string timestamp;
};

// Append-only JSONL cache: {hash, request, response, usage, timestamp} per
// line. On load the last line for a hash wins. A truncated final line (an
// interrupted append) is ignored.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(std::filesystem::path path);

    std::optional<ChatResponse> lookup(const std::string& hash) const;
    // Writes through to the file when one is attached.
    void store(const ChatRequest& req, const ChatResponse& resp, std::string timestamp = {});
    std::size_t size() const;
    const std::optional<std::filesystem::path>& path() const noexcept { return path_; }

    static std::string entry_line(const CacheEntry& entry);

private:
    std::optional<std::filesystem::path> path_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, ChatResponse> entries_;
};

class ReplayBackend : public ChatBackend {
public:
    explicit ReplayBackend(std::shared_ptr<const ResponseCache> cache) : cache_(std::move(cache)) {}
    ChatResponse complete(const ChatRequest& req) override;

private:
    std::shared_ptr<const ResponseCache> cache_;
};

// Test backend: each rule pairs a matcher with a response queue. A call is
// answered by the first matching rule that still has responses; cycling
// rules repeat their queue forever.
class ScriptedBackend : public ChatBackend {
public:
    using Matcher = std::function<bool(const ChatRequest&)>;

    struct Rule {
        Matcher match;
        std::vector<std::string> responses;
        bool cycle = false;
        TokenUsage usage;
        std::size_t next = 0;
    };

    void add_rule(Matcher match, std::vector<std::string> responses, bool cycle = false,
                  TokenUsage usage = {});
    // Rules from JSON: [{"tag"?, "contains"?, "hash"?, "responses": [...],
    // "cycle"?, "usage"?: {prompt_tokens, completion_tokens}}].
    static std::unique_ptr<ScriptedBackend> from_json(const nlohmann::json& script);

    ChatResponse complete(const ChatRequest& req) override;

    std::size_t call_count() const;
    std::vector<ChatRequest> calls() const;

    static Matcher tag_is(std::string tag);
    static Matcher contains(std::string needle);
    static Matcher hash_is(std::string hash);
    static Matcher any();

private:
    mutable std::mutex mu_;
    std::vector<Rule> rules_;
    std::vector<ChatRequest> calls_;
};

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_backoff{500};
    double jitter = 0.25;  // fraction of the backoff added at random
};

// OpenAI-style chat completion over HTTP(S). Retries transport failures,
// 429 and 5xx with exponential backoff; 401/403 raise ConfigError.
class HttpChatBackend : public ChatBackend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    HttpChatBackend(std::string endpoint_url, std::optional<std::string> api_key,
                    RetryPolicy retry = {}, std::chrono::seconds timeout = std::chrono::seconds(60),
                    Sleeper sleeper = {});
    ChatResponse complete(const ChatRequest& req) override;

    static nlohmann::json request_body(const ChatRequest& req);

private:
    std::string base_;
    std::string path_;
    std::optional<std::string> api_key_;
    RetryPolicy retry_;
    std::chrono::seconds timeout_;
    Sleeper sleeper_;
    std::mutex rng_mu_;
    std::uint64_t rng_state_ = 0x9e3779b97f4a7c15ULL;
};

enum class BackendKind { HttpChatCompletion, Replay, Scripted };

struct BackendConfig {
    BackendKind kind = BackendKind::Replay;
    std::optional<std::string> endpoint_url;
    std::optional<std::string> api_key_env;
    std::optional<std::filesystem::path> cache_path;
    std::optional<std::filesystem::path> script_path;
    bool record = false;
    int max_concurrency = 4;
    RetryPolicy retry;
    std::chrono::seconds timeout{60};

    // Throws ConfigError on missing required fields.
    void validate() const;
};

BackendKind parse_backend_kind(std::string_view s);
std::string_view to_string(BackendKind k) noexcept;

class Gateway {
public:
    Gateway(std::shared_ptr<ChatBackend> backend, int max_concurrency,
            std::shared_ptr<ResponseCache> recorder = nullptr);

    // Builds the backend named by config. Validates before anything else.
    static std::unique_ptr<Gateway> from_config(const BackendConfig& config);

    ChatResponse complete(const ChatRequest& req);

    // Cumulative usage per request tag.
    std::map<std::string, TokenUsage> usage_report() const;
    std::size_t call_count() const;
    int peak_in_flight() const noexcept { return peak_.load(); }

private:
    std::shared_ptr<ChatBackend> backend_;
    std::shared_ptr<ResponseCache> recorder_;
    std::counting_semaphore<> slots_;
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_{0};
    mutable std::mutex mu_;
    std::map<std::string, TokenUsage> usage_;
    std::size_t calls_ = 0;
};

}  // namespace afacta
