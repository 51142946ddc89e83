#include "afacta/gateway.hpp"

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "afacta/errors.hpp"

namespace afacta {

using nlohmann::json;

namespace {

std::string utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

json usage_json(const TokenUsage& u) {
    return json{{"prompt_tokens", u.prompt_tokens}, {"completion_tokens", u.completion_tokens}};
}

TokenUsage usage_from(const json& j) {
    TokenUsage u;
    if (j.is_object()) {
        u.prompt_tokens = j.value("prompt_tokens", std::uint64_t{0});
        u.completion_tokens = j.value("completion_tokens", std::uint64_t{0});
    }
    return u;
}

}  // namespace

ChatRequest ChatRequest::from_bundle(const PromptBundle& bundle, std::string model,
                                     std::string tag) {
    ChatRequest req;
    req.model_name = std::move(model);
    req.system = bundle.system;
    req.user = bundle.user;
    req.decode = bundle.decode;
    req.tag = std::move(tag);
    return req;
}

json ChatRequest::canonical() const {
    json j = json::object();
    j["model"] = model_name;
    j["system"] = system;
    j["user"] = user;
    j["temperature"] = decode.temperature;
    j["top_p"] = decode.top_p;
    j["max_tokens"] = decode.max_tokens;
    j["seed"] = decode.seed ? json(*decode.seed) : json(nullptr);
    j["meta"] = json(salt);
    return j;
}

std::string ChatRequest::canonical_string() const { return canonical().dump(); }

std::string ChatRequest::hash() const { return sha256_hex(canonical_string()); }

// ---------------------------------------------------------------- cache

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(*path_);
    if (!in) return;  // a fresh recording starts from an absent file
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("hash")) continue;
        ChatResponse r;
        r.text = j.value("response", std::string{});
        r.usage = usage_from(j.value("usage", json::object()));
        entries_[j["hash"].get<std::string>()] = std::move(r);
    }
}

std::optional<ChatResponse> ResponseCache::lookup(const std::string& hash) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(hash);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::string ResponseCache::entry_line(const CacheEntry& e) {
    json j{{"hash", e.hash},
           {"request", e.request},
           {"response", e.response.text},
           {"usage", usage_json(e.response.usage)},
           {"timestamp", e.timestamp}};
    return j.dump();
}

void ResponseCache::store(const ChatRequest& req, const ChatResponse& resp, std::string timestamp) {
    CacheEntry e{req.hash(), req.canonical(), resp, timestamp.empty() ? utc_now() : timestamp};
    std::lock_guard lock(mu_);
    entries_[e.hash] = resp;
    if (path_) {
        std::ofstream out(*path_, std::ios::app | std::ios::binary);
        if (!out) throw ConfigError("cannot append to cache " + path_->string());
        out << entry_line(e) << '\n';
    }
}

std::size_t ResponseCache::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

ChatResponse ReplayBackend::complete(const ChatRequest& req) {
    auto h = req.hash();
    if (auto hit = cache_->lookup(h)) return *hit;
    throw CacheMissError("replay cache has no response for request " + h + " (" + req.tag + ")", h);
}

// ------------------------------------------------------------- scripted

void ScriptedBackend::add_rule(Matcher match, std::vector<std::string> responses, bool cycle,
                               TokenUsage usage) {
    std::lock_guard lock(mu_);
    rules_.push_back(Rule{std::move(match), std::move(responses), cycle, usage, 0});
}

ScriptedBackend::Matcher ScriptedBackend::tag_is(std::string tag) {
    return [tag = std::move(tag)](const ChatRequest& r) { return r.tag == tag; };
}

ScriptedBackend::Matcher ScriptedBackend::contains(std::string needle) {
    return [needle = std::move(needle)](const ChatRequest& r) {
        return r.user.find(needle) != std::string::npos;
    };
}

ScriptedBackend::Matcher ScriptedBackend::hash_is(std::string hash) {
    return [hash = std::move(hash)](const ChatRequest& r) { return r.hash() == hash; };
}

ScriptedBackend::Matcher ScriptedBackend::any() {
    return [](const ChatRequest&) { return true; };
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_json(const json& script) {
    if (!script.is_array()) throw ConfigError("script must be a JSON array of rules");
    auto backend = std::make_unique<ScriptedBackend>();
    for (const auto& r : script) {
        std::vector<Matcher> parts;
        if (r.contains("tag")) parts.push_back(tag_is(r["tag"].get<std::string>()));
        if (r.contains("contains")) parts.push_back(contains(r["contains"].get<std::string>()));
        if (r.contains("hash")) parts.push_back(hash_is(r["hash"].get<std::string>()));
        if (!r.contains("responses") || !r["responses"].is_array() || r["responses"].empty()) {
            throw ConfigError("script rule needs a non-empty 'responses' array");
        }
        Matcher m = [parts](const ChatRequest& req) {
            for (const auto& p : parts) {
                if (!p(req)) return false;
            }
            return true;
        };
        backend->add_rule(std::move(m), r["responses"].get<std::vector<std::string>>(),
                          r.value("cycle", false), usage_from(r.value("usage", json::object())));
    }
    return backend;
}

ChatResponse ScriptedBackend::complete(const ChatRequest& req) {
    std::lock_guard lock(mu_);
    calls_.push_back(req);
    for (auto& rule : rules_) {
        if (!rule.match(req)) continue;
        if (rule.next >= rule.responses.size()) {
            if (!rule.cycle) continue;
            rule.next = 0;
        }
        ChatResponse resp;
        resp.text = rule.responses[rule.next++];
        resp.usage = rule.usage;
        resp.provider_meta = json{{"backend", "scripted"}};
        return resp;
    }
    throw TransportError("scripted backend has no response for " + req.tag);
}

std::size_t ScriptedBackend::call_count() const {
    std::lock_guard lock(mu_);
    return calls_.size();
}

std::vector<ChatRequest> ScriptedBackend::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

// ----------------------------------------------------------------- http

HttpChatBackend::HttpChatBackend(std::string endpoint_url, std::optional<std::string> api_key,
                                 RetryPolicy retry, std::chrono::seconds timeout, Sleeper sleeper)
    : api_key_(std::move(api_key)), retry_(retry), timeout_(timeout), sleeper_(std::move(sleeper)) {
    auto scheme_end = endpoint_url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint_url must include a scheme: " + endpoint_url);
    }
    auto path_start = endpoint_url.find('/', scheme_end + 3);
    base_ = endpoint_url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : endpoint_url.substr(path_start);
    if (!sleeper_) {
        sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
    if (retry_.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
}

json HttpChatBackend::request_body(const ChatRequest& req) {
    json body{{"model", req.model_name},
              {"messages", json::array({json{{"role", "system"}, {"content", req.system}},
                                        json{{"role", "user"}, {"content", req.user}}})},
              {"temperature", req.decode.temperature},
              {"top_p", req.decode.top_p},
              {"max_tokens", req.decode.max_tokens}};
    if (req.decode.seed) body["seed"] = *req.decode.seed;
    return body;
}

ChatResponse HttpChatBackend::complete(const ChatRequest& req) {
    httplib::Client client(base_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);
    const std::string body = request_body(req).dump();

    std::string last_error;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
        auto res = client.Post(path_, headers, body, "application/json");
        if (!res) {
            last_error = "transport: " + httplib::to_string(res.error());
        } else if (res->status == 401 || res->status == 403) {
            throw ConfigError("endpoint rejected credentials (HTTP " +
                              std::to_string(res->status) + ")");
        } else if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
        } else if (res->status != 200) {
            throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body);
        } else {
            json j = json::parse(res->body, nullptr, false);
            if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
                throw TransportError("malformed chat completion body");
            }
            ChatResponse out;
            out.text = j["choices"][0]["message"].value("content", std::string{});
            out.usage = usage_from(j.value("usage", json::object()));
            for (const char* key : {"id", "model", "system_fingerprint"}) {
                if (j.contains(key)) out.provider_meta[key] = j[key];
            }
            return out;
        }
        if (attempt == retry_.max_attempts) break;
        double jitter_fraction;
        {
            std::lock_guard lock(rng_mu_);
            rng_state_ ^= rng_state_ << 13;
            rng_state_ ^= rng_state_ >> 7;
            rng_state_ ^= rng_state_ << 17;
            jitter_fraction = static_cast<double>(rng_state_ % 1000) / 1000.0;
        }
        auto backoff = retry_.base_backoff * (1LL << (attempt - 1));
        auto extra = std::chrono::milliseconds(
            static_cast<long long>(backoff.count() * retry_.jitter * jitter_fraction));
        sleeper_(backoff + extra);
    }
    throw TransportError("chat completion failed after " + std::to_string(retry_.max_attempts) +
                         " attempts: " + last_error);
}

// -------------------------------------------------------------- gateway

BackendKind parse_backend_kind(std::string_view s) {
    if (s == "http" || s == "HttpChatCompletion") return BackendKind::HttpChatCompletion;
    if (s == "replay" || s == "Replay") return BackendKind::Replay;
    if (s == "scripted" || s == "Scripted") return BackendKind::Scripted;
    throw ConfigError("unknown backend '" + std::string(s) + "'");
}

std::string_view to_string(BackendKind k) noexcept {
    switch (k) {
        case BackendKind::HttpChatCompletion: return "http";
        case BackendKind::Replay: return "replay";
        case BackendKind::Scripted: return "scripted";
    }
    return "?";
}

void BackendConfig::validate() const {
    if (max_concurrency < 1) throw ConfigError("max_concurrency must be positive");
    switch (kind) {
        case BackendKind::Replay:
            if (!cache_path) throw ConfigError("replay backend requires a cache path");
            if (!std::filesystem::exists(*cache_path)) {
                throw ConfigError("replay cache not found: " + cache_path->string());
            }
            break;
        case BackendKind::HttpChatCompletion:
            if (!endpoint_url) throw ConfigError("http backend requires endpoint_url");
            if (api_key_env && !std::getenv(api_key_env->c_str())) {
                throw ConfigError("environment variable " + *api_key_env + " is not set");
            }
            if (record && !cache_path) throw ConfigError("recording requires a cache path");
            break;
        case BackendKind::Scripted:
            if (!script_path) throw ConfigError("scripted backend requires a script file");
            break;
    }
}

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, int max_concurrency,
                 std::shared_ptr<ResponseCache> recorder)
    : backend_(std::move(backend)), recorder_(std::move(recorder)), slots_(max_concurrency) {
    if (max_concurrency < 1) throw ConfigError("max_concurrency must be positive");
}

std::unique_ptr<Gateway> Gateway::from_config(const BackendConfig& config) {
    config.validate();
    switch (config.kind) {
        case BackendKind::Replay: {
            auto cache = std::make_shared<ResponseCache>(*config.cache_path);
            return std::make_unique<Gateway>(std::make_shared<ReplayBackend>(cache),
                                             config.max_concurrency);
        }
        case BackendKind::HttpChatCompletion: {
            std::optional<std::string> key;
            if (config.api_key_env) key = std::getenv(config.api_key_env->c_str());
            auto backend = std::make_shared<HttpChatBackend>(*config.endpoint_url, key,
                                                             config.retry, config.timeout);
            std::shared_ptr<ResponseCache> recorder;
            if (config.record) recorder = std::make_shared<ResponseCache>(*config.cache_path);
            return std::make_unique<Gateway>(backend, config.max_concurrency, recorder);
        }
        case BackendKind::Scripted: {
            std::ifstream in(*config.script_path);
            if (!in) throw ConfigError("cannot read script " + config.script_path->string());
            json script = json::parse(in, nullptr, false);
            if (script.is_discarded()) throw ConfigError("script is not valid JSON");
            std::shared_ptr<ChatBackend> backend = ScriptedBackend::from_json(script);
            return std::make_unique<Gateway>(backend, config.max_concurrency);
        }
    }
    throw ConfigError("unsupported backend");
}

ChatResponse Gateway::complete(const ChatRequest& req) {
    std::optional<ChatResponse> resp;
    if (recorder_) resp = recorder_->lookup(req.hash());
    if (!resp) {
        slots_.acquire();
        int now = ++in_flight_;
        int prev = peak_.load();
        while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
        }
        try {
            resp = backend_->complete(req);
        } catch (...) {
            --in_flight_;
            slots_.release();
            throw;
        }
        --in_flight_;
        slots_.release();
        if (recorder_) recorder_->store(req, *resp);
    }
    std::lock_guard lock(mu_);
    usage_[req.tag] += resp->usage;
    ++calls_;
    return *resp;
}

std::map<std::string, TokenUsage> Gateway::usage_report() const {
    std::lock_guard lock(mu_);
    return usage_;
}

std::size_t Gateway::call_count() const {
    std::lock_guard lock(mu_);
    return calls_;
}

}  // namespace afacta
