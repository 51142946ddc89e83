#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "afacta/errors.hpp"
#include "afacta/gateway.hpp"
#include "afacta/hash.hpp"
#include "oracles.hpp"

using namespace afacta;
using nlohmann::json;

namespace {

ChatRequest request(const std::string& user, const std::string& tag = "direct") {
    ChatRequest r;
    r.model_name = "m";
    r.system = "sys";
    r.user = user;
    r.decode.temperature = 0.0;
    r.decode.top_p = 1.0;
    r.decode.max_tokens = 16;
    r.decode.seed = 42;
    r.tag = tag;
    return r;
}

// Local OpenAI-style endpoint whose status sequence is scripted per test.
class FakeEndpoint {
public:
    explicit FakeEndpoint(std::vector<int> statuses) : statuses_(std::move(statuses)) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            std::size_t i = hits_++;
            {
                std::lock_guard lock(mu_);
                bodies_.push_back(req.body);
                auths_.push_back(req.get_header_value("Authorization"));
            }
            int status = i < statuses_.size() ? statuses_[i] : 200;
            res.status = status;
            if (status == 200) {
                json body{{"id", "cmpl-1"},
                          {"model", "m"},
                          {"choices", json::array({json{{"message", {{"content", "Yes"}}}}})},
                          {"usage", {{"prompt_tokens", 7}, {"completion_tokens", 1}}}};
                res.set_content(body.dump(), "application/json");
            } else {
                res.set_content("{}", "application/json");
            }
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeEndpoint() {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
    std::size_t hits() const { return hits_; }
    std::vector<std::string> bodies() const {
        std::lock_guard lock(mu_);
        return bodies_;
    }
    std::vector<std::string> auths() const {
        std::lock_guard lock(mu_);
        return auths_;
    }

private:
    httplib::Server server_;
    std::vector<int> statuses_;
    std::atomic<std::size_t> hits_{0};
    mutable std::mutex mu_;
    std::vector<std::string> bodies_, auths_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("request identity covers content and salt but not the accounting tag") {
    auto a = request("hello", "direct");
    auto b = request("hello", "sc_cot");
    CHECK(a.hash() == b.hash());
    CHECK(a.canonical_string().find(' ') == std::string::npos);
    CHECK(a.hash() == sha256_hex(a.canonical_string()));

    auto c = a;
    c.user = "hello!";
    CHECK(c.hash() != a.hash());
    auto d = a;
    d.salt["sample_index"] = "1";
    CHECK(d.hash() != a.hash());
    auto e = a;
    e.decode.temperature = 0.7;
    CHECK(e.hash() != a.hash());
    auto f = a;
    f.decode.seed.reset();
    CHECK(f.hash() != a.hash());
    auto g = a;
    g.model_name = "other";
    CHECK(g.hash() != a.hash());
}

TEST_CASE("cache: last line wins, bad lines are skipped, appends persist") {
    testing_support::TempDir tmp;
    auto path = tmp / "cache.jsonl";
    auto req = request("q");
    {
        ResponseCache cache(path);
        CHECK(cache.size() == 0);
        cache.store(req, ChatResponse{"first", {1, 1}, {}}, "t0");
        cache.store(req, ChatResponse{"second", {2, 3}, {}}, "t1");
        CHECK(cache.lookup(req.hash())->text == "second");
    }
    {
        std::ofstream out(path, std::ios::app);
        out << "not json\n\n[1,2]\n{\"hash\": \"abc\", \"response\": \"torn";
    }
    ResponseCache reloaded(path);
    CHECK(reloaded.size() == 1);
    auto hit = reloaded.lookup(req.hash());
    REQUIRE(hit);
    CHECK(hit->text == "second");
    CHECK(hit->usage == TokenUsage{2, 3});
    CHECK_FALSE(reloaded.lookup("abc"));

    auto first_line = testing_support::slurp(path).substr(0, testing_support::slurp(path).find('\n'));
    auto j = json::parse(first_line);
    CHECK(j["hash"] == req.hash());
    CHECK(j["request"] == req.canonical());
    CHECK(j["timestamp"] == "t0");
}

TEST_CASE("replay answers from the cache and misses loudly") {
    auto cache = std::make_shared<ResponseCache>();
    auto hit = request("known");
    cache->store(hit, ChatResponse{"Yes", {3, 1}, {}});
    ReplayBackend replay(cache);
    CHECK(replay.complete(hit).text == "Yes");
    auto miss = request("unknown");
    try {
        replay.complete(miss);
        FAIL("expected a cache miss");
    } catch (const CacheMissError& e) {
        CHECK(e.hash() == miss.hash());
    }
}

TEST_CASE("scripted backend: first matching rule with responses left, cycling") {
    ScriptedBackend s;
    s.add_rule(ScriptedBackend::tag_is("judge_order_a"), {"Lean towards A"}, true);
    s.add_rule(ScriptedBackend::contains("special"), {"one", "two"});
    s.add_rule(ScriptedBackend::any(), {"fallback"}, true);
    CHECK(s.complete(request("x", "judge_order_a")).text == "Lean towards A");
    CHECK(s.complete(request("x", "judge_order_a")).text == "Lean towards A");
    CHECK(s.complete(request("a special one")).text == "one");
    CHECK(s.complete(request("a special one")).text == "two");
    CHECK(s.complete(request("a special one")).text == "fallback");
    CHECK(s.call_count() == 5);
    CHECK(s.calls()[2].user == "a special one");

    ScriptedBackend empty;
    empty.add_rule(ScriptedBackend::any(), {"only"});
    empty.complete(request("x"));
    CHECK_THROWS_AS(empty.complete(request("x")), TransportError);

    auto from = ScriptedBackend::from_json(json::parse(
        R"([{"tag": "direct", "responses": ["No"], "cycle": true, "usage": {"prompt_tokens": 5, "completion_tokens": 2}}])"));
    auto r = from->complete(request("x"));
    CHECK(r.text == "No");
    CHECK(r.usage == TokenUsage{5, 2});
}

TEST_CASE("gateway bounds concurrency and accounts usage per tag") {
    class Slow : public ChatBackend {
    public:
        ChatResponse complete(const ChatRequest&) override {
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
            return {"ok", {10, 2}, {}};
        }
    };
    Gateway gw(std::make_shared<Slow>(), 3);
    std::vector<std::jthread> threads;
    for (int t = 0; t < 12; ++t) {
        threads.emplace_back([&gw, t] {
            for (int i = 0; i < 5; ++i) {
                gw.complete(request(std::to_string(t * 10 + i), t % 2 ? "direct" : "sc_cot"));
            }
        });
    }
    threads.clear();
    CHECK(gw.call_count() == 60);
    CHECK(gw.peak_in_flight() <= 3);
    CHECK(gw.peak_in_flight() >= 1);
    auto usage = gw.usage_report();
    CHECK(usage["direct"] == TokenUsage{300, 60});
    CHECK(usage["sc_cot"] == TokenUsage{300, 60});
    CHECK_THROWS_AS(Gateway(std::make_shared<Slow>(), 0), ConfigError);
}

TEST_CASE("gateway recorder serves repeats without calling the backend") {
    testing_support::TempDir tmp;
    auto scripted = std::make_shared<ScriptedBackend>();
    scripted->add_rule(ScriptedBackend::any(), {"r1", "r2"});
    auto recorder = std::make_shared<ResponseCache>(tmp / "rec.jsonl");
    Gateway gw(scripted, 2, recorder);
    CHECK(gw.complete(request("q")).text == "r1");
    CHECK(gw.complete(request("q")).text == "r1");
    CHECK(scripted->call_count() == 1);
    CHECK(gw.call_count() == 2);
    ResponseCache reread(tmp / "rec.jsonl");
    CHECK(reread.lookup(request("q").hash())->text == "r1");
}

TEST_CASE("backend configuration is validated before use") {
    BackendConfig c;
    c.kind = BackendKind::Replay;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.cache_path = "/nonexistent/cache.jsonl";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.cache_path = testing_support::fixture_dir() / "cache.jsonl";
    CHECK_NOTHROW(c.validate());
    c.max_concurrency = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    BackendConfig h;
    h.kind = BackendKind::HttpChatCompletion;
    CHECK_THROWS_AS(h.validate(), ConfigError);
    h.endpoint_url = "http://localhost:1/v1";
    h.api_key_env = "AFACTA_TEST_SURELY_UNSET_VARIABLE";
    CHECK_THROWS_AS(h.validate(), ConfigError);
    h.api_key_env.reset();
    h.record = true;
    CHECK_THROWS_AS(h.validate(), ConfigError);

    CHECK(parse_backend_kind("replay") == BackendKind::Replay);
    CHECK_THROWS_AS(parse_backend_kind("carrier-pigeon"), ConfigError);
    CHECK_THROWS_AS(HttpChatBackend("localhost/v1", std::nullopt), ConfigError);
}

TEST_CASE("http backend retries 5xx and 429, then succeeds") {
    FakeEndpoint ep({500, 429, 503});
    std::vector<std::chrono::milliseconds> sleeps;
    HttpChatBackend http(ep.url(), "sk-test", RetryPolicy{5, std::chrono::milliseconds(100), 0.25},
                         std::chrono::seconds(5), [&](auto d) { sleeps.push_back(d); });
    auto r = http.complete(request("hello"));
    CHECK(r.text == "Yes");
    CHECK(r.usage == TokenUsage{7, 1});
    CHECK(r.provider_meta["id"] == "cmpl-1");
    CHECK(ep.hits() == 4);
    REQUIRE(sleeps.size() == 3);
    for (std::size_t i = 0; i < sleeps.size(); ++i) {
        auto base = 100 * (1 << i);
        CHECK(sleeps[i].count() >= base);
        CHECK(sleeps[i].count() <= base * 1.25);
    }
    auto body = json::parse(ep.bodies().front());
    CHECK(body == HttpChatBackend::request_body(request("hello")));
    CHECK(body["seed"] == 42);
    CHECK(body["messages"][1]["content"] == "hello");
    CHECK(ep.auths().front() == "Bearer sk-test");
}

TEST_CASE("http backend gives up after max attempts and rejects bad credentials") {
    {
        FakeEndpoint ep({500, 500, 500});
        HttpChatBackend http(ep.url(), std::nullopt, RetryPolicy{3, std::chrono::milliseconds(1), 0},
                             std::chrono::seconds(5), [](auto) {});
        CHECK_THROWS_AS(http.complete(request("x")), TransportError);
        CHECK(ep.hits() == 3);
    }
    {
        FakeEndpoint ep({401});
        HttpChatBackend http(ep.url(), "bad", RetryPolicy{3, std::chrono::milliseconds(1), 0},
                             std::chrono::seconds(5), [](auto) {});
        CHECK_THROWS_AS(http.complete(request("x")), ConfigError);
        CHECK(ep.hits() == 1);
    }
    {
        FakeEndpoint ep({400});
        HttpChatBackend http(ep.url(), std::nullopt, RetryPolicy{3, std::chrono::milliseconds(1), 0},
                             std::chrono::seconds(5), [](auto) {});
        CHECK_THROWS_AS(http.complete(request("x")), TransportError);
        CHECK(ep.hits() == 1);
    }
}
