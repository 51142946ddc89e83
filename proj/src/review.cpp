#include "afacta/review.hpp"

#include <algorithm>
#include <ctime>
#include <iomanip>
#include <sstream>

#include <httplib.h>

#include "afacta/errors.hpp"
#include "afacta/json_io.hpp"
#include "afacta/metrics.hpp"

namespace afacta {

using nlohmann::json;
using SysClock = std::chrono::system_clock;

std::string_view default_guideline_text() noexcept {
    return R"(Labeling guideline

Read the target sentence together with the sentence before and after it.

Q1. Does the target sentence state, on its own terms, some piece of information
that could be checked against evidence?
  A. Yes: it names specific events, figures, actions, people or places that an
     investigator could look up.
  B. Maybe: it carries information, but vaguely or mixed with judgement.
  C. No: it is opinion, a promise, a question, a greeting, or otherwise carries
     nothing checkable.

Q2 (only when Q1 is B). Which way does the sentence lean?
  A. Towards checkable information.
  B. Towards subjective opinion.

Resulting label: A, or B then A, is FactualClaim. C, or B then B, is NonClaim.
)";
}

ReviewStore::ReviewStore(std::vector<AnnotatedRecord> annotated, std::filesystem::path log,
                         ReviewConfig config, Clock clock)
    : annotated_(std::move(annotated)), log_(std::move(log)), config_(config),
      clock_(clock ? std::move(clock) : Clock([] { return SysClock::now(); })) {
    std::vector<const AnnotatedRecord*> bronze;
    for (const auto& a : annotated_) {
        if (a.annotation.tier == Tier::Inconsistent) bronze.push_back(&a);
    }
    std::stable_sort(bronze.begin(), bronze.end(), [](auto* x, auto* y) {
        return std::tie(x->record.corpus_id, x->record.position) <
               std::tie(y->record.corpus_id, y->record.position);
    });
    for (auto* a : bronze) {
        if (!entries_.emplace(a->record.record_id, Entry{a, {}, {}, {}}).second) {
            throw DataError("duplicate record in review set: " + a->record.record_id);
        }
        order_.push_back(a->record.record_id);
    }
    auto events = read_resolutions(log_);
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (!entries_.count(events[i].record_id)) {
            throw DataError(log_.string() + ": event " + std::to_string(i + 1) +
                            " refers to unknown record " + events[i].record_id);
        }
        apply(events[i]);
    }
}

void ReviewStore::apply(const ResolutionEvent& e) {
    auto& entry = entries_.at(e.record_id);
    Labeled l{e.annotator, e.answer, e.timestamp};
    if (e.kind == ResolutionEvent::Kind::Resolve) {
        entry.resolution = l;
        entry.lease.reset();
        return;
    }
    auto it = std::find_if(entry.labels.begin(), entry.labels.end(),
                           [&](const Labeled& x) { return x.annotator == e.annotator; });
    if (it == entry.labels.end()) {
        entry.labels.push_back(l);
    } else {
        *it = l;
    }
    if (entry.lease && entry.lease->annotator == e.annotator) entry.lease.reset();
}

std::string ReviewStore::timestamp() const {
    auto t = SysClock::to_time_t(clock_());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

bool ReviewStore::leased_to_other(const Entry& e, const std::string& annotator,
                                  SysClock::time_point now) const {
    return e.lease && e.lease->annotator != annotator && e.lease->expires > now;
}

std::optional<json> ReviewStore::next_for(const std::string& annotator) {
    if (annotator.empty()) throw ValidationError("annotator id is required");
    std::lock_guard lock(mu_);
    const auto now = clock_();
    Entry* chosen = nullptr;
    for (const auto& id : order_) {
        auto& e = entries_.at(id);
        if (e.resolution || leased_to_other(e, annotator, now)) continue;
        bool already = std::any_of(e.labels.begin(), e.labels.end(),
                                   [&](const Labeled& l) { return l.annotator == annotator; });
        if (already) continue;
        chosen = &e;
        break;
    }
    if (!chosen) return std::nullopt;
    // One outstanding lease per annotator.
    for (auto& [id, e] : entries_) {
        if (&e != chosen && e.lease && e.lease->annotator == annotator) e.lease.reset();
    }
    chosen->lease = Lease{annotator, now + config_.lease};
    return item_json(*chosen);
}

json ReviewStore::label(const std::string& record_id, const std::string& annotator,
                        const GuidelineAnswer& answer, bool supersede) {
    if (annotator.empty()) throw ValidationError("annotator id is required");
    answer.validate();
    std::lock_guard lock(mu_);
    auto it = entries_.find(record_id);
    if (it == entries_.end()) throw NotFoundError("no review item " + record_id);
    auto& entry = it->second;
    if (entry.resolution && !supersede) {
        throw ConflictError(record_id + " is already resolved; resend with supersede to replace");
    }
    const bool relabel = std::any_of(entry.labels.begin(), entry.labels.end(),
                                     [&](const Labeled& l) { return l.annotator == annotator; });
    if (relabel && !supersede) {
        throw ConflictError(annotator + " already labeled " + record_id);
    }

    const auto ts = timestamp();
    const auto projected = project_guideline_answer(answer);
    ResolutionEvent lab{ResolutionEvent::Kind::Label, record_id, annotator, answer, projected, ts,
                        supersede};
    append_resolution(log_, lab);
    apply(lab);

    std::optional<ResolutionEvent> resolve;
    if (!config_.double_annotation || supersede) {
        resolve = lab;
    } else if (entry.labels.size() == 2) {
        if (project_guideline_answer(entry.labels[0].answer) ==
            project_guideline_answer(entry.labels[1].answer)) {
            resolve = lab;
        }
    } else if (entry.labels.size() > 2) {
        resolve = lab;
    }
    if (resolve) {
        resolve->kind = ResolutionEvent::Kind::Resolve;
        append_resolution(log_, *resolve);
        apply(*resolve);
    }
    return item_json(entry);
}

json ReviewStore::item_json(const Entry& e) const {
    const auto& a = *e.rec;
    json verdicts = json::array();
    json rationales = json::object();
    for (const auto& v : a.annotation.verdicts) {
        json vj{{"step", std::string(to_string(v.step))},
                {"stance", v.stance ? json(std::string(to_string(*v.stance))) : json(nullptr)},
                {"vote_weight", v.vote_weight.votes()}};
        verdicts.push_back(vj);
        json r{{"raw", v.raw_response}};
        if (v.structured) r["structured"] = *v.structured;
        rationales[std::string(to_string(v.step))] = r;
    }
    rationales["ArgumentVerifiable"] = json{{"raw", a.argument_verifiable.text}};
    rationales["ArgumentUnverifiable"] = json{{"raw", a.argument_unverifiable.text}};

    json labels = json::array();
    for (const auto& l : e.labels) {
        labels.push_back({{"annotator", l.annotator},
                          {"answer", l.answer},
                          {"label", std::string(to_string(project_guideline_answer(l.answer)))},
                          {"timestamp", l.timestamp}});
    }
    json j{{"record", a.record},
           {"annotation",
            {{"vote_total", a.annotation.vote_total.votes()},
             {"threshold", kLabelThreshold.votes()},
             {"label", std::string(to_string(a.annotation.label))},
             {"tier", std::string(to_string(a.annotation.tier))},
             {"provisional", a.annotation.provisional},
             {"verdicts", verdicts}}},
           {"status", e.resolution ? "Resolved" : "Unreviewed"},
           {"labels", labels},
           {"resolution", nullptr}};
    if (!config_.blind) j["rationales"] = rationales;
    if (e.resolution) {
        j["resolution"] = {
            {"annotator", e.resolution->annotator},
            {"answer", e.resolution->answer},
            {"label", std::string(to_string(project_guideline_answer(e.resolution->answer)))},
            {"timestamp", e.resolution->timestamp}};
    }
    return j;
}

json ReviewStore::item(const std::string& record_id) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(record_id);
    if (it == entries_.end()) throw NotFoundError("no review item " + record_id);
    return item_json(it->second);
}

json ReviewStore::progress() const {
    std::lock_guard lock(mu_);
    std::size_t resolved = 0;
    std::map<std::string, std::size_t> per_annotator;
    std::vector<BinaryLabel> first, second;
    json disagreements = json::array();
    for (const auto& id : order_) {
        const auto& e = entries_.at(id);
        resolved += e.resolution.has_value();
        for (const auto& l : e.labels) ++per_annotator[l.annotator];
        if (e.labels.size() >= 2) {
            auto x = project_guideline_answer(e.labels[0].answer);
            auto y = project_guideline_answer(e.labels[1].answer);
            first.push_back(x);
            second.push_back(y);
            if (x != y) disagreements.push_back(id);
        }
    }
    json per = json::object();
    for (const auto& [who, n] : per_annotator) per[who] = n;
    return json{{"total", order_.size()},
                {"unreviewed", order_.size() - resolved},
                {"resolved", resolved},
                {"per_annotator", per},
                {"doubly_labeled", first.size()},
                {"kappa", first.empty() ? json(nullptr) : json(cohen_kappa(first, second))},
                {"disagreements", disagreements}};
}

TierPartition ReviewStore::partition() const {
    std::map<std::string, BinaryLabel> resolutions;
    {
        std::lock_guard lock(mu_);
        for (const auto& [id, e] : entries_) {
            if (e.resolution) resolutions[id] = project_guideline_answer(e.resolution->answer);
        }
    }
    return partition_tiers(annotated_, resolutions);
}

json ReviewStore::gold() const {
    json rows = json::array();
    for (const auto& g : partition().gold) {
        rows.push_back({{"record_id", g.record_id},
                        {"text", g.text},
                        {"label", std::string(to_string(g.label))},
                        {"human_resolved", g.human_resolved}});
    }
    return json{{"count", rows.size()}, {"records", rows}};
}

// ---------------------------------------------------------------- server

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& msg) {
    send_json(res, status, json{{"error", msg}});
}

// Accepts the enum names and the bare letters a form would send.
std::string expand_choice(std::string s, std::string_view a, std::string_view b,
                          std::string_view c = {}) {
    if (s == "A") return std::string(a);
    if (s == "B") return std::string(b);
    if (s == "C" && !c.empty()) return std::string(c);
    return s;
}

}  // namespace

struct ReviewServer::Impl {
    httplib::Server server;
};

ReviewServer::ReviewServer(ReviewStore& store, ServerOptions options)
    : impl_(std::make_unique<Impl>()) {
    auto& srv = impl_->server;
    // httplib defaults to SO_REUSEPORT, which would let a second server share the port.
    srv.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    port_ = options.port;
    host_ = options.host;

    srv.Get("/api/queue", [&store](const httplib::Request& req, httplib::Response& res) {
        auto who = req.get_param_value("annotator");
        if (who.empty()) return send_error(res, 400, "annotator query parameter is required");
        auto item = store.next_for(who);
        send_json(res, 200, json{{"item", item ? *item : json(nullptr)}});
    });

    srv.Post("/api/label", [&store](const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) {
            return send_error(res, 400, "request body must be a JSON object");
        }
        try {
            auto str = [&](const char* key) -> std::string {
                if (!body.contains(key) || !body[key].is_string()) {
                    throw ValidationError(std::string("missing string field '") + key + "'");
                }
                return body[key].get<std::string>();
            };
            GuidelineAnswer answer;
            answer.q1 = parse_q1(expand_choice(str("q1"), "A_Yes", "B_Maybe", "C_No"));
            if (body.contains("q2") && !body["q2"].is_null()) {
                answer.q2 = parse_q2(expand_choice(str("q2"), "A_LeansFact", "B_LeansOpinion"));
            }
            bool supersede = body.value("supersede", false);
            send_json(res, 200, store.label(str("record_id"), str("annotator"), answer, supersede));
        } catch (const ValidationError& e) {
            send_error(res, 400, e.what());
        } catch (const NotFoundError& e) {
            send_error(res, 404, e.what());
        } catch (const ConflictError& e) {
            send_error(res, 409, e.what());
        } catch (const nlohmann::json::exception& e) {
            send_error(res, 400, e.what());
        }
    });

    srv.Get("/api/progress", [&store](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, store.progress());
    });
    srv.Get("/api/gold", [&store](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, store.gold());
    });
    srv.Get("/api/config", [&store](const httplib::Request&, httplib::Response& res) {
        const auto& c = store.config();
        send_json(res, 200,
                  json{{"blind", c.blind},
                       {"double_annotation", c.double_annotation},
                       {"lease_seconds", c.lease.count()}});
    });
    srv.Get("/api/guideline",
            [text = options.guideline](const httplib::Request&, httplib::Response& res) {
                send_json(res, 200, json{{"text", text}});
            });

    srv.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                send_error(res, 500, e.what());
            } catch (...) {
                send_error(res, 500, "internal error");
            }
        });

    if (options.static_dir) {
        if (!srv.set_mount_point("/", options.static_dir->string())) {
            throw ConfigError("static directory not found: " + options.static_dir->string());
        }
    }
}

ReviewServer::~ReviewServer() { stop(); }

void ReviewServer::bind() {
    auto& srv = impl_->server;
    if (port_ == 0) {
        port_ = srv.bind_to_any_port(host_);
        if (port_ < 0) throw ConfigError("cannot bind " + host_);
    } else if (!srv.bind_to_port(host_, port_)) {
        throw ConfigError("cannot bind " + host_ + ":" + std::to_string(port_));
    }
}

void ReviewServer::start() {
    bind();
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void ReviewServer::run() {
    bind();
    impl_->server.listen_after_bind();
}

void ReviewServer::stop() {
    if (impl_) impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace afacta
