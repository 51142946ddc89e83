#pragma once

// Human triage of inconsistent (bronze) records. ReviewStore holds the
// state machine and persistence; ReviewServer exposes it over HTTP.
//
//   GET  /api/queue?annotator=ID   {"item": ReviewItem | null}
//   POST /api/label                {record_id, annotator, q1, q2?, supersede?}
//   GET  /api/progress             counts, per-annotator totals, kappa, disagreements
//   GET  /api/gold                 current gold tier
//   GET  /api/config               {blind, double_annotation, lease_seconds}
//   GET  /api/guideline            {"text": ...}

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "afacta/core.hpp"
#include "afacta/dataset.hpp"

namespace afacta {

using Clock = std::function<std::chrono::system_clock::time_point()>;

struct ReviewConfig {
    std::chrono::seconds lease{300};
    // Each item needs two annotators; agreeing labels resolve it, otherwise
    // a third label does.
    bool double_annotation = false;
    // Strip model rationales from served items.
    bool blind = false;
};

std::string_view default_guideline_text() noexcept;

class ReviewStore {
public:
    // annotated is the whole campaign; inconsistent records form the queue.
    // Existing events in resolutions_log are replayed.
    ReviewStore(std::vector<AnnotatedRecord> annotated, std::filesystem::path resolutions_log,
                ReviewConfig config = {}, Clock clock = {});

    // Next item for this annotator, leased to them; nullopt when none.
    std::optional<nlohmann::json> next_for(const std::string& annotator);

    // Records an answer. NotFoundError, ValidationError or ConflictError.
    nlohmann::json label(const std::string& record_id, const std::string& annotator,
                         const GuidelineAnswer& answer, bool supersede = false);

    nlohmann::json progress() const;
    nlohmann::json gold() const;
    TierPartition partition() const;
    nlohmann::json item(const std::string& record_id) const;

    const ReviewConfig& config() const noexcept { return config_; }
    std::size_t queue_size() const noexcept { return order_.size(); }

private:
    struct Lease {
        std::string annotator;
        std::chrono::system_clock::time_point expires;
    };
    struct Labeled {
        std::string annotator;
        GuidelineAnswer answer;
        std::string timestamp;
    };
    struct Entry {
        const AnnotatedRecord* rec = nullptr;
        std::vector<Labeled> labels;  // latest per annotator, first-label order
        std::optional<Labeled> resolution;
        std::optional<Lease> lease;
    };

    void apply(const ResolutionEvent& e);
    nlohmann::json item_json(const Entry& e) const;
    bool leased_to_other(const Entry& e, const std::string& annotator,
                         std::chrono::system_clock::time_point now) const;
    std::string timestamp() const;

    std::vector<AnnotatedRecord> annotated_;
    std::filesystem::path log_;
    ReviewConfig config_;
    Clock clock_;
    std::map<std::string, Entry> entries_;
    std::vector<std::string> order_;  // queue order: corpus, then position
    mutable std::mutex mu_;
};

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::optional<std::filesystem::path> static_dir;
    std::string guideline{default_guideline_text()};
};

class ReviewServer {
public:
    ReviewServer(ReviewStore& store, ServerOptions options);
    ~ReviewServer();

    // Binds and starts serving on a background thread; Error if the address
    // cannot be bound.
    void start();
    void stop();
    // Binds and serves on the calling thread until stop().
    void run();

    int port() const noexcept { return port_; }

private:
    void bind();

    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string host_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace afacta
