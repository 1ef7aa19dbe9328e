#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "labharm/pipeline.hpp"

namespace httplib {
class Server;
}

namespace labharm {

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

/// Review queue over persisted harmonization results. Handlers are plain
/// functions so they can be exercised without a socket; ReviewServer
/// exposes them over HTTP.
class ReviewService {
public:
    ReviewService(std::vector<HarmonizationResult> results, std::filesystem::path results_path,
                  std::filesystem::path feedback_path);

    /// Loads results from disk.
    static ReviewService open(const std::filesystem::path& results_path, const std::filesystem::path& feedback_path);

    /// statuses: comma list of tags, empty means Pending,Reranked.
    ApiResponse queue(const std::string& statuses, const std::string& limit, const std::string& offset) const;
    ApiResponse result(const std::string& query_id) const;
    /// {query_id, candidate_id|null, verdict: accept|override|reject, reviewer, force?}
    ApiResponse verdict(const std::string& body);
    ApiResponse stats() const;
    ApiResponse health() const;

    std::vector<HarmonizationResult> snapshot() const;

private:
    using Snapshot = std::shared_ptr<const std::vector<HarmonizationResult>>;
    Snapshot current() const;

    std::filesystem::path results_path_;
    FeedbackLog log_;
    std::unordered_map<std::string, std::size_t> index_;

    mutable std::shared_mutex snapshot_mutex_;
    Snapshot results_;
    std::mutex write_mutex_;
    std::unordered_map<std::string, std::string> last_stamp_;  // per reviewer
};

class ReviewServer {
public:
    /// ui_dir may be empty.
    ReviewServer(ReviewService& service, std::filesystem::path ui_dir = {});
    ~ReviewServer();
    ReviewServer(const ReviewServer&) = delete;
    ReviewServer& operator=(const ReviewServer&) = delete;

    /// port 0 picks a free port; returns the bound port. Throws Error.
    int bind(const std::string& host, int port);
    void listen();  // blocks until stop()
    void stop();

private:
    ReviewService* service_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace labharm
