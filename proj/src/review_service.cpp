#include "labharm/review_service.hpp"

#include <algorithm>
#include <charconv>

#include <httplib.h>

#include "labharm/error.hpp"
#include "labharm/text.hpp"

namespace labharm {

namespace {

ApiResponse error_response(int status, const std::string& message) { return {status, {{"error", message}}}; }

std::optional<std::size_t> parse_count(const std::string& s) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

nlohmann::json queue_item(const HarmonizationResult& r) {
    nlohmann::json top = nullptr;
    if (!r.candidates.empty()) {
        const auto& c = r.candidates.front();
        top = {{"record_id", c.record_id}, {"final", c.final_score}};
        if (!r.candidate_triads.empty()) {
            const auto& t = r.candidate_triads.front();
            top["triad"] = {{"test", t.test()}, {"sample", t.sample()}, {"unit", t.unit()}};
        }
    }
    return {{"query_id", r.query_id},
            {"query", {{"test", r.query.test()}, {"sample", r.query.sample()}, {"unit", r.query.unit()}}},
            {"tag", to_string(r.tag)},
            {"top", std::move(top)},
            {"candidate_count", r.candidates.size()}};
}

}  // namespace

ReviewService::ReviewService(std::vector<HarmonizationResult> results, std::filesystem::path results_path,
                             std::filesystem::path feedback_path)
    : results_path_(std::move(results_path)), log_(std::move(feedback_path)) {
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (!index_.emplace(results[i].query_id, i).second) {
            throw DuplicateIdError("duplicate query id in results: " + results[i].query_id);
        }
    }
    results_ = std::make_shared<const std::vector<HarmonizationResult>>(std::move(results));
}

ReviewService ReviewService::open(const std::filesystem::path& results_path,
                                  const std::filesystem::path& feedback_path) {
    return ReviewService(read_results(results_path), results_path, feedback_path);
}

ReviewService::Snapshot ReviewService::current() const {
    std::shared_lock lock(snapshot_mutex_);
    return results_;
}

std::vector<HarmonizationResult> ReviewService::snapshot() const { return *current(); }

ApiResponse ReviewService::queue(const std::string& statuses, const std::string& limit,
                                 const std::string& offset) const {
    std::vector<TagStatus> wanted;
    if (statuses.empty()) {
        wanted = {TagStatus::Pending, TagStatus::Reranked};
    } else {
        for (const auto& part : split(statuses, ',')) {
            try {
                wanted.push_back(parse_tag_status(trim(part)));
            } catch (const Error&) {
                return error_response(400, "unknown status '" + std::string(part) + "'");
            }
        }
    }
    std::size_t lim = 50, off = 0;
    if (!limit.empty()) {
        const auto v = parse_count(limit);
        if (!v) return error_response(400, "limit must be a non-negative integer");
        lim = *v;
    }
    if (!offset.empty()) {
        const auto v = parse_count(offset);
        if (!v) return error_response(400, "offset must be a non-negative integer");
        off = *v;
    }
    const auto snap = current();
    nlohmann::json items = nlohmann::json::array();
    std::size_t matched = 0;
    for (const auto& r : *snap) {
        if (std::find(wanted.begin(), wanted.end(), r.tag) == wanted.end()) continue;
        if (matched >= off && items.size() < lim) items.push_back(queue_item(r));
        ++matched;
    }
    return {200, {{"items", std::move(items)}, {"total", matched}, {"offset", off}, {"limit", lim}}};
}

ApiResponse ReviewService::result(const std::string& query_id) const {
    const auto it = index_.find(query_id);
    if (it == index_.end()) return error_response(404, "unknown query id '" + query_id + "'");
    const auto snap = current();
    const auto& r = (*snap)[it->second];
    auto j = r.to_json();
    j["timestamp"] = r.timestamp;
    return {200, std::move(j)};
}

ApiResponse ReviewService::verdict(const std::string& body) {
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return error_response(400, "body must be a JSON object");
    if (!j.contains("query_id") || !j["query_id"].is_string()) return error_response(400, "query_id is required");
    if (!j.contains("verdict") || !j["verdict"].is_string()) return error_response(400, "verdict is required");
    if (!j.contains("reviewer") || !j["reviewer"].is_string() || trim(j["reviewer"].get<std::string>()).empty()) {
        return error_response(400, "reviewer is required");
    }
    std::optional<std::string> candidate_id;
    if (j.contains("candidate_id") && !j["candidate_id"].is_null()) {
        if (!j["candidate_id"].is_string()) return error_response(400, "candidate_id must be a string or null");
        candidate_id = j["candidate_id"].get<std::string>();
    }
    bool force = false;
    if (j.contains("force")) {
        if (!j["force"].is_boolean()) return error_response(400, "force must be a boolean");
        force = j["force"].get<bool>();
    }
    const auto verdict = j["verdict"].get<std::string>();
    if (verdict != "accept" && verdict != "override" && verdict != "reject") {
        return error_response(400, "verdict must be accept, override or reject");
    }
    const auto query_id = j["query_id"].get<std::string>();
    const auto reviewer = trim(j["reviewer"].get<std::string>());

    std::lock_guard write(write_mutex_);
    const auto it = index_.find(query_id);
    if (it == index_.end()) return error_response(404, "unknown query id '" + query_id + "'");
    auto next = std::make_shared<std::vector<HarmonizationResult>>(*current());
    auto& r = (*next)[it->second];
    if ((r.tag == TagStatus::Verified || r.tag == TagStatus::Human) && !force) {
        return error_response(409, "query '" + query_id + "' already decided; resend with force");
    }

    std::optional<std::size_t> pos;
    if (candidate_id) {
        for (std::size_t i = 0; i < r.candidates.size(); ++i) {
            if (r.candidates[i].record_id == *candidate_id) pos = i;
        }
        if (!pos) return error_response(400, "candidate '" + *candidate_id + "' is not among the candidates");
    }

    FeedbackEvent e;
    e.query_id = r.query_id;
    e.query = r.query;
    e.reviewer = reviewer;
    if (verdict == "reject") {
        const auto target = pos ? pos : (r.candidates.empty() ? std::nullopt : std::optional<std::size_t>(0));
        if (target) {
            e.candidate_id = r.candidates[*target].record_id;
            e.candidate = r.candidate_triads.at(*target);
        }
        e.verdict = "reject";
        r.tag = TagStatus::Human;
        r.chosen.reset();
    } else {
        if (r.candidates.empty()) return error_response(400, "query has no candidates to accept");
        if (verdict == "override" && !pos) return error_response(400, "override needs candidate_id");
        const std::size_t chosen = pos.value_or(0);
        e.candidate_id = r.candidates[chosen].record_id;
        e.candidate = r.candidate_triads.at(chosen);
        e.verdict = "accept";
        r.tag = chosen == 0 ? TagStatus::Verified : TagStatus::Human;
        r.chosen = r.candidates[chosen].record_id;
    }
    r.decided_by = "human";
    r.rule = verdict;

    auto stamp = utc_timestamp();
    auto& last = last_stamp_[reviewer];
    if (stamp < last) stamp = last;
    last = stamp;
    e.timestamp = stamp;
    r.timestamp = stamp;

    try {
        log_.append(e);
        write_results(results_path_, *next);
    } catch (const Error& ex) {
        return error_response(500, ex.what());
    }
    auto out = r.to_json();
    out["timestamp"] = r.timestamp;
    {
        std::unique_lock lock(snapshot_mutex_);
        results_ = std::move(next);
    }
    return {200, std::move(out)};
}

ApiResponse ReviewService::stats() const {
    const auto snap = current();
    nlohmann::json tags = nlohmann::json::object();
    for (auto t : {TagStatus::Missing, TagStatus::Verified, TagStatus::Pending, TagStatus::Human, TagStatus::Copy,
                   TagStatus::Reranked}) {
        tags[std::string(to_string(t))] = 0;
    }
    for (const auto& r : *snap) tags[std::string(to_string(r.tag))] = tags[std::string(to_string(r.tag))].get<int>() + 1;
    return {200, {{"tags", std::move(tags)}, {"total", snap->size()}, {"feedback_events", log_.size()}}};
}

ApiResponse ReviewService::health() const { return {200, {{"status", "ok"}, {"results", current()->size()}}}; }

// ---------------------------------------------------------------- HTTP

ReviewServer::ReviewServer(ReviewService& service, std::filesystem::path ui_dir)
    : service_(&service), server_(std::make_unique<httplib::Server>()) {
    auto send = [](httplib::Response& res, const ApiResponse& a) {
        res.status = a.status;
        res.set_content(a.body.dump(), "application/json");
    };
    server_->set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                  {"Access-Control-Allow-Headers", "Content-Type"},
                                  {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server_->Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server_->Get("/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, service_->health()); });
    server_->Get("/stats", [this, send](const httplib::Request&, httplib::Response& res) { send(res, service_->stats()); });
    server_->Get("/queue", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service_->queue(req.get_param_value("status"), req.get_param_value("limit"),
                                  req.get_param_value("offset")));
    });
    server_->Get(R"(/result/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service_->result(req.matches[1].str()));
    });
    server_->Post("/verdict", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service_->verdict(req.body));
    });
    if (!ui_dir.empty()) {
        if (!server_->set_mount_point("/", ui_dir.string())) throw FileError("cannot serve " + ui_dir.string());
    }
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void ReviewServer::listen() { server_->listen_after_bind(); }

void ReviewServer::stop() {
    if (server_) server_->stop();
}

}  // namespace labharm
