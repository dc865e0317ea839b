#pragma once

#include <memory>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "homectl/config.hpp"
#include "homectl/judge.hpp"
#include "homectl/model_client.hpp"
#include "homectl/reward.hpp"

namespace homectl {

struct JudgeContext {
    std::string query;
    std::vector<std::string> history;
    std::vector<std::string> memory;
};

struct RolloutRequest {
    std::optional<std::string> sample_id;
    std::string generated_text;
    std::string ground_truth_text;
    PrefixCategory gt_prefix_category = PrefixCategory::NoRewrite;
    std::optional<std::vector<double>> prefix_logprobs;
    JudgeContext judge_context;
};

struct ConfigOverrides {
    std::optional<double> lambda;
    std::optional<RewardMode> mode;
};

struct ScoreRequest {
    std::vector<RolloutRequest> rollouts;
    ConfigOverrides config_overrides;

    // Throws ServiceError(400) describing the offending field.
    static ScoreRequest from_json(const json& j);
    json to_json() const;
};

struct RolloutResult {
    std::optional<std::string> sample_id;
    RewardBreakdown breakdown;
};

struct ScoreResponse {
    std::vector<RolloutResult> results;
    json to_json() const;
};

class ServiceError : public std::runtime_error {
public:
    ServiceError(int status, const std::string& message) : std::runtime_error(message), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

struct HttpReply {
    int status = 200;
    std::string body;
};

// Converts a request rollout into the library's scoring input.
RolloutInput to_rollout_input(const RolloutRequest& r);

// Stateless reward scorer behind POST /v1/score and GET /healthz.
class RewardService {
public:
    // `fallback` scores prefixes for rollouts that arrive without
    // prefix_logprobs; without it such rollouts are rejected with 400.
    RewardService(DimensionJudges judges, RewardConfig reward, ServiceConfig config,
                  std::shared_ptr<Policy> fallback = nullptr);
    ~RewardService();
    RewardService(const RewardService&) = delete;
    RewardService& operator=(const RewardService&) = delete;

    // Throws ServiceError: 400 schema, 413 batch too large, 502 endpoint failure.
    ScoreResponse handle_score(const ScoreRequest& req) const;
    // Parses the body and maps errors to status codes; never throws.
    HttpReply handle_score_body(std::string_view body) const;

    // Starts serving on a background thread. Port 0 picks a free port.
    // Returns the bound port; throws std::runtime_error when binding fails.
    int start(const std::string& host, int port);
    // Blocks until stop() is called from elsewhere.
    void serve_forever(const std::string& host, int port);
    void stop();
    int port() const { return port_; }

    const DimensionJudges& judges() const { return judges_; }

private:
    struct Server;

    RewardBreakdown score_one(const RolloutRequest& r, const RewardConfig& cfg) const;
    void install_routes();

    DimensionJudges judges_;
    RewardConfig reward_;
    ServiceConfig config_;
    std::shared_ptr<Policy> fallback_;
    mutable std::counting_semaphore<4096> slots_;
    std::unique_ptr<Server> server_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace homectl
