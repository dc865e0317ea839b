#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "homectl/http_client.hpp"
#include "homectl/pipeline.hpp"
#include "homectl/reward.hpp"

namespace homectl {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    size_t max_batch = 256;
    size_t parallelism = 8;  // rollouts scored concurrently across all requests
};

// JSON file with sections policy, judges, reward, retrieval, service. Every
// key is optional.
//
//   {"policy":    {"url": ..., "model": ..., "api_key_env": ..., "timeout_s": 30,
//                  "retries": 2, "temperature": 0, "supports_echo": false},
//    "judges":    {"reward": {endpoint}, "evaluation": [{endpoint} x3] | {endpoint}},
//    "reward":    {"lambda": 0.3, "mode": "veto", "additive_normalize": true,
//                  "epsilon": 1e-6, "fast": false, "unified": false},
//    "retrieval": {"k": 5, "threshold": 0.1, "update_threshold": 0.6,
//                  "delete_threshold": 0.35, "present_all_candidates": false},
//    "service":   {"host": "127.0.0.1", "port": 8080, "max_batch": 256, "parallelism": 8}}
struct AppConfig {
    EndpointConfig policy;
    EndpointConfig reward_judge;
    std::array<EndpointConfig, 3> eval_judges;
    RewardConfig reward;
    PipelineConfig pipeline;
    ServiceConfig service;

    static AppConfig from_json(const json& j);
    // Throws std::runtime_error naming the file on I/O or parse failure.
    static AppConfig load(const std::filesystem::path& path);

    // HOMECTL_POLICY_URL, HOMECTL_JUDGE_URL, HOMECTL_EVAL_JUDGE_URL replace the
    // corresponding endpoint URLs; HOMECTL_API_KEY_ENV names the key variable
    // for endpoints that do not set one.
    void apply_env();

    json to_json() const;
};

EndpointConfig endpoint_from_json(const json& j, EndpointConfig base = {});
json to_json(const EndpointConfig& e);

}  // namespace homectl
