#pragma once

#include <atomic>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace homectl {

using json = nlohmann::json;

// Connection settings shared by policy and judge endpoints.
struct EndpointConfig {
    std::string url;           // base URL, e.g. http://127.0.0.1:8000/v1
    std::string model;
    std::string api_key_env;   // name of the env var holding the bearer token
    double timeout_s = 30.0;
    int retries = 2;
    double temperature = 0.0;
    double backoff_initial_s = 0.25;
    int max_tokens = 512;
    size_t max_in_flight = 8;
    bool supports_echo = false;  // /completions accepts echo + logprobs

    std::string id() const { return model.empty() ? url : model + "@" + url; }
};

class EndpointError : public std::runtime_error {
public:
    enum class Kind { Unavailable, Timeout, Protocol, CapabilityUnsupported };
    EndpointError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// JSON-over-HTTP POST with timeout, bounded in-flight requests and
// exponential-backoff retries on connection failures, 429 and 5xx.
class HttpJsonClient {
public:
    explicit HttpJsonClient(EndpointConfig config);
    ~HttpJsonClient();
    HttpJsonClient(const HttpJsonClient&) = delete;
    HttpJsonClient& operator=(const HttpJsonClient&) = delete;

    json post(std::string_view path, const json& body) const;

    const EndpointConfig& config() const { return config_; }
    size_t retries_performed() const { return retries_.load(); }
    size_t requests_sent() const { return requests_.load(); }

private:
    struct Impl;
    EndpointConfig config_;
    std::unique_ptr<Impl> impl_;
    mutable std::atomic<size_t> retries_{0};
    mutable std::atomic<size_t> requests_{0};
};

// POST {base}/chat/completions with a single user message; returns
// choices[0].message.content.
std::string chat_complete(const HttpJsonClient& client, const std::string& prompt);

}  // namespace homectl
