#include "homectl/http_client.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <semaphore>
#include <thread>

#include <httplib.h>

#include "homectl/log.hpp"

namespace homectl {

namespace {

std::mutex g_log_mutex;
LogSink g_sink;

}  // namespace

void set_log_sink(LogSink sink) {
    std::lock_guard lock(g_log_mutex);
    g_sink = std::move(sink);
}

void log(LogLevel level, std::string_view message) {
    std::lock_guard lock(g_log_mutex);
    if (g_sink) {
        g_sink(level, message);
        return;
    }
    if (level >= LogLevel::Warn) {
        std::cerr << "[homectl] " << (level == LogLevel::Warn ? "warn: " : "error: ") << message << "\n";
    }
}

struct HttpJsonClient::Impl {
    std::string origin;     // scheme://host:port
    std::string base_path;  // path prefix without trailing slash
    std::counting_semaphore<4096> in_flight;

    explicit Impl(size_t cap) : in_flight(static_cast<std::ptrdiff_t>(cap == 0 ? 1 : cap)) {}
};

HttpJsonClient::HttpJsonClient(EndpointConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>(config_.max_in_flight)) {
    const auto& url = config_.url;
    auto scheme_end = url.find("://");
    if (url.empty() || scheme_end == std::string::npos) {
        throw std::invalid_argument("endpoint url must look like http://host:port/path, got '" + url + "'");
    }
    auto path_begin = url.find('/', scheme_end + 3);
    impl_->origin = url.substr(0, path_begin);
    impl_->base_path = path_begin == std::string::npos ? "" : url.substr(path_begin);
    while (!impl_->base_path.empty() && impl_->base_path.back() == '/') impl_->base_path.pop_back();
#ifndef HOMECTL_WITH_OPENSSL
    if (url.rfind("https://", 0) == 0) {
        throw std::invalid_argument("https endpoints need a build with OpenSSL support");
    }
#endif
}

HttpJsonClient::~HttpJsonClient() = default;

json HttpJsonClient::post(std::string_view path, const json& body) const {
    const std::string full_path = impl_->base_path + std::string(path);
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
    }

    impl_->in_flight.acquire();
    struct Release {
        std::counting_semaphore<4096>& s;
        ~Release() { s.release(); }
    } release{impl_->in_flight};

    const auto timeout = std::chrono::duration<double>(config_.timeout_s);
    const auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(timeout).count();
    bool last_was_timeout = false;
    std::string last_error;

    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0) {
            ++retries_;
            auto delay = config_.backoff_initial_s * static_cast<double>(1 << (attempt - 1));
            log(LogLevel::Warn, "retry " + std::to_string(attempt) + "/" + std::to_string(config_.retries) +
                                    " for " + impl_->origin + full_path + " after: " + last_error);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        ++requests_;
        httplib::Client cli(impl_->origin);
        cli.set_connection_timeout(timeout_us / 1000000, timeout_us % 1000000);
        cli.set_read_timeout(timeout_us / 1000000, timeout_us % 1000000);
        cli.set_write_timeout(timeout_us / 1000000, timeout_us % 1000000);
        auto res = cli.Post(full_path, headers, payload, "application/json");
        if (!res) {
            auto err = res.error();
            last_was_timeout = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
            last_error = httplib::to_string(err);
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_was_timeout = false;
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status >= 400) {
            throw EndpointError(EndpointError::Kind::Protocol, impl_->origin + full_path + " returned HTTP " +
                                                                   std::to_string(res->status) + ": " +
                                                                   res->body.substr(0, 200));
        }
        try {
            return json::parse(res->body);
        } catch (const json::parse_error& e) {
            throw EndpointError(EndpointError::Kind::Protocol,
                                impl_->origin + full_path + " returned invalid JSON: " + e.what());
        }
    }
    const auto kind = last_was_timeout ? EndpointError::Kind::Timeout : EndpointError::Kind::Unavailable;
    throw EndpointError(kind, impl_->origin + full_path + " failed after " + std::to_string(config_.retries + 1) +
                                  " attempts: " + last_error);
}

std::string chat_complete(const HttpJsonClient& client, const std::string& prompt) {
    const auto& cfg = client.config();
    json body = {{"model", cfg.model},
                 {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                 {"temperature", cfg.temperature},
                 {"max_tokens", cfg.max_tokens}};
    auto reply = client.post("/chat/completions", body);
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw EndpointError(EndpointError::Kind::Protocol, std::string("malformed chat completion: ") + e.what());
    }
}

}  // namespace homectl
