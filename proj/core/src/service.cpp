#include "homectl/service.hpp"

#include <httplib.h>

#include "homectl/log.hpp"
#include "homectl/parallel.hpp"
#include "homectl/text.hpp"

namespace homectl {

namespace {

std::optional<PrefixCategory> category_from_wire(const std::string& s) {
    std::string k = text::ascii_lower(s);
    for (char& c : k)
        if (c == '-') c = '_';
    if (k == "norewrite") k = "no_rewrite";
    return prefix_category_from_string(k);
}

[[noreturn]] void bad(const std::string& msg) { throw ServiceError(400, msg); }

std::vector<std::string> string_list(const json& j, const std::string& field) {
    if (!j.is_array()) bad(field + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& v : j) {
        if (!v.is_string()) bad(field + " must be an array of strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

std::string required_string(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) bad(where + "." + key + " must be a string");
    return it->get<std::string>();
}

}  // namespace

ScoreRequest ScoreRequest::from_json(const json& j) {
    if (!j.is_object()) bad("request body must be a JSON object");
    auto rs = j.find("rollouts");
    if (rs == j.end() || !rs->is_array()) bad("rollouts must be an array");
    if (rs->empty()) bad("rollouts must not be empty");
    ScoreRequest req;
    for (size_t i = 0; i < rs->size(); ++i) {
        const json& r = (*rs)[i];
        const std::string where = "rollouts[" + std::to_string(i) + "]";
        if (!r.is_object()) bad(where + " must be an object");
        RolloutRequest out;
        if (auto it = r.find("sample_id"); it != r.end() && !it->is_null()) {
            if (!it->is_string()) bad(where + ".sample_id must be a string");
            out.sample_id = it->get<std::string>();
        }
        out.generated_text = required_string(r, "generated_text", where);
        out.ground_truth_text = required_string(r, "ground_truth_text", where);
        auto cat = category_from_wire(required_string(r, "gt_prefix_category", where));
        if (!cat) bad(where + ".gt_prefix_category must be memory, rewrite or no_rewrite");
        out.gt_prefix_category = *cat;
        if (auto it = r.find("prefix_logprobs"); it != r.end() && !it->is_null()) {
            if (!it->is_array() || it->empty()) bad(where + ".prefix_logprobs must be a non-empty array");
            std::vector<double> lps;
            for (const auto& v : *it) {
                if (!v.is_number()) bad(where + ".prefix_logprobs must hold numbers");
                const double lp = v.get<double>();
                if (!(lp <= 0.0)) bad(where + ".prefix_logprobs entries must be <= 0");
                lps.push_back(lp);
            }
            out.prefix_logprobs = std::move(lps);
        }
        if (auto it = r.find("judge_context"); it != r.end() && !it->is_null()) {
            if (!it->is_object()) bad(where + ".judge_context must be an object");
            if (it->contains("query")) out.judge_context.query = required_string(*it, "query", where + ".judge_context");
            if (it->contains("history")) out.judge_context.history = string_list(it->at("history"), where + ".judge_context.history");
            if (it->contains("memory")) out.judge_context.memory = string_list(it->at("memory"), where + ".judge_context.memory");
        }
        req.rollouts.push_back(std::move(out));
    }
    if (auto co = j.find("config_overrides"); co != j.end() && !co->is_null()) {
        if (!co->is_object()) bad("config_overrides must be an object");
        if (auto it = co->find("lambda"); it != co->end()) {
            if (!it->is_number()) bad("config_overrides.lambda must be a number");
            const double l = it->get<double>();
            if (!(l >= 0.0 && l <= 1.0)) bad("config_overrides.lambda must be in [0,1]");
            req.config_overrides.lambda = l;
        }
        if (auto it = co->find("mode"); it != co->end()) {
            auto m = it->is_string() ? reward_mode_from_string(it->get<std::string>()) : std::nullopt;
            if (!m) bad("config_overrides.mode must be \"veto\" or \"additive\"");
            req.config_overrides.mode = *m;
        }
    }
    return req;
}

json ScoreRequest::to_json() const {
    json rs = json::array();
    for (const auto& r : rollouts) {
        json o = {{"generated_text", r.generated_text},
                  {"ground_truth_text", r.ground_truth_text},
                  {"gt_prefix_category", to_string(r.gt_prefix_category)},
                  {"judge_context",
                   {{"query", r.judge_context.query},
                    {"history", r.judge_context.history},
                    {"memory", r.judge_context.memory}}}};
        if (r.sample_id) o["sample_id"] = *r.sample_id;
        if (r.prefix_logprobs) o["prefix_logprobs"] = *r.prefix_logprobs;
        rs.push_back(std::move(o));
    }
    json j = {{"rollouts", rs}};
    json co = json::object();
    if (config_overrides.lambda) co["lambda"] = *config_overrides.lambda;
    if (config_overrides.mode) co["mode"] = to_string(*config_overrides.mode);
    if (!co.empty()) j["config_overrides"] = co;
    return j;
}

json ScoreResponse::to_json() const {
    json rs = json::array();
    for (const auto& r : results) {
        json o = r.breakdown.to_json();
        if (r.sample_id) o["sample_id"] = *r.sample_id;
        rs.push_back(std::move(o));
    }
    return {{"results", rs}};
}

RolloutInput to_rollout_input(const RolloutRequest& r) {
    RolloutInput in;
    in.request.query = r.judge_context.query;
    in.request.history = r.judge_context.history;
    in.request.memories = r.judge_context.memory;
    in.request.ground_truth = r.ground_truth_text;
    in.request.predicted = r.generated_text;
    in.gt_category = r.gt_prefix_category;
    if (r.prefix_logprobs) in.prefix_logprobs = *r.prefix_logprobs;
    return in;
}

// ---------------------------------------------------------------------------

struct RewardService::Server {
    httplib::Server http;
};

RewardService::RewardService(DimensionJudges judges, RewardConfig reward, ServiceConfig config,
                             std::shared_ptr<Policy> fallback)
    : judges_(std::move(judges)),
      reward_(reward),
      config_(config),
      fallback_(std::move(fallback)),
      slots_(static_cast<std::ptrdiff_t>(std::clamp<size_t>(config.parallelism, 1, 4096))) {
    reward_.validate();
}

RewardService::~RewardService() { stop(); }

RewardBreakdown RewardService::score_one(const RolloutRequest& r, const RewardConfig& cfg) const {
    RolloutInput in = to_rollout_input(r);
    if (!r.prefix_logprobs && prefix_match(r.generated_text, r.gt_prefix_category)) {
        // Teacher-forced log-probabilities were not supplied; ask the policy.
        PolicyContext ctx;
        ctx.query = r.judge_context.query;
        for (const auto& h : r.judge_context.history) ctx.history.push_back({Role::User, h});
        ctx.retrieved_memories = r.judge_context.memory;
        auto surface = prefix_surface(r.ground_truth_text);
        const std::string prefix = surface ? *surface : canonical_prefix(r.gt_prefix_category, Lexicon::Chinese);
        in.prefix_logprobs = fallback_->score_prefix(ctx, prefix);
    }
    slots_.acquire();
    try {
        auto b = score_rollout(in, judges_, cfg);
        slots_.release();
        return b;
    } catch (...) {
        slots_.release();
        throw;
    }
}

ScoreResponse RewardService::handle_score(const ScoreRequest& req) const {
    if (req.rollouts.empty()) throw ServiceError(400, "rollouts must not be empty");
    if (req.rollouts.size() > config_.max_batch) {
        throw ServiceError(413, "batch of " + std::to_string(req.rollouts.size()) + " exceeds max_batch " +
                                    std::to_string(config_.max_batch));
    }
    if (!fallback_) {
        for (size_t i = 0; i < req.rollouts.size(); ++i) {
            if (!req.rollouts[i].prefix_logprobs) {
                throw ServiceError(400, "rollouts[" + std::to_string(i) +
                                            "].prefix_logprobs missing and no policy endpoint is configured");
            }
        }
    }
    RewardConfig cfg = reward_;
    if (req.config_overrides.lambda) cfg.lambda = *req.config_overrides.lambda;
    if (req.config_overrides.mode) cfg.mode = *req.config_overrides.mode;

    ScoreResponse resp;
    resp.results.resize(req.rollouts.size());
    try {
        parallel_for(req.rollouts.size(), config_.parallelism, [&](size_t i) {
            resp.results[i].sample_id = req.rollouts[i].sample_id;
            resp.results[i].breakdown = score_one(req.rollouts[i], cfg);
        });
    } catch (const EndpointError& e) {
        throw ServiceError(502, std::string("endpoint failure: ") + e.what());
    } catch (const RewardError& e) {
        throw ServiceError(400, e.what());
    }
    return resp;
}

HttpReply RewardService::handle_score_body(std::string_view body) const {
    auto error = [](int status, const std::string& msg) {
        return HttpReply{status, json({{"error", msg}, {"status", status}}).dump()};
    };
    try {
        json j = json::parse(body);
        return {200, handle_score(ScoreRequest::from_json(j)).to_json().dump()};
    } catch (const json::parse_error& e) {
        return error(400, std::string("invalid JSON: ") + e.what());
    } catch (const ServiceError& e) {
        return error(e.status(), e.what());
    } catch (const std::exception& e) {
        return error(500, e.what());
    }
}

void RewardService::install_routes() {
    auto& http = server_->http;
    http.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
    http.Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
        HttpReply reply = handle_score_body(req.body);
        if (reply.status != 200) log(LogLevel::Warn, "POST /v1/score -> " + std::to_string(reply.status) + ": " + reply.body);
        res.status = reply.status;
        res.set_content(reply.body, "application/json");
    });
}

int RewardService::start(const std::string& host, int port) {
    if (server_) throw std::logic_error("service already started");
    server_ = std::make_unique<Server>();
    install_routes();
    int bound = port;
    if (port == 0) {
        bound = server_->http.bind_to_any_port(host);
    } else if (!server_->http.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound <= 0) {
        server_.reset();
        throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    }
    port_ = bound;
    thread_ = std::thread([this] { server_->http.listen_after_bind(); });
    server_->http.wait_until_ready();
    return port_;
}

void RewardService::serve_forever(const std::string& host, int port) {
    start(host, port);
    if (thread_.joinable()) thread_.join();
}

void RewardService::stop() {
    if (server_) server_->http.stop();
    if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
}

}  // namespace homectl
