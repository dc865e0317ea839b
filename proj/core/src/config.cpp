#include "homectl/config.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace homectl {

EndpointConfig endpoint_from_json(const json& j, EndpointConfig e) {
    if (!j.is_object()) throw std::invalid_argument("endpoint config must be an object");
    e.url = j.value("url", e.url);
    e.model = j.value("model", e.model);
    e.api_key_env = j.value("api_key_env", e.api_key_env);
    e.timeout_s = j.value("timeout_s", e.timeout_s);
    e.retries = j.value("retries", e.retries);
    e.temperature = j.value("temperature", e.temperature);
    e.backoff_initial_s = j.value("backoff_initial_s", e.backoff_initial_s);
    e.max_tokens = j.value("max_tokens", e.max_tokens);
    e.max_in_flight = j.value("max_in_flight", e.max_in_flight);
    e.supports_echo = j.value("supports_echo", e.supports_echo);
    if (e.timeout_s <= 0) throw std::invalid_argument("timeout_s must be positive");
    if (e.retries < 0) throw std::invalid_argument("retries must be >= 0");
    if (e.max_in_flight < 1) throw std::invalid_argument("max_in_flight must be >= 1");
    return e;
}

json to_json(const EndpointConfig& e) {
    return {{"url", e.url},
            {"model", e.model},
            {"api_key_env", e.api_key_env},
            {"timeout_s", e.timeout_s},
            {"retries", e.retries},
            {"temperature", e.temperature},
            {"backoff_initial_s", e.backoff_initial_s},
            {"max_tokens", e.max_tokens},
            {"max_in_flight", e.max_in_flight},
            {"supports_echo", e.supports_echo}};
}

AppConfig AppConfig::from_json(const json& j) {
    AppConfig c;
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    if (auto it = j.find("policy"); it != j.end()) c.policy = endpoint_from_json(*it);
    if (auto it = j.find("judges"); it != j.end()) {
        if (auto r = it->find("reward"); r != it->end()) c.reward_judge = endpoint_from_json(*r);
        if (auto e = it->find("evaluation"); e != it->end()) {
            if (e->is_array()) {
                if (e->size() != 3) throw std::invalid_argument("judges.evaluation must list exactly 3 endpoints");
                for (size_t i = 0; i < 3; ++i) c.eval_judges[i] = endpoint_from_json((*e)[i]);
            } else {
                c.eval_judges.fill(endpoint_from_json(*e));
            }
        }
    }
    if (auto it = j.find("reward"); it != j.end()) {
        RewardConfig& r = c.reward;
        r.lambda = it->value("lambda", r.lambda);
        r.epsilon = it->value("epsilon", r.epsilon);
        r.additive_normalize = it->value("additive_normalize", r.additive_normalize);
        r.fast = it->value("fast", r.fast);
        r.unified = it->value("unified", r.unified);
        if (it->contains("mode")) {
            auto m = reward_mode_from_string(it->at("mode").get<std::string>());
            if (!m) throw std::invalid_argument("reward.mode must be \"veto\" or \"additive\"");
            r.mode = *m;
        }
        r.validate();
    }
    if (auto it = j.find("retrieval"); it != j.end()) {
        MemoryConfig& m = c.pipeline.memory;
        m.retrieval_k = it->value("k", m.retrieval_k);
        m.retrieval_threshold = it->value("threshold", m.retrieval_threshold);
        m.update_threshold = it->value("update_threshold", m.update_threshold);
        m.delete_threshold = it->value("delete_threshold", m.delete_threshold);
        c.pipeline.present_all_candidates = it->value("present_all_candidates", c.pipeline.present_all_candidates);
        if (m.retrieval_k < 1) throw std::invalid_argument("retrieval.k must be >= 1");
    }
    if (auto it = j.find("service"); it != j.end()) {
        ServiceConfig& s = c.service;
        s.host = it->value("host", s.host);
        s.port = it->value("port", s.port);
        s.max_batch = it->value("max_batch", s.max_batch);
        s.parallelism = it->value("parallelism", s.parallelism);
        if (s.max_batch < 1) throw std::invalid_argument("service.max_batch must be >= 1");
        if (s.parallelism < 1) throw std::invalid_argument("service.parallelism must be >= 1");
        c.pipeline.parallelism = s.parallelism;
    }
    return c;
}

AppConfig AppConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

void AppConfig::apply_env() {
    auto env = [](const char* name) -> const char* {
        const char* v = std::getenv(name);
        return v && *v ? v : nullptr;
    };
    if (const char* v = env("HOMECTL_POLICY_URL")) policy.url = v;
    if (const char* v = env("HOMECTL_JUDGE_URL")) reward_judge.url = v;
    if (const char* v = env("HOMECTL_EVAL_JUDGE_URL"))
        for (auto& e : eval_judges) e.url = v;
    if (const char* v = env("HOMECTL_API_KEY_ENV")) {
        for (EndpointConfig* e : {&policy, &reward_judge, &eval_judges[0], &eval_judges[1], &eval_judges[2]})
            if (e->api_key_env.empty()) e->api_key_env = v;
    }
}

json AppConfig::to_json() const {
    json evals = json::array();
    for (const auto& e : eval_judges) evals.push_back(homectl::to_json(e));
    const MemoryConfig& m = pipeline.memory;
    return {{"policy", homectl::to_json(policy)},
            {"judges", {{"reward", homectl::to_json(reward_judge)}, {"evaluation", evals}}},
            {"reward", reward.to_json()},
            {"retrieval",
             {{"k", m.retrieval_k},
              {"threshold", m.retrieval_threshold},
              {"update_threshold", m.update_threshold},
              {"delete_threshold", m.delete_threshold},
              {"present_all_candidates", pipeline.present_all_candidates}}},
            {"service",
             {{"host", service.host},
              {"port", service.port},
              {"max_batch", service.max_batch},
              {"parallelism", service.parallelism}}}};
}

}  // namespace homectl
