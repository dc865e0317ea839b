#include "homectl/backends.hpp"

#include <fstream>
#include <stdexcept>

namespace homectl {

namespace {

struct Spec {
    std::string kind;
    std::string arg;
};

Spec split_spec(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) return {spec, {}};
    return {spec.substr(0, colon), spec.substr(colon + 1)};
}

// Parses a JSON file and builds from it. Any failure is reported as a data
// error naming the file.
template <class Build>
auto from_file(const std::string& path, Build&& build) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    try {
        return build(json::parse(in));
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

EndpointConfig with_url(EndpointConfig e, const std::string& url) {
    if (!url.empty()) e.url = url;
    if (e.url.empty()) throw std::invalid_argument("remote backend needs a URL (config file, env var or remote:<url>)");
    return e;
}

std::array<JudgeBackendPtr, 3> three(const json& j, const char* what) {
    if (j.is_array()) {
        if (j.size() != 3) throw std::invalid_argument(std::string(what) + " must list exactly 3 judges");
        return {ScriptedJudge::from_json(j[0]), ScriptedJudge::from_json(j[1]), ScriptedJudge::from_json(j[2])};
    }
    // One spec shared by all three slots, each with its own state.
    return {ScriptedJudge::from_json(j), ScriptedJudge::from_json(j), ScriptedJudge::from_json(j)};
}

}  // namespace

std::unique_ptr<Policy> make_policy(const std::string& spec, const AppConfig& config) {
    const Spec s = split_spec(spec);
    if (s.kind == "scripted") {
        if (s.arg.empty()) throw std::invalid_argument("scripted policy needs a rules file: scripted:<path>");
        return from_file(s.arg, [](const json& j) -> std::unique_ptr<Policy> {
            return std::make_unique<ScriptedPolicy>(ScriptedPolicy::from_json(j));
        });
    }
    if (s.kind == "remote") return std::make_unique<RemotePolicy>(with_url(config.policy, s.arg));
    throw std::invalid_argument("unknown policy backend '" + spec + "'");
}

DimensionJudges reward_judges_from_json(const json& verdicts) {
    const json& r = verdicts.at("reward");
    auto dims = three(r.at("dimensions"), "reward.dimensions");
    JudgeBackendPtr unified = r.contains("unified") ? ScriptedJudge::from_json(r.at("unified")) : nullptr;
    return DimensionJudges(dims, unified);
}

EvaluationJudge evaluation_judge_from_json(const json& verdicts) {
    auto e = three(verdicts.at("evaluation"), "evaluation");
    return EvaluationJudge(e[0], e[1], e[2]);
}

DimensionJudges make_reward_judges(const std::string& spec, const AppConfig& config) {
    const Spec s = split_spec(spec);
    if (s.kind == "scripted") {
        return from_file(s.arg, [](const json& j) { return reward_judges_from_json(j); });
    }
    if (s.kind == "remote") {
        auto j = std::make_shared<RemoteJudge>(with_url(config.reward_judge, s.arg));
        return DimensionJudges::shared(j);
    }
    throw std::invalid_argument("unknown judge backend '" + spec + "'");
}

EvaluationJudge make_evaluation_judge(const std::string& spec, const AppConfig& config) {
    const Spec s = split_spec(spec);
    if (s.kind == "scripted") {
        return from_file(s.arg, [](const json& j) { return evaluation_judge_from_json(j); });
    }
    if (s.kind == "remote") {
        return EvaluationJudge(std::make_shared<RemoteJudge>(with_url(config.eval_judges[0], s.arg)),
                               std::make_shared<RemoteJudge>(with_url(config.eval_judges[1], s.arg)),
                               std::make_shared<RemoteJudge>(with_url(config.eval_judges[2], s.arg)));
    }
    throw std::invalid_argument("unknown judge backend '" + spec + "'");
}

}  // namespace homectl
