#pragma once

#include <memory>
#include <string>

#include "homectl/config.hpp"
#include "homectl/judge.hpp"
#include "homectl/model_client.hpp"

namespace homectl {

// Backend specs as given on the command line:
//   scripted:<path>   rules (policy) or verdicts (judges) file
//   remote            endpoint(s) from the config file
//   remote:<url>      remote endpoint at <url>, other settings from config
// Throws std::invalid_argument for a malformed spec and std::runtime_error
// naming the file when a scripted file cannot be read or decoded.
std::unique_ptr<Policy> make_policy(const std::string& spec, const AppConfig& config);

// Verdicts file:
//   {"reward": {"dimensions": [spec, spec, spec] | spec, "unified": spec},
//    "evaluation": [spec, spec, spec] | spec}
// where each spec is understood by ScriptedJudge::from_json.
DimensionJudges make_reward_judges(const std::string& spec, const AppConfig& config);
EvaluationJudge make_evaluation_judge(const std::string& spec, const AppConfig& config);

DimensionJudges reward_judges_from_json(const json& verdicts);
EvaluationJudge evaluation_judge_from_json(const json& verdicts);

}  // namespace homectl
