#pragma once

// Prompt templates compiled in from core/prompts/.
#include <string_view>

namespace homectl::prompt_data {

extern const std::string_view device_control;
extern const std::string_view judge_key_info;
extern const std::string_view judge_semantic_intent;
extern const std::string_view judge_memory_rejection;
extern const std::string_view judge_unified;
extern const std::string_view eval_judge;

}  // namespace homectl::prompt_data
