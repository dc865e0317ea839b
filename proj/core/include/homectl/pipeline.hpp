#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "homectl/dataset.hpp"
#include "homectl/judge.hpp"
#include "homectl/memory.hpp"
#include "homectl/metrics.hpp"
#include "homectl/model_client.hpp"

namespace homectl {

struct PipelineConfig {
    MemoryConfig memory;
    // Show every bank entry to the policy instead of the retrieved top-k.
    bool present_all_candidates = false;
    // Prompt template; empty selects the built-in one.
    std::string system_prompt;
    // Samples evaluated concurrently.
    size_t parallelism = 8;
};

struct TurnResult {
    ActionOutput action;
    bool parse_ok = true;  // false: output had no prefix and was routed as NoRewrite
    OperationLog memory_log;
    std::vector<ScoredEntry> retrieved;
    std::string raw_output;
    std::optional<std::string> downstream_command;
    std::optional<std::string> memory_error;  // e.g. a delete with no matching entry

    json to_json() const;
};

struct TurnOutput {
    TurnResult result;
    MemoryBank bank;
};

// retrieve -> prompt -> policy -> parse -> route. Policy errors propagate.
TurnOutput run_turn(const MemoryBank& bank, const HomeEnvironment& env, const std::vector<DialogueTurn>& history,
                    const std::string& query, Policy& policy, const PipelineConfig& config = {},
                    const std::string& tag = {});

struct DialogueResult {
    TurnResult final;
    std::vector<TurnResult> turns;
    std::vector<MemoryBank> trajectory;     // bank after each turn
    std::vector<std::string> snapshots;     // bank at the end of each session
    MemoryBank bank_before_final;
    std::vector<DialogueTurn> final_history;  // history shown to the final turn
};

// Starts from an empty bank. History accumulates within a session and is
// cleared when session_index changes.
DialogueResult run_dialogue(const LifeDialogue& d, Policy& policy, const PipelineConfig& config = {});

struct EvaluationRow {
    std::string sample_id;
    MajorCategory category = MajorCategory::NoMemory;
    std::string generated;
    double f1 = 0.0;
    double bleu1 = 0.0;
    bool accuracy_bit = false;
    int judge_calls = 0;
    bool parse_ok = true;        // policy output carried a recognized prefix
    bool judge_parse_ok = true;  // every consulted judge reply parsed
    size_t initial_bank_size = 0;
    std::optional<std::string> memory_error;

    MetricRow metric_row() const { return {category, f1, bleu1, accuracy_bit}; }
    json to_json() const;
};

struct EvaluationResult {
    MetricReport report;
    std::vector<EvaluationRow> rows;

    json to_json() const;
};

// Raised when an endpoint fails mid-run. `rows` holds the finished rows in
// input order.
class EvaluationAborted : public std::runtime_error {
public:
    EvaluationAborted(const std::string& message, std::vector<EvaluationRow> rows)
        : std::runtime_error(message), rows(std::move(rows)) {}
    std::vector<EvaluationRow> rows;
};

// Each sample gets a fresh bank built from its candidate memories. NoMemory
// accuracy is category exactness; the other categories go to the judges.
// Throws DataError(EmptyDataset) on empty input.
EvaluationResult evaluate_dataset(std::span<const Sample> samples, Policy& policy, const EvaluationJudge& judge,
                                  const PipelineConfig& config = {});

// Scores the final turn of each dialogue against its final ground truth.
EvaluationResult evaluate_dialogues(std::span<const LifeDialogue> dialogues, Policy& policy,
                                    const EvaluationJudge& judge, const PipelineConfig& config = {});

std::string rows_to_csv(std::span<const EvaluationRow> rows);

}  // namespace homectl
