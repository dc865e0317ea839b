#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "homectl/dataset.hpp"
#include "homectl/judge.hpp"

namespace homectl {

enum class RewardMode { Veto, Additive };

std::string_view to_string(RewardMode m);
std::optional<RewardMode> reward_mode_from_string(std::string_view s);

class RewardError : public std::invalid_argument {
public:
    enum class Kind { EmptyPrefix, PositiveLogProb, DomainError, LengthMismatch, InvalidConfig };
    RewardError(Kind kind, const std::string& message) : std::invalid_argument(message), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct RewardConfig {
    double lambda = 0.3;
    size_t k = kDimensionCount;
    double epsilon = 1e-6;
    RewardMode mode = RewardMode::Veto;
    bool additive_normalize = true;
    // Stop judging after the first 0. Only meaningful in veto mode.
    bool fast = false;
    // Score with the single unified judge instead of the three dimension
    // judges; k becomes 1.
    bool unified = false;

    // Throws RewardError(InvalidConfig).
    void validate() const;
    json to_json() const;
};

struct PrefixScore {
    std::vector<double> logprobs;
    double p_pfx = 0.5;
    double logit_pfx = 0.0;
    double r_prefix = 0.5;
};

// exp(sum) clamped to [eps, 1-eps]. Throws EmptyPrefix / PositiveLogProb.
double prefix_probability(std::span<const double> logprobs, double epsilon = 1e-6);

// (tanh(logit p) + 1) / 2. Throws DomainError unless 0 < p < 1.
double prefix_reward(double p);

PrefixScore score_prefix_logprobs(std::span<const double> logprobs, double epsilon = 1e-6);

// Veto: product of bits. Additive: sum, divided by k when normalizing.
// Throws LengthMismatch when bits.size() != config.k.
double dimension_reward(std::span<const int> bits, const RewardConfig& config);
double dimension_reward(const DimensionVector& bits, const RewardConfig& config);

// prefix_match ? lambda*r_prefix + (1-lambda)*r_dimension : 0
double compose(bool prefix_match, double r_prefix, double r_dimension, const RewardConfig& config);
double compose(bool prefix_match, double r_prefix, double r_dimension, double lambda);

struct RewardBreakdown {
    bool prefix_match = false;
    double p_pfx = 0.0;
    double r_prefix = 0.0;
    DimensionVector dimension_bits;
    double r_dimension = 0.0;
    double r = 0.0;
    size_t judge_calls = 0;
    std::vector<std::string> diagnostics;

    json to_json() const;
};

struct RolloutInput {
    JudgeRequest request;  // carries generated text and ground truth
    PrefixCategory gt_category = PrefixCategory::NoRewrite;
    std::vector<double> prefix_logprobs;
};

// On prefix mismatch returns r = 0 without consulting the judges or reading
// the log-probabilities. Judge endpoint errors propagate.
RewardBreakdown score_rollout(const RolloutInput& in, const DimensionJudges& judges, const RewardConfig& config);
RewardBreakdown score_rollout(const Sample& sample, const std::string& generated, const DimensionJudges& judges,
                              std::span<const double> prefix_logprobs, const RewardConfig& config = {});

}  // namespace homectl
