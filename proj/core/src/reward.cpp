#include "homectl/reward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace homectl {

std::string_view to_string(RewardMode m) { return m == RewardMode::Veto ? "veto" : "additive"; }

std::optional<RewardMode> reward_mode_from_string(std::string_view s) {
    if (s == "veto") return RewardMode::Veto;
    if (s == "additive") return RewardMode::Additive;
    return std::nullopt;
}

void RewardConfig::validate() const {
    using K = RewardError::Kind;
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw RewardError(K::InvalidConfig, "lambda must be in [0,1]");
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw RewardError(K::InvalidConfig, "epsilon must be in (0,0.5)");
    if (k < 1) throw RewardError(K::InvalidConfig, "k must be >= 1");
}

json RewardConfig::to_json() const {
    return {{"lambda", lambda},         {"k", k},       {"epsilon", epsilon},
            {"mode", to_string(mode)},  {"fast", fast}, {"additive_normalize", additive_normalize},
            {"unified", unified}};
}

double prefix_probability(std::span<const double> logprobs, double epsilon) {
    if (logprobs.empty()) throw RewardError(RewardError::Kind::EmptyPrefix, "prefix log-probabilities are empty");
    double sum = 0.0;
    for (double lp : logprobs) {
        if (!(lp <= 0.0)) {
            throw RewardError(RewardError::Kind::PositiveLogProb,
                              "log-probability " + std::to_string(lp) + " is positive or NaN");
        }
        sum += lp;
    }
    return std::clamp(std::exp(sum), epsilon, 1.0 - epsilon);
}

double prefix_reward(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw RewardError(RewardError::Kind::DomainError, "prefix probability must lie in (0,1), got " + std::to_string(p));
    }
    const double logit = std::log(p / (1.0 - p));
    return (std::tanh(logit) + 1.0) / 2.0;
}

PrefixScore score_prefix_logprobs(std::span<const double> logprobs, double epsilon) {
    PrefixScore s;
    s.logprobs.assign(logprobs.begin(), logprobs.end());
    s.p_pfx = prefix_probability(logprobs, epsilon);
    s.logit_pfx = std::log(s.p_pfx / (1.0 - s.p_pfx));
    s.r_prefix = prefix_reward(s.p_pfx);
    return s;
}

double dimension_reward(std::span<const int> bits, const RewardConfig& config) {
    if (bits.size() != config.k) {
        throw RewardError(RewardError::Kind::LengthMismatch, "expected " + std::to_string(config.k) +
                                                                 " dimension bits, got " + std::to_string(bits.size()));
    }
    for (int b : bits)
        if (b != 0 && b != 1) throw RewardError(RewardError::Kind::DomainError, "dimension bits must be 0 or 1");
    if (config.mode == RewardMode::Veto) {
        int prod = 1;
        for (int b : bits) prod *= b;
        return prod;
    }
    const double sum = std::accumulate(bits.begin(), bits.end(), 0.0);
    return config.additive_normalize ? sum / static_cast<double>(config.k) : sum;
}

double dimension_reward(const DimensionVector& bits, const RewardConfig& config) {
    const auto v = bits.values();
    return dimension_reward(std::span<const int>(v), config);
}

double compose(bool prefix_match, double r_prefix, double r_dimension, double lambda) {
    if (!prefix_match) return 0.0;
    return lambda * r_prefix + (1.0 - lambda) * r_dimension;
}

double compose(bool prefix_match, double r_prefix, double r_dimension, const RewardConfig& config) {
    return compose(prefix_match, r_prefix, r_dimension, config.lambda);
}

json RewardBreakdown::to_json() const {
    return {{"reward", r},
            {"r_prefix", r_prefix},
            {"p_pfx", p_pfx},
            {"r_dimension", r_dimension},
            {"prefix_match", prefix_match},
            {"dimension_bits", dimension_bits.to_json()},
            {"judge_calls", judge_calls},
            {"diagnostics", diagnostics}};
}

RewardBreakdown score_rollout(const RolloutInput& in, const DimensionJudges& judges, const RewardConfig& config_in) {
    RewardConfig config = config_in;
    if (config.unified) config.k = 1;
    config.validate();

    RewardBreakdown out;
    out.prefix_match = prefix_match(in.request.predicted, in.gt_category);
    if (!out.prefix_match) {
        if (config.unified) {
            out.dimension_bits.labels = {"unified"};
            out.dimension_bits.bits = {Bit::Skipped};
        } else {
            for (Dimension d : kAllDimensions) {
                out.dimension_bits.labels.emplace_back(to_string(d));
                out.dimension_bits.bits.push_back(Bit::Skipped);
            }
        }
        out.diagnostics.push_back(try_parse_action(in.request.predicted) ? "prefix mismatch"
                                                                         : "unparseable output; treated as prefix mismatch");
        return out;
    }

    const PrefixScore ps = score_prefix_logprobs(in.prefix_logprobs, config.epsilon);
    out.p_pfx = ps.p_pfx;
    out.r_prefix = ps.r_prefix;

    std::vector<JudgeVerdict> verdicts;
    if (config.unified) {
        auto v = judges.unified_judge(in.request);
        out.dimension_bits.labels = {"unified"};
        out.dimension_bits.bits = {v.bit ? Bit::One : Bit::Zero};
        out.judge_calls = static_cast<size_t>(v.attempts);
        verdicts.push_back(std::move(v));
    } else {
        const bool fast = config.fast && config.mode == RewardMode::Veto;
        auto res = judges.judge_all(in.request, fast);
        out.dimension_bits = std::move(res.vector);
        for (const auto& v : res.verdicts) out.judge_calls += static_cast<size_t>(v.attempts);
        verdicts = std::move(res.verdicts);
    }
    for (const auto& v : verdicts) {
        if (!v.parse_ok) out.diagnostics.push_back("judge " + v.judge_id + " reply unparseable: " + v.raw);
    }

    out.r_dimension = dimension_reward(out.dimension_bits, config);
    out.r = compose(true, out.r_prefix, out.r_dimension, config);
    return out;
}

RewardBreakdown score_rollout(const Sample& sample, const std::string& generated, const DimensionJudges& judges,
                              std::span<const double> prefix_logprobs, const RewardConfig& config) {
    RolloutInput in;
    in.request = make_judge_request(sample, generated);
    in.gt_category = sample.gt_category;
    in.prefix_logprobs.assign(prefix_logprobs.begin(), prefix_logprobs.end());
    return score_rollout(in, judges, config);
}

}  // namespace homectl
