#include <benchmark/benchmark.h>

#include <cmath>

#include "homectl/reward.hpp"

namespace {

void bm_score_rollout(benchmark::State& state) {
    const auto judges = homectl::DimensionJudges::shared(homectl::ScriptedJudge::constant("Y"));
    homectl::RolloutInput in;
    in.request = {"打开灯", {"用户：灯光"}, {"打开客厅灯时默认亮度60%暖白"}, "改写：将客厅灯光亮度调节为60%暖白。",
                  "改写：将客厅灯光亮度调节为60%暖白。"};
    in.gt_category = homectl::PrefixCategory::Rewrite;
    in.prefix_logprobs = {std::log(0.9), std::log(0.95)};
    const homectl::RewardConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(homectl::score_rollout(in, judges, cfg));
}
BENCHMARK(bm_score_rollout);

void bm_prefix_reward(benchmark::State& state) {
    double p = 0.001;
    for (auto _ : state) {
        benchmark::DoNotOptimize(homectl::prefix_reward(p));
        p = p < 0.998 ? p + 0.001 : 0.001;
    }
}
BENCHMARK(bm_prefix_reward);

}  // namespace
