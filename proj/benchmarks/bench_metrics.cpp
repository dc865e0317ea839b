#include <benchmark/benchmark.h>

#include "homectl/metrics.hpp"

namespace {

const std::string kPred = "改写：将客厅灯光亮度调节为60%暖白，并把卧室空调设置为26度制冷模式。";
const std::string kRef = "改写：将客厅灯光亮度调节为60%暖白。卧室空调调到26度。";

void bm_tokenize(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(homectl::tokenize(kPred));
}
BENCHMARK(bm_tokenize);

void bm_f1(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(homectl::f1(kPred, kRef));
}
BENCHMARK(bm_f1);

void bm_bleu1(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(homectl::bleu1(kPred, kRef));
}
BENCHMARK(bm_bleu1);

}  // namespace
