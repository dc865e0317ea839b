#include <benchmark/benchmark.h>

#include "homectl/dataset.hpp"
#include "homectl/memory.hpp"

namespace {

homectl::MemoryBank bank_of_size(size_t n) {
    std::vector<std::string> contents;
    for (const auto& s : homectl::generate_fixtures(3, {0, n, 0}))
        for (const auto& m : s.candidate_memories) contents.push_back(m);
    contents.resize(std::min(contents.size(), n));
    return homectl::MemoryBank::from_contents(contents);
}

void bm_retrieve(benchmark::State& state) {
    const auto bank = bank_of_size(static_cast<size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(bank.retrieve("打开客厅灯调成暖白", 5));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(bm_retrieve)->RangeMultiplier(4)->Range(4, 256)->Complexity();

void bm_apply_write(benchmark::State& state) {
    const auto bank = bank_of_size(static_cast<size_t>(state.range(0)));
    const homectl::ActionOutput write{homectl::MemoryWrite{"说晚安就关闭所有灯和窗帘"}, ""};
    for (auto _ : state) benchmark::DoNotOptimize(bank.apply_action(write));
}
BENCHMARK(bm_apply_write)->RangeMultiplier(4)->Range(4, 256);

void bm_bigram_dice(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(homectl::bigram_dice("风扇吹自然风", "说自然风风扇就切换到自然风模式并摇头"));
}
BENCHMARK(bm_bigram_dice);

}  // namespace
