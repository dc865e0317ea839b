#include <doctest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "homectl/reward.hpp"

using namespace homectl;

namespace {

Sample memory_sample() {
    Sample s;
    s.id = "s1";
    s.category = {MajorCategory::MemoryStateChange, MinorCategory::MemoryAdd};
    s.environment = {{"客厅"}, {}, "客厅"};
    s.query = "帮我记住我以后每次打开空调的时候，都要设置25度";
    s.ground_truth = "记忆：好的，已帮您记住\"打开空调，就要设置25度\"";
    s.gt_category = PrefixCategory::Memory;
    return s;
}

DimensionJudges judges_replying(const char* a, const char* b, const char* c) {
    return DimensionJudges({ScriptedJudge::constant(a), ScriptedJudge::constant(b), ScriptedJudge::constant(c)});
}

const std::vector<double> kLn09x2 = {std::log(0.9), std::log(0.9)};

}  // namespace

TEST_SUITE("reward") {

TEST_CASE("prefix_probability") {
    CHECK(prefix_probability(kLn09x2) == doctest::Approx(0.81).epsilon(1e-12));
    CHECK(prefix_probability(std::vector<double>{0.0}) == 1.0 - 1e-6);
    CHECK(prefix_probability(std::vector<double>{std::log(0.5)}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(prefix_probability(std::vector<double>{-1000.0}) == 1e-6);
    CHECK_THROWS_AS(prefix_probability(std::vector<double>{}), RewardError);
    CHECK_THROWS_AS(prefix_probability(std::vector<double>{0.1}), RewardError);
    CHECK_THROWS_AS(prefix_probability(std::vector<double>{std::nan("")}), RewardError);
    try {
        prefix_probability(std::vector<double>{});
    } catch (const RewardError& e) {
        CHECK(e.kind() == RewardError::Kind::EmptyPrefix);
    }
}

TEST_CASE("prefix_reward values") {
    CHECK(prefix_reward(0.5) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::abs(prefix_reward(0.9) - 0.987805) <= 1e-6);
    CHECK(std::abs(prefix_reward(0.2) - 0.058824) <= 1e-6);
    CHECK(std::abs(prefix_reward(0.81) - 0.947847) <= 1e-6);
    CHECK_THROWS_AS(prefix_reward(0.0), RewardError);
    CHECK_THROWS_AS(prefix_reward(1.0), RewardError);
    CHECK_THROWS_AS(prefix_reward(-0.1), RewardError);
}

TEST_CASE("prefix_reward closed form, range and monotonicity") {
    double prev = 0.0;
    for (int i = 1; i <= 999; ++i) {
        const double p = i / 1000.0;
        const double r = prefix_reward(p);
        CHECK(std::abs(r - oracle::prefix_reward_closed_form(p)) <= 1e-9);
        CHECK(r > 0.0);
        CHECK(r < 1.0);
        CHECK(r > prev);
        prev = r;
    }
    auto s = score_prefix_logprobs(kLn09x2);
    CHECK(s.p_pfx == doctest::Approx(0.81));
    CHECK(s.logit_pfx == doctest::Approx(std::log(0.81 / 0.19)));
    CHECK(s.r_prefix == doctest::Approx(0.947847).epsilon(1e-6));
}

TEST_CASE("dimension_reward") {
    RewardConfig veto;
    RewardConfig add;
    add.mode = RewardMode::Additive;
    RewardConfig add_raw = add;
    add_raw.additive_normalize = false;

    CHECK(dimension_reward(std::vector<int>{1, 1, 1}, veto) == 1.0);
    CHECK(dimension_reward(std::vector<int>{1, 0, 1}, veto) == 0.0);
    CHECK(dimension_reward(std::vector<int>{1, 0, 1}, add_raw) == 2.0);
    CHECK(dimension_reward(std::vector<int>{1, 0, 1}, add) == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(dimension_reward(std::vector<int>{1, 1}, veto), RewardError);
    CHECK_THROWS_AS(dimension_reward(std::vector<int>{1, 2, 1}, veto), RewardError);

    for (int mask = 0; mask < 8; ++mask) {
        std::vector<int> bits = {mask & 1, (mask >> 1) & 1, (mask >> 2) & 1};
        CHECK(dimension_reward(bits, veto) == ((bits[0] && bits[1] && bits[2]) ? 1.0 : 0.0));
        CHECK(dimension_reward(bits, add_raw) == bits[0] + bits[1] + bits[2]);
    }
}

TEST_CASE("compose") {
    CHECK(std::abs(compose(true, 0.987805, 1.0, 0.3) - 0.996341) <= 1e-6);
    CHECK(compose(false, 0.9, 1.0, 0.3) == 0.0);
    CHECK(compose(true, 0.123, 1.0, 0.0) == 1.0);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double l = u(rng), a = u(rng), b = u(rng), d = u(rng);
        CHECK(compose(false, a, d, l) == 0.0);
        // Non-decreasing in each component when the prefix matches.
        CHECK(compose(true, std::max(a, b), d, l) >= compose(true, std::min(a, b), d, l));
        CHECK(compose(true, a, std::max(b, d), l) >= compose(true, a, std::min(b, d), l));
    }
}

TEST_CASE("veto dominance over all bit vectors") {
    RewardConfig cfg;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int mask = 0; mask < 8; ++mask) {
        std::vector<int> bits = {mask & 1, (mask >> 1) & 1, (mask >> 2) & 1};
        for (int i = 0; i < 100; ++i) {
            cfg.lambda = u(rng);
            const double rp = u(rng);
            const double r = compose(true, rp, dimension_reward(bits, cfg), cfg);
            CHECK(r >= 0.0);
            CHECK(r <= 1.0);
            if (mask != 7) CHECK(r <= cfg.lambda);
        }
    }
}

TEST_CASE("config validation") {
    RewardConfig c;
    CHECK_NOTHROW(c.validate());
    c.lambda = 1.5;
    CHECK_THROWS_AS(c.validate(), RewardError);
    c = {};
    c.epsilon = 0.5;
    CHECK_THROWS_AS(c.validate(), RewardError);
    c = {};
    c.k = 0;
    CHECK_THROWS_AS(c.validate(), RewardError);
}

TEST_CASE("score_rollout gate skips the judges") {
    auto judges = judges_replying("Y", "Y", "Y");
    auto b = score_rollout(memory_sample(), "no-rewrite", judges, kLn09x2);
    CHECK_FALSE(b.prefix_match);
    CHECK(b.r == 0.0);
    CHECK(b.judge_calls == 0);
    CHECK(judges.total_calls() == 0);

    // Unparseable output never reaches the judges either and needs no logprobs.
    b = score_rollout(memory_sample(), "garbled", judges, std::vector<double>{});
    CHECK(b.r == 0.0);
    CHECK(judges.total_calls() == 0);
}

TEST_CASE("score_rollout all-Y") {
    auto judges = judges_replying("Y", "Y", "Y");
    auto b = score_rollout(memory_sample(), "记忆：好的，已帮您记住\"打开空调，就要设置25度\"", judges, kLn09x2);
    CHECK(b.prefix_match);
    CHECK(std::abs(b.r_prefix - 0.947847) <= 1e-6);
    CHECK(b.r_dimension == 1.0);
    CHECK(std::abs(b.r - 0.984354) <= 1e-6);
    CHECK(b.r == doctest::Approx(0.3 * oracle::prefix_reward_closed_form(0.81) + 0.7).epsilon(1e-12));
    CHECK(b.judge_calls == 3);
}

TEST_CASE("score_rollout vetoed dimension") {
    auto judges = judges_replying("Y", "N", "Y");
    auto b = score_rollout(memory_sample(), "记忆：打开空调设置25度", judges, kLn09x2);
    CHECK(b.r_dimension == 0.0);
    CHECK(b.r == doctest::Approx(0.3 * b.r_prefix).epsilon(1e-15));
    CHECK(b.dimension_bits.values() == std::vector<int>{1, 0, 1});
}

TEST_CASE("score_rollout fast mode") {
    auto judges = judges_replying("Y", "N", "Y");
    RewardConfig cfg;
    cfg.fast = true;
    auto b = score_rollout(memory_sample(), "记忆：x", judges, kLn09x2, cfg);
    CHECK(b.dimension_bits.bits == std::vector<Bit>{Bit::One, Bit::Zero, Bit::Skipped});
    CHECK(b.judge_calls == 2);
    CHECK(b.r == doctest::Approx(0.3 * b.r_prefix));

    // Additive mode always evaluates every dimension.
    cfg.mode = RewardMode::Additive;
    b = score_rollout(memory_sample(), "记忆：x", judges, kLn09x2, cfg);
    CHECK(b.judge_calls == 3);
    CHECK(b.r_dimension == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("score_rollout with the unified judge") {
    DimensionJudges judges({ScriptedJudge::constant("N"), ScriptedJudge::constant("N"), ScriptedJudge::constant("N")},
                           ScriptedJudge::constant("Y"));
    RewardConfig cfg;
    cfg.unified = true;
    auto b = score_rollout(memory_sample(), "记忆：x", judges, kLn09x2, cfg);
    CHECK(b.dimension_bits.size() == 1);
    CHECK(b.r_dimension == 1.0);
    CHECK(b.judge_calls == 1);
}

TEST_CASE("unparseable judge replies are flagged") {
    auto judges = judges_replying("Y", "maybe", "Y");
    auto b = score_rollout(memory_sample(), "记忆：x", judges, kLn09x2);
    CHECK(b.r_dimension == 0.0);
    CHECK(b.judge_calls == 4);  // one retry
    REQUIRE(b.diagnostics.size() == 1);
    CHECK(b.diagnostics[0].find("unparseable") != std::string::npos);
}

}  // TEST_SUITE
