#include <doctest.h>

#include <mutex>
#include <set>

#include "homectl/pipeline.hpp"
#include "support/oracles.hpp"

using namespace homectl;

namespace {

HomeEnvironment home() {
    return {{"客厅", "卧室"}, {{"客厅", "灯", "客厅灯"}, {"卧室", "空调", "卧室空调"}}, "客厅"};
}

ScriptedPolicy fixed(std::string output) { return ScriptedPolicy({}, std::move(output)); }

// Policy that records every context it is shown.
class RecordingPolicy final : public Policy {
public:
    explicit RecordingPolicy(ScriptedPolicy inner) : inner_(std::move(inner)) {}
    Completion complete(const PolicyContext& ctx) override {
        std::lock_guard lock(mu_);
        seen.push_back(ctx);
        return inner_.complete(ctx);
    }
    std::vector<double> score_prefix(const PolicyContext& ctx, std::string_view p) override {
        return inner_.score_prefix(ctx, p);
    }
    std::string id() const override { return "recording"; }
    std::vector<PolicyContext> seen;

private:
    ScriptedPolicy inner_;
    std::mutex mu_;
};

// Policy that answers with the oracle output until the budget runs out.
class FailingPolicy final : public Policy {
public:
    FailingPolicy(ScriptedPolicy inner, size_t budget) : inner_(std::move(inner)), budget_(budget) {}
    Completion complete(const PolicyContext& ctx) override {
        if (calls_++ >= budget_) throw EndpointError(EndpointError::Kind::Unavailable, "down");
        return inner_.complete(ctx);
    }
    std::vector<double> score_prefix(const PolicyContext&, std::string_view) override { return {}; }
    std::string id() const override { return "failing"; }

private:
    ScriptedPolicy inner_;
    size_t budget_;
    size_t calls_ = 0;
};

ScriptedPolicy oracle_for(const std::vector<Sample>& samples) {
    std::vector<ScriptedPolicy::Rule> rules;
    for (const auto& s : samples) rules.push_back({s.id, std::nullopt, std::nullopt, s.ground_truth, std::nullopt});
    return ScriptedPolicy(std::move(rules));
}

EvaluationJudge exact_judges() {
    return {ScriptedJudge::exact(), ScriptedJudge::exact(), ScriptedJudge::exact()};
}

LifeDialogue dialogue(std::vector<std::string> queries, std::vector<int> sessions) {
    LifeDialogue d;
    d.id = "d1";
    d.environment = home();
    for (size_t i = 0; i < queries.size(); ++i) d.turns.push_back({queries[i], std::nullopt, sessions[i], sessions[i]});
    d.final_ground_truth = "no-rewrite";
    d.final_gt_category = PrefixCategory::NoRewrite;
    return d;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("run_turn routing") {
    const auto bank = MemoryBank::from_contents(std::vector<std::string>{"打开客厅灯时默认亮度60%暖白"});

    auto p1 = fixed("no-rewrite");
    auto t1 = run_turn(bank, home(), {}, "打开灯", p1);
    CHECK(t1.bank == bank);
    CHECK(t1.result.downstream_command == "打开灯");
    CHECK(t1.result.memory_log.kind == OperationKind::NoChange);
    CHECK(t1.result.parse_ok);

    auto p2 = fixed("记忆：卧室空调默认25度");
    auto t2 = run_turn(bank, home(), {}, "以后空调都开25度", p2);
    CHECK(t2.bank.size() == 2);
    CHECK(t2.bank.entries().back().content == "卧室空调默认25度");
    CHECK(t2.bank.entries().back().source_query == "以后空调都开25度");
    CHECK_FALSE(t2.result.downstream_command);
    CHECK(t2.result.memory_log.kind == OperationKind::Added);
    CHECK(bank.size() == 1);

    auto p3 = fixed("改写：将客厅灯光亮度调节为60%暖白。");
    auto t3 = run_turn(bank, home(), {}, "打开灯", p3);
    CHECK(t3.result.downstream_command == "将客厅灯光亮度调节为60%暖白。");
    CHECK(t3.bank == bank);
}

TEST_CASE("run_turn edge routing") {
    const auto bank = MemoryBank::from_contents(std::vector<std::string>{"打开客厅灯时默认亮度60%暖白"});

    auto garbage = fixed("好的");
    auto t = run_turn(bank, home(), {}, "打开灯", garbage);
    CHECK_FALSE(t.result.parse_ok);
    CHECK(t.result.action.category() == PrefixCategory::NoRewrite);
    CHECK(t.result.downstream_command == "打开灯");
    CHECK(t.bank == bank);

    auto missing = fixed("记忆：删除 完全无关的东西xyz");
    auto m = run_turn(bank, home(), {}, "删掉", missing);
    REQUIRE(m.result.memory_error);
    CHECK(m.bank == bank);
    CHECK_FALSE(m.result.downstream_command);
    CHECK(m.result.memory_log.kind == OperationKind::NoChange);

    auto del = fixed("记忆：删除 打开客厅灯时默认亮度60%暖白");
    auto d = run_turn(bank, home(), {}, "忘掉灯的设置", del);
    CHECK(d.bank.empty());
    CHECK(d.result.memory_log.kind == OperationKind::Deleted);
}

TEST_CASE("run_turn retrieval feeds the prompt") {
    const auto bank = MemoryBank::from_contents(
        std::vector<std::string>{"打开客厅灯时默认亮度60%暖白", "卧室空调默认26度", "周末早上不要叫醒我"});
    RecordingPolicy p(fixed("no-rewrite"));
    auto t = run_turn(bank, home(), {}, "打开客厅灯", p);
    REQUIRE(p.seen.size() == 1);
    REQUIRE_FALSE(t.result.retrieved.empty());
    CHECK(t.result.retrieved[0].entry.content == "打开客厅灯时默认亮度60%暖白");
    std::vector<std::string> shown;
    for (const auto& r : t.result.retrieved) shown.push_back(r.entry.content);
    CHECK(p.seen[0].retrieved_memories == shown);
    CHECK(shown.size() < bank.size());

    PipelineConfig all;
    all.present_all_candidates = true;
    run_turn(bank, home(), {}, "打开客厅灯", p, all);
    CHECK(p.seen[1].retrieved_memories == bank.contents());
}

TEST_CASE("routing exclusivity over random outputs") {
    const auto bank = MemoryBank::from_contents(std::vector<std::string>{"客厅灯默认暖白", "空调默认26度"});
    const std::vector<std::string> outputs = {"memory: 空调默认24度", "memory: delete 空调默认26度", "rewrite: 开灯",
                                              "no-rewrite", "???", "记忆：删除 没有的", "改写：", "不改写"};
    for (const auto& o : outputs) {
        auto p = fixed(o);
        auto t = run_turn(bank, home(), {}, "空调", p);
        const bool memory_op = t.result.memory_log.kind != OperationKind::NoChange;
        const bool downstream = t.result.downstream_command.has_value();
        CHECK_FALSE((memory_op && downstream));
        CHECK(downstream == (t.result.action.category() != PrefixCategory::Memory));
    }
}

TEST_CASE("run_dialogue write then use") {
    auto d = dialogue({"以后打开灯就把客厅灯调成60%暖白", "打开灯"}, {0, 0});
    ScriptedPolicy p({{"d1#0", std::nullopt, std::nullopt, "记忆：打开灯时客厅灯调成60%暖白", std::nullopt},
                      {"d1#1", std::nullopt, std::nullopt, "改写：将客厅灯光亮度调节为60%暖白。", std::nullopt}});
    auto r = run_dialogue(d, p);
    REQUIRE(r.turns.size() == 2);
    CHECK(r.turns[0].memory_log.kind == OperationKind::Added);
    REQUIRE(r.turns[1].retrieved.size() == 1);
    CHECK(r.turns[1].retrieved[0].entry.content == "打开灯时客厅灯调成60%暖白");
    CHECK(r.final.action.category() == PrefixCategory::Rewrite);
    CHECK(r.trajectory.size() == 2);
    CHECK(r.bank_before_final.size() == 1);
    CHECK(r.final_history.size() == 2);
}

TEST_CASE("run_dialogue write delete use") {
    auto d = dialogue({"记住空调默认26度", "忘掉空调的设置", "打开空调"}, {0, 1, 1});
    // Faithful policy: rewrites only when a memory is shown.
    class Faithful final : public Policy {
    public:
        Completion complete(const PolicyContext& ctx) override {
            if (ctx.query == "记住空调默认26度") return {"记忆：空调默认26度", std::nullopt};
            if (ctx.query == "忘掉空调的设置") return {"记忆：删除 空调默认26度", std::nullopt};
            if (!ctx.retrieved_memories.empty()) return {"改写：打开空调并调到26度", std::nullopt};
            return {"no-rewrite", std::nullopt};
        }
        std::vector<double> score_prefix(const PolicyContext&, std::string_view) override { return {}; }
        std::string id() const override { return "faithful"; }
    } p;
    auto r = run_dialogue(d, p);
    CHECK(r.turns[1].memory_log.kind == OperationKind::Deleted);
    CHECK(r.final.retrieved.empty());
    CHECK(r.final.action.category() == PrefixCategory::NoRewrite);
    // One snapshot at the session boundary and one at the end.
    REQUIRE(r.snapshots.size() == 2);
    CHECK(restore(r.snapshots[0]).size() == 1);
    CHECK(restore(r.snapshots[1]).empty());
    // History resets at the session boundary.
    CHECK(r.final_history.size() == 2);
    CHECK(r.final_history[0].text == "忘掉空调的设置");
}

TEST_CASE("single-turn dialogue equals run_turn") {
    auto d = dialogue({"打开灯"}, {0});
    auto p = fixed("改写：打开客厅灯");
    auto r = run_dialogue(d, p);
    auto t = run_turn(MemoryBank{}, d.environment, {}, "打开灯", p, {}, "d1#0");
    CHECK(r.final.to_json() == t.result.to_json());
    CHECK(r.trajectory.back() == t.bank);
}

TEST_CASE("run_dialogue is deterministic") {
    auto ds = generate_dialogues(5, 10);
    std::vector<ScriptedPolicy::Rule> rules;
    for (const auto& d : ds)
        for (size_t i = 0; i < d.turns.size(); ++i)
            if (d.turns[i].expected_action)
                rules.push_back({d.id + "#" + std::to_string(i), std::nullopt, std::nullopt,
                                 render_action(*d.turns[i].expected_action, Lexicon::Chinese), std::nullopt});
    ScriptedPolicy p(rules);
    for (const auto& d : ds) {
        auto a = run_dialogue(d, p);
        auto b = run_dialogue(d, p);
        CHECK(a.snapshots == b.snapshots);
        CHECK(a.final.to_json().dump() == b.final.to_json().dump());
    }
}

TEST_CASE("evaluate_dataset oracle policy") {
    auto samples = generate_fixtures(7, kReferenceEvalCounts);
    auto policy = oracle_for(samples);
    auto res = evaluate_dataset(samples, policy, exact_judges());
    REQUIRE(res.rows.size() == samples.size());
    for (size_t i = 0; i < samples.size(); ++i) CHECK(res.rows[i].sample_id == samples[i].id);
    for (const auto& [cat, cell] : res.report.per_category) {
        CHECK(cell.f1 == doctest::Approx(1.0));
        CHECK(cell.bleu1 == doctest::Approx(1.0));
        CHECK(cell.accuracy == 1.0);
    }
    CHECK(res.report.overall.accuracy == 1.0);
    for (const auto& r : res.rows) {
        CHECK(r.parse_ok);
        CHECK((r.judge_calls == 0 || r.judge_calls == 2 || r.judge_calls == 3));
        CHECK(r.judge_calls == (r.category == MajorCategory::NoMemory ? 0 : 2));
    }
}

TEST_CASE("evaluate_dataset no-rewrite policy") {
    auto samples = generate_fixtures(7, kReferenceEvalCounts);
    auto policy = fixed("no-rewrite");
    auto res = evaluate_dataset(samples, policy, exact_judges());
    CHECK(res.report.overall.accuracy == doctest::Approx(53.0 / 389.0).epsilon(1e-12));
    CHECK(res.report.per_category.at(MajorCategory::NoMemory).accuracy == 1.0);
    CHECK(res.report.per_category.at(MajorCategory::MemoryUse).accuracy == 0.0);
}

TEST_CASE("evaluate_dataset mixed policy matches a recount") {
    auto samples = generate_fixtures(21, {10, 20, 15});
    std::vector<ScriptedPolicy::Rule> rules;
    std::vector<std::string> outputs;
    for (size_t i = 0; i < samples.size(); ++i) {
        std::string out = i % 3 == 0 ? samples[i].ground_truth : (i % 3 == 1 ? "no-rewrite" : "改写：打开客厅灯");
        outputs.push_back(out);
        rules.push_back({samples[i].id, std::nullopt, std::nullopt, out, std::nullopt});
    }
    ScriptedPolicy policy(rules);
    auto res = evaluate_dataset(samples, policy, exact_judges());

    std::map<MajorCategory, std::vector<double>> f1s, accs;
    for (size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        f1s[s.category.major].push_back(oracle::f1(oracle::tokenize(outputs[i]), oracle::tokenize(s.ground_truth)));
        bool correct = s.category.major == MajorCategory::NoMemory
                           ? (outputs[i] == "no-rewrite" || outputs[i] == s.ground_truth)
                           : outputs[i] == s.ground_truth;
        accs[s.category.major].push_back(correct ? 1.0 : 0.0);
    }
    auto mean = [](const std::vector<double>& v) {
        double t = 0;
        for (double x : v) t += x;
        return t / static_cast<double>(v.size());
    };
    for (auto c : kAllMajorCategories) {
        CHECK(res.report.per_category.at(c).f1 == doctest::Approx(mean(f1s[c])).epsilon(1e-12));
        CHECK(res.report.per_category.at(c).accuracy == doctest::Approx(mean(accs[c])).epsilon(1e-12));
    }
}

TEST_CASE("evaluate_dataset builds each bank fresh") {
    auto samples = generate_fixtures(9, {5, 30, 25});
    RecordingPolicy policy(oracle_for(samples));
    PipelineConfig cfg;
    cfg.present_all_candidates = true;
    auto res = evaluate_dataset(samples, policy, exact_judges(), cfg);
    std::map<std::string, const Sample*> by_id;
    for (const auto& s : samples) by_id[s.id] = &s;
    REQUIRE(policy.seen.size() == samples.size());
    for (const auto& ctx : policy.seen) CHECK(ctx.retrieved_memories == by_id.at(ctx.tag)->candidate_memories);
    for (size_t i = 0; i < samples.size(); ++i)
        CHECK(res.rows[i].initial_bank_size == samples[i].candidate_memories.size());
}

TEST_CASE("evaluate_dataset errors") {
    auto policy = fixed("no-rewrite");
    CHECK_THROWS_AS(evaluate_dataset(std::vector<Sample>{}, policy, exact_judges()), DataError);

    auto samples = generate_fixtures(3, {4, 4, 4});
    FailingPolicy failing(oracle_for(samples), 5);
    PipelineConfig serial;
    serial.parallelism = 1;
    try {
        evaluate_dataset(samples, failing, exact_judges(), serial);
        FAIL("expected EvaluationAborted");
    } catch (const EvaluationAborted& e) {
        REQUIRE(e.rows.size() == 5);
        for (size_t i = 0; i < 5; ++i) CHECK(e.rows[i].sample_id == samples[i].id);
    }
}

TEST_CASE("evaluate_dialogues") {
    auto ds = generate_dialogues(7, 12);
    std::vector<ScriptedPolicy::Rule> rules;
    for (const auto& d : ds) {
        const size_t last = d.turns.size() - 1;
        for (size_t i = 0; i < last; ++i)
            if (d.turns[i].expected_action)
                rules.push_back({d.id + "#" + std::to_string(i), std::nullopt, std::nullopt,
                                 render_action(*d.turns[i].expected_action, Lexicon::Chinese), std::nullopt});
        rules.push_back({d.id + "#" + std::to_string(last), std::nullopt, std::nullopt, d.final_ground_truth,
                         std::nullopt});
    }
    ScriptedPolicy p(rules);
    auto res = evaluate_dialogues(ds, p, exact_judges());
    CHECK(res.rows.size() == ds.size());
    CHECK(res.report.overall.accuracy == 1.0);
    auto csv = rows_to_csv(res.rows);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(ds.size() + 1));
}

}  // TEST_SUITE
