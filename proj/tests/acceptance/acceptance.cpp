// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "homectl/log.hpp"
#include "homectl/memory.hpp"
#include "homectl/metrics.hpp"
#include "homectl/pipeline.hpp"
#include "homectl/protocol.hpp"
#include "homectl/reward.hpp"
#include "homectl/service.hpp"
#include "support/oracles.hpp"
#include "support/rollouts.hpp"

using namespace homectl;

namespace {

// Collects the first few failure details of a criterion.
struct Failures {
    size_t count = 0;
    std::ostringstream detail;

    void add(const std::string& what) {
        if (count++ < 3) detail << (count > 1 ? "; " : "") << what;
    }
    bool ok() const { return count == 0; }
    std::string summary() const {
        std::ostringstream os;
        os << count << " failure(s): " << detail.str();
        return os.str();
    }
};

std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string trim(const std::string& s) {
    const char* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

// 1. prefix_reward(p) against p^2 / (p^2 + (1-p)^2).
Failures reward_closed_form() {
    Failures f;
    for (int i = 1; i <= 999; ++i) {
        const double p = i / 1000.0;
        const double got = prefix_reward(p);
        const double want = oracle::prefix_reward_closed_form(p);
        if (!(std::abs(got - want) <= 1e-9)) f.add("p=" + num(p) + " got " + num(got) + " want " + num(want));
    }
    return f;
}

// 2. Veto product equals AND; one zero bit caps the composite at lambda.
Failures veto_semantics() {
    Failures f;
    RewardConfig cfg;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int mask = 0; mask < 8; ++mask) {
        const std::vector<int> bits = {mask & 1, (mask >> 1) & 1, (mask >> 2) & 1};
        const double r_dim = dimension_reward(bits, cfg);
        const bool all = bits[0] && bits[1] && bits[2];
        if (r_dim != (all ? 1.0 : 0.0)) f.add("mask " + std::to_string(mask) + " r_dimension " + num(r_dim));
        const int zeros = 3 - bits[0] - bits[1] - bits[2];
        if (zeros != 1) continue;
        for (int t = 0; t < 1000; ++t) {
            RewardConfig c = cfg;
            c.lambda = u(rng);
            const double r_prefix = u(rng);
            const double r = compose(true, r_prefix, dimension_reward(bits, c), c);
            if (!(r <= c.lambda)) f.add("mask " + std::to_string(mask) + " r " + num(r) + " > lambda " + num(c.lambda));
        }
    }
    return f;
}

// 3. Prefix mismatch forces r = 0 exactly.
Failures gate() {
    Failures f;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const double r_prefix = u(rng), r_dim = u(rng), lambda = u(rng);
        const double r = compose(false, r_prefix, r_dim, lambda);
        if (r != 0.0) f.add("tuple " + std::to_string(i) + " r " + num(r));
    }
    return f;
}

// 4. Bits (1,0,1): veto gives 0, normalized additive gives 2/3.
Failures ablation_divergence() {
    Failures f;
    const std::vector<int> bits = {1, 0, 1};
    RewardConfig veto;
    RewardConfig additive;
    additive.mode = RewardMode::Additive;
    additive.additive_normalize = true;
    const double v = dimension_reward(bits, veto);
    const double a = dimension_reward(bits, additive);
    if (v != 0.0) f.add("veto " + num(v));
    if (std::abs(a - 2.0 / 3.0) > 1e-12) f.add("additive " + num(a));
    if (v == a) f.add("modes agree");
    return f;
}

std::string random_text(std::mt19937_64& rng) {
    static const std::vector<std::string> pieces = {"a",  "b",  "c",  "1",  "25", " ", "打", "开", "空",
                                                    "调", "灯", "，", "。", "%",  "x", "ab", "度", "Set"};
    std::string s;
    const size_t n = rng() % 13;
    for (size_t i = 0; i < n; ++i) s += pieces[rng() % pieces.size()];
    return s;
}

// 5. f1 / bleu1 against the naive oracle and the hand values.
Failures metric_oracle() {
    Failures f;
    std::mt19937_64 rng(5);
    for (int i = 0; i < 1000; ++i) {
        const std::string a = random_text(rng), b = random_text(rng);
        const auto ta = oracle::tokenize(a), tb = oracle::tokenize(b);
        const double f_got = f1(a, b), f_want = oracle::f1(ta, tb);
        const double b_got = bleu1(a, b), b_want = oracle::bleu1(ta, tb);
        if (std::abs(f_got - f_want) > 1e-12) f.add("f1('" + a + "','" + b + "') " + num(f_got) + " vs " + num(f_want));
        if (std::abs(b_got - b_want) > 1e-12)
            f.add("bleu1('" + a + "','" + b + "') " + num(b_got) + " vs " + num(b_want));
    }
    const std::vector<std::string> abc = {"a", "b", "c"}, abd = {"a", "b", "d"};
    if (std::abs(f1(abc, abd) - 0.6667) > 1e-4) f.add("f1(abc, abd) " + num(f1(abc, abd)));
    if (std::abs(bleu1("a a b", "a b b") - 0.6667) > 1e-4) f.add("bleu1(a a b, a b b) " + num(bleu1("a a b", "a b b")));
    if (std::abs(bleu1("a", "a b") - std::exp(-1.0)) > 1e-4) f.add("bleu1(a, a b) " + num(bleu1("a", "a b")));
    return f;
}

// 6. Two calls on agreement, three on disagreement.
Failures judge_call_counts() {
    Failures f;
    const std::string yes = "<output>true</output>", no = "<output>false</output>";
    const JudgeRequest req{"打开灯", {}, {}, "改写：打开客厅灯", "改写：打开客厅灯"};
    for (int pattern = 0; pattern < 4; ++pattern) {
        for (bool tie : {false, true}) {
            const bool v1 = pattern & 1, v2 = pattern & 2;
            auto j1 = ScriptedJudge::constant(v1 ? yes : no, "j1");
            auto j2 = ScriptedJudge::constant(v2 ? yes : no, "j2");
            auto j3 = ScriptedJudge::constant(tie ? yes : no, "j3");
            EvaluationJudge judge(j1, j2, j3);
            const auto out = judge.eval_judgment(req);
            const int want_calls = v1 == v2 ? 2 : 3;
            const bool want_verdict = v1 == v2 ? v1 : tie;
            const size_t backend_calls = j1->calls() + j2->calls() + j3->calls();
            const std::string tag = "pattern (" + std::to_string(v1) + "," + std::to_string(v2) + ")";
            if (out.judge_calls != want_calls) f.add(tag + " judge_calls " + std::to_string(out.judge_calls));
            if (backend_calls != static_cast<size_t>(want_calls)) f.add(tag + " backend calls " + std::to_string(backend_calls));
            if (out.verdict != want_verdict) f.add(tag + " verdict");
        }
    }
    return f;
}

// 7. 10,000-step random action stream against the memory bank.
Failures memory_state_machine() {
    Failures f;
    static const std::vector<std::string> rules = {"打开空调设置25度", "打开客厅灯调暖光", "关闭卧室窗帘",
                                                   "打开风扇摇头",     "热水器水温50度",   "打开加湿器",
                                                   "扫地机器人静音",   "周末不要开窗帘",   "说晚安就关所有灯"};
    std::mt19937_64 rng(7);
    MemoryBank bank;
    for (int step = 0; step < 10000; ++step) {
        const auto& rule = rules[rng() % rules.size()];
        ActionVariant a;
        switch (rng() % 4) {
            case 0: a = MemoryWrite{rule}; break;
            case 1: a = MemoryDelete{rule}; break;
            case 2: a = Rewrite{rule}; break;
            default: a = NoRewrite{}; break;
        }
        const std::string at = "step " + std::to_string(step);
        ApplyResult r;
        try {
            r = bank.apply_action(ActionOutput{a, ""});
        } catch (const MemoryError& e) {
            if (e.kind() != MemoryError::Kind::DeleteNoMatch || !std::holds_alternative<MemoryDelete>(a))
                f.add(at + " unexpected error " + e.what());
            continue;
        }
        const long delta = static_cast<long>(r.bank.size()) - static_cast<long>(bank.size());
        const long want = r.log.kind == OperationKind::Added ? 1 : r.log.kind == OperationKind::Deleted ? -1 : 0;
        if (delta != want) f.add(at + " delta " + std::to_string(delta) + " for " + std::string(to_string(r.log.kind)));
        if (category_of(a) != PrefixCategory::Memory) {
            if (r.bank.entries() != bank.entries()) f.add(at + " non-memory action changed the bank");
            if (r.log.kind != OperationKind::NoChange) f.add(at + " non-memory action logged a change");
        }
        if (r.log.kind == OperationKind::Added) {
            try {
                auto undone = r.bank.apply_action(ActionOutput{MemoryDelete{std::get<MemoryWrite>(a).content}, ""});
                if (undone.bank.entries() != bank.entries()) f.add(at + " add-then-delete is not the identity");
            } catch (const MemoryError& e) {
                f.add(at + " add-then-delete failed: " + e.what());
            }
        }
        if (!r.bank.well_formed()) f.add(at + " bank not well formed");
        bank = std::move(r.bank);
    }
    return f;
}

EvaluationJudge exact_judges() {
    return {ScriptedJudge::exact(), ScriptedJudge::exact(), ScriptedJudge::exact()};
}

// 8. Oracle policy scores 1.0 everywhere; always "no-rewrite" scores 53/389.
Failures pipeline_oracle_bound() {
    Failures f;
    const auto samples = generate_fixtures(7, kReferenceEvalCounts);
    std::vector<ScriptedPolicy::Rule> rules;
    for (const auto& s : samples) rules.push_back({s.id, std::nullopt, std::nullopt, s.ground_truth, std::nullopt});
    ScriptedPolicy oracle_policy(rules);
    const auto good = evaluate_dataset(samples, oracle_policy, exact_judges());
    auto check_cell = [&](const std::string& name, const MetricCell& c) {
        if (c.accuracy != 1.0 || c.f1 != 1.0 || c.bleu1 != 1.0)
            f.add("oracle " + name + " acc/f1/b1 " + num(c.accuracy) + "/" + num(c.f1) + "/" + num(c.bleu1));
    };
    for (const auto& [cat, cell] : good.report.per_category) check_cell(std::string(to_string(cat)), cell);
    check_cell("overall", good.report.overall);

    ScriptedPolicy no_rewrite({}, "no-rewrite");
    const auto bad = evaluate_dataset(samples, no_rewrite, exact_judges());
    size_t correct = 0;
    for (const auto& r : bad.rows) correct += r.accuracy_bit;
    if (correct != 53 || bad.rows.size() != 389)
        f.add("no-rewrite correct " + std::to_string(correct) + "/" + std::to_string(bad.rows.size()));
    if (bad.report.overall.hits != 53 || bad.report.overall.count != 389) f.add("report cell is not 53/389");
    if (bad.report.overall.accuracy != 53.0 / 389.0) f.add("no-rewrite accuracy " + num(bad.report.overall.accuracy));
    return f;
}

// 9. Generated statistics within 20% of the reference values.
Failures fixture_statistics() {
    Failures f;
    const auto samples = generate_fixtures(7, kReferenceEvalCounts);
    if (samples.size() != 389) f.add("sample count " + std::to_string(samples.size()));
    double rooms = 0, devices = 0, memories = 0;
    for (const auto& s : samples) {
        rooms += static_cast<double>(s.environment.rooms.size());
        devices += static_cast<double>(s.environment.devices.size());
        memories += static_cast<double>(s.candidate_memories.size());
    }
    const double n = static_cast<double>(samples.size());
    const auto stats = compute_stats(samples);
    const struct {
        const char* name;
        double recount, reported, reference;
    } rows[] = {{"rooms", rooms / n, stats.overall.rooms.avg, 14.84},
                {"devices", devices / n, stats.overall.devices.avg, 117.01},
                {"memories", memories / n, stats.overall.memories.avg, 1.43}};
    for (const auto& r : rows) {
        if (std::abs(r.recount - r.reported) > 1e-12) f.add(std::string(r.name) + " stats disagree with recount");
        if (std::abs(r.reported - r.reference) > 0.2 * r.reference)
            f.add(std::string(r.name) + " avg " + num(r.reported) + " vs " + num(r.reference));
    }
    return f;
}

// 10. Running service agrees with in-process scoring.
Failures service_equivalence() {
    Failures f;
    auto judges = DimensionJudges::shared(ScriptedJudge::hash(0.7, "acceptance"));
    const RewardConfig base;
    RewardService service(judges, base, ServiceConfig{});
    const int port = service.start("127.0.0.1", 0);
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(30, 0);
    std::mt19937_64 rng(10);
    for (int i = 0; i < 100; ++i) {
        const auto req = fixture::random_request(rng);
        const auto cfg = fixture::resolve(base, req);
        const std::string at = "request " + std::to_string(i);
        auto res = cli.Post("/v1/score", req.to_json().dump(), "application/json");
        if (!res || res->status != 200) {
            f.add(at + " HTTP " + (res ? std::to_string(res->status) : httplib::to_string(res.error())));
            continue;
        }
        const auto results = json::parse(res->body).at("results");
        if (results.size() != req.rollouts.size()) {
            f.add(at + " result count");
            continue;
        }
        for (size_t k = 0; k < results.size(); ++k) {
            const auto lib = score_rollout(to_rollout_input(req.rollouts[k]), judges, cfg);
            json got = results[k];
            if (got.value("sample_id", std::string()) != req.rollouts[k].sample_id.value_or("")) f.add(at + " order");
            got.erase("sample_id");
            const double r = got.at("reward").get<double>();
            if (std::memcmp(&r, &lib.r, sizeof r) != 0) f.add(at + " reward " + num(r) + " vs " + num(lib.r));
            if (got.dump() != lib.to_json().dump()) f.add(at + " breakdown differs");
        }
    }
    service.stop();
    return f;
}

ActionVariant random_action(std::mt19937_64& rng) {
    static const std::vector<std::string> pieces = {
        "打开", "客厅", "灯",   "25度", "空调",  "，", "。", "the", "light", "set", "to", "60%",
        " ",    "  ",   "暖白", "自然风", "mode", ":", "：", "memo", "x",   "1",  "删", "delete"};
    std::string content;
    do {
        content.clear();
        for (size_t i = 0, n = 1 + rng() % 8; i < n; ++i) content += pieces[rng() % pieces.size()];
        content = (rng() % 4 == 0 ? "  " : "") + content + (rng() % 4 == 0 ? " \t" : "");
    } while (trim(content).empty());
    switch (rng() % 4) {
        case 0: return MemoryWrite{content};
        case 1: return MemoryDelete{content};
        case 2: return Rewrite{content};
        default: return NoRewrite{};
    }
}

// 11. render -> parse keeps the variant and the trimmed content.
Failures protocol_round_trip() {
    Failures f;
    std::mt19937_64 rng(11);
    size_t done = 0;
    while (done < 10000) {
        ActionVariant v = random_action(rng);
        // Write payloads that begin with a delete keyword render as deletions
        // and are outside the grammar's domain.
        if (!is_valid(v)) continue;
        ++done;
        for (auto lex : {Lexicon::English, Lexicon::Chinese}) {
            const std::string text = render_action(v, lex);
            const auto parsed = try_parse_action(text);
            const std::string at = "'" + text + "'";
            if (!parsed) {
                f.add(at + " did not parse");
                continue;
            }
            if (parsed->variant.index() != v.index()) {
                f.add(at + " changed variant");
                continue;
            }
            const std::string want = std::visit(
                [](const auto& a) -> std::string {
                    if constexpr (requires { a.content; }) return trim(a.content);
                    else if constexpr (requires { a.command; }) return trim(a.command);
                    else return "";
                },
                v);
            if (std::string(parsed->payload()) != want) f.add(at + " payload '" + std::string(parsed->payload()) + "'");
        }
    }
    return f;
}

struct Criterion {
    const char* id;
    const char* name;
    double budget_s;
    std::function<Failures()> run;
};

}  // namespace

int main() {
    set_log_sink([](LogLevel level, std::string_view msg) {
        if (level == LogLevel::Error) std::cerr << msg << '\n';
    });
    const std::vector<Criterion> criteria = {
        {"AC1", "prefix reward closed form", 1.0, reward_closed_form},
        {"AC2", "veto semantics", 1.0, veto_semantics},
        {"AC3", "prefix-mismatch gate", 1.0, gate},
        {"AC4", "veto vs additive divergence", 1.0, ablation_divergence},
        {"AC5", "metric oracle equivalence", 5.0, metric_oracle},
        {"AC6", "judge protocol call counts", 1.0, judge_call_counts},
        {"AC7", "memory state machine", 10.0, memory_state_machine},
        {"AC8", "pipeline oracle bound", 30.0, pipeline_oracle_bound},
        {"AC9", "fixture statistics", 5.0, fixture_statistics},
        {"AC10", "service/library equivalence", 30.0, service_equivalence},
        {"AC11", "protocol round trip", 5.0, protocol_round_trip},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Failures result;
        try {
            result = c.run();
        } catch (const std::exception& e) {
            result.add(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.budget_s) result.add("took " + num(secs) + " s, budget " + num(c.budget_s) + " s");
        char timing[32];
        std::snprintf(timing, sizeof timing, "%.3f s", secs);
        if (result.ok()) {
            std::cout << c.id << " PASS " << c.name << " (" << timing << ")\n";
        } else {
            ++failed;
            std::cout << c.id << " FAIL " << c.name << " (" << timing << ") " << result.summary() << '\n';
        }
    }
    std::cout << (criteria.size() - static_cast<size_t>(failed)) << "/" << criteria.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
