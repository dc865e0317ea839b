#include "cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "homectl/backends.hpp"
#include "homectl/config.hpp"
#include "homectl/dataset.hpp"
#include "homectl/log.hpp"
#include "homectl/memory.hpp"
#include "homectl/pipeline.hpp"
#include "homectl/service.hpp"
#include "homectl/text.hpp"

namespace homectl::cli {

namespace {

class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

AppConfig load_config(const std::string& path) {
    AppConfig c = path.empty() ? AppConfig{} : AppConfig::load(path);
    c.apply_env();
    return c;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataError::Kind::Io, 0, "", "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void print_report(std::ostream& out, const MetricReport& rep) {
    out << std::left << std::setw(22) << "category" << std::right << std::setw(7) << "n" << std::setw(9) << "F1"
        << std::setw(9) << "B1" << std::setw(9) << "Acc" << '\n';
    auto line = [&](std::string_view name, const MetricCell& c) {
        out << std::left << std::setw(22) << name << std::right << std::setw(7) << c.count << std::fixed
            << std::setprecision(4) << std::setw(9) << c.f1 << std::setw(9) << c.bleu1 << std::setw(9) << c.accuracy
            << '\n';
    };
    for (const auto& [cat, cell] : rep.per_category) line(to_string(cat), cell);
    line("overall", rep.overall);
    out.unsetf(std::ios::fixed);
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string dataset, kind = "memhome", policy, judges, out, csv;
    size_t parallelism = 0;
    bool all_candidates = false;
};

int cmd_evaluate(const EvaluateArgs& a, const AppConfig& cfg, std::ostream& out, std::ostream& err) {
    auto policy = make_policy(a.policy, cfg);
    auto judge = make_evaluation_judge(a.judges, cfg);
    PipelineConfig pc = cfg.pipeline;
    if (a.parallelism) pc.parallelism = a.parallelism;
    if (a.all_candidates) pc.present_all_candidates = true;

    EvaluationResult res;
    try {
        if (a.kind == "memhome") {
            auto samples = load_samples(a.dataset);
            res = evaluate_dataset(samples, *policy, judge, pc);
        } else {
            auto dialogues = load_dialogues(a.dataset);
            res = evaluate_dialogues(dialogues, *policy, judge, pc);
        }
    } catch (const EvaluationAborted& e) {
        const std::string partial = a.out + ".partial.json";
        json rows = json::array();
        for (const auto& r : e.rows) rows.push_back(r.to_json());
        write_text_file(partial, json({{"aborted", e.what()}, {"rows", rows}}).dump(2) + "\n");
        err << "evaluation aborted: " << e.what() << "\n" << e.rows.size() << " finished rows written to " << partial
            << '\n';
        return kEndpointError;
    }
    write_text_file(a.out, res.to_json().dump(2) + "\n");
    if (!a.csv.empty()) write_text_file(a.csv, res.report.to_csv());
    print_report(out, res.report);
    size_t unparsed = 0;
    for (const auto& r : res.rows) unparsed += r.parse_ok ? 0 : 1;
    if (unparsed) out << unparsed << " output(s) had no recognized prefix\n";
    out << "report written to " << a.out << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

struct ScoreArgs {
    std::string rollouts, judges, policy, out;
    std::optional<double> lambda;
    std::string mode;
    bool fast = false, unified = false;
};

int cmd_score(const ScoreArgs& a, AppConfig cfg, std::ostream& out) {
    if (a.lambda) cfg.reward.lambda = *a.lambda;
    if (!a.mode.empty()) {
        auto m = reward_mode_from_string(a.mode);
        if (!m) throw UsageError("--mode must be veto or additive");
        cfg.reward.mode = *m;
    }
    cfg.reward.fast = cfg.reward.fast || a.fast;
    cfg.reward.unified = cfg.reward.unified || a.unified;
    cfg.reward.validate();

    std::shared_ptr<Policy> fallback;
    if (!a.policy.empty()) fallback = make_policy(a.policy, cfg);
    RewardService service(make_reward_judges(a.judges, cfg), cfg.reward, cfg.service, fallback);

    // One rollout object per line, same schema as the service's rollouts.
    std::vector<json> lines;
    {
        std::istringstream in(read_file(a.rollouts));
        std::string line;
        size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (text::trim(line).empty()) continue;
            try {
                lines.push_back(json::parse(line));
            } catch (const json::exception& e) {
                throw DataError(DataError::Kind::MalformedRecord, n, "", a.rollouts + ":" + std::to_string(n) + ": " + e.what());
            }
        }
    }
    if (lines.empty()) throw DataError(DataError::Kind::EmptyDataset, 0, "", a.rollouts + ": no rollouts");

    std::string result_lines;
    double total = 0.0;
    for (size_t begin = 0; begin < lines.size(); begin += cfg.service.max_batch) {
        const size_t end = std::min(lines.size(), begin + cfg.service.max_batch);
        json batch = {{"rollouts", json(std::vector<json>(lines.begin() + begin, lines.begin() + end))}};
        ScoreRequest req;
        try {
            req = ScoreRequest::from_json(batch);
        } catch (const ServiceError& e) {
            throw DataError(DataError::Kind::SchemaViolation, 0, "", a.rollouts + " (lines " + std::to_string(begin + 1) +
                                                                          "-" + std::to_string(end) + "): " + e.what());
        }
        ScoreResponse resp;
        try {
            resp = service.handle_score(req);
        } catch (const ServiceError& e) {
            if (e.status() == 502) throw EndpointError(EndpointError::Kind::Unavailable, e.what());
            throw DataError(DataError::Kind::SchemaViolation, 0, "", a.rollouts + ": " + e.what());
        }
        const json results = resp.to_json().at("results");
        for (const auto& r : results) {
            total += r.at("reward").get<double>();
            result_lines += r.dump() + "\n";
        }
    }
    write_text_file(a.out, result_lines);
    out << lines.size() << " rollouts scored, mean reward " << total / static_cast<double>(lines.size()) << '\n'
        << "rewards written to " << a.out << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
    std::string judges, policy, host;
    int port = -1;
};

int cmd_serve(const ServeArgs& a, const AppConfig& cfg, std::ostream& out) {
    std::shared_ptr<Policy> fallback;
    if (!a.policy.empty()) fallback = make_policy(a.policy, cfg);
    RewardService service(make_reward_judges(a.judges, cfg), cfg.reward, cfg.service, fallback);
    const std::string host = a.host.empty() ? cfg.service.host : a.host;
    const int port = service.start(host, a.port >= 0 ? a.port : cfg.service.port);
    out << "listening on http://" << host << ':' << port << " (POST /v1/score, GET /healthz)" << std::endl;
    g_stop.store(false);
    auto prev_int = std::signal(SIGINT, on_signal);
    auto prev_term = std::signal(SIGTERM, on_signal);
    while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    service.stop();
    std::signal(SIGINT, prev_int);
    std::signal(SIGTERM, prev_term);
    out << "stopped\n";
    return kOk;
}

// ---------------------------------------------------------------------------

int cmd_stats(const std::string& dataset, bool as_json, std::ostream& out) {
    auto samples = load_samples(dataset);
    auto report = compute_stats(samples);
    if (as_json) out << report.to_json().dump(2) << '\n';
    else out << report.to_table();
    return kOk;
}

// ---------------------------------------------------------------------------

struct GenArgs {
    std::uint64_t seed = 7;
    size_t no_memory = kReferenceEvalCounts.no_memory;
    size_t memory_use = kReferenceEvalCounts.memory_use;
    size_t state_change = kReferenceEvalCounts.state_change;
    size_t dialogues = 100;
    std::string kind = "memhome", out, oracle_rules;
};

int cmd_gen_fixtures(const GenArgs& a, std::ostream& out) {
    json rules = json::array();
    if (a.kind == "memhome") {
        auto samples = generate_fixtures(a.seed, {a.no_memory, a.memory_use, a.state_change});
        write_text_file(a.out, to_jsonl(samples));
        for (const auto& s : samples) rules.push_back({{"tag", s.id}, {"output", s.ground_truth}});
        out << samples.size() << " samples written to " << a.out << '\n';
    } else {
        auto dialogues = generate_dialogues(a.seed, a.dialogues);
        write_text_file(a.out, to_jsonl(dialogues));
        for (const auto& d : dialogues) {
            for (size_t i = 0; i < d.turns.size(); ++i) {
                const bool last = i + 1 == d.turns.size();
                std::string output = last ? d.final_ground_truth
                                          : (d.turns[i].expected_action ? d.turns[i].expected_action->raw : "no-rewrite");
                rules.push_back({{"tag", d.id + "#" + std::to_string(i)}, {"output", output}});
            }
        }
        out << dialogues.size() << " dialogues written to " << a.out << '\n';
    }
    if (!a.oracle_rules.empty()) {
        write_text_file(a.oracle_rules, json({{"default", "no-rewrite"}, {"rules", rules}}).dump(2) + "\n");
        out << "oracle policy rules written to " << a.oracle_rules << '\n';
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct ReplArgs {
    std::string policy, memories, bank, enter_room = "客厅";
};

void print_bank(std::ostream& out, const MemoryBank& bank) {
    if (bank.empty()) out << "  (empty)\n";
    for (const auto& e : bank.entries())
        out << "  " << e.entry_id << " [turn " << e.updated_turn << "] " << e.content << '\n';
}

int cmd_repl(const ReplArgs& a, const AppConfig& cfg, std::istream& in, std::ostream& out) {
    auto policy = make_policy(a.policy, cfg);
    MemoryBank bank(cfg.pipeline.memory);
    if (!a.bank.empty()) {
        bank = load_snapshot(a.bank);
    } else if (!a.memories.empty()) {
        std::vector<std::string> contents;
        std::istringstream ss(read_file(a.memories));
        for (std::string line; std::getline(ss, line);)
            if (!text::trim(line).empty()) contents.emplace_back(text::trim(line));
        bank = MemoryBank::from_contents(contents, cfg.pipeline.memory);
    }
    HomeEnvironment env{{a.enter_room}, {}, a.enter_room};
    std::vector<DialogueTurn> history;
    out << "policy " << policy->id() << ", " << bank.size() << " memories. :help for commands.\n";
    std::string line;
    while (out << "> " << std::flush, std::getline(in, line)) {
        const std::string cmd(text::trim(line));
        if (cmd.empty()) continue;
        if (cmd == ":quit" || cmd == ":q") break;
        if (cmd == ":help") {
            out << "  <query>        run one turn\n  :bank          list memories\n  :history       show dialogue history\n"
                   "  :reset         clear history and memories\n  :save <path>   write a bank snapshot\n"
                   "  :load <path>   read a bank snapshot\n  :quit\n";
            continue;
        }
        if (cmd == ":bank") {
            print_bank(out, bank);
            continue;
        }
        if (cmd == ":history") {
            for (const auto& h : history_lines(history)) out << "  " << h << '\n';
            continue;
        }
        if (cmd == ":reset") {
            bank = MemoryBank(cfg.pipeline.memory);
            history.clear();
            out << "  reset\n";
            continue;
        }
        if (cmd.rfind(":save ", 0) == 0 || cmd.rfind(":load ", 0) == 0) {
            const std::string path(text::trim(std::string_view(cmd).substr(6)));
            try {
                if (cmd[1] == 's') {
                    save_snapshot(bank, path);
                    out << "  saved " << bank.size() << " memories to " << path << '\n';
                } else {
                    bank = load_snapshot(path);
                    out << "  loaded " << bank.size() << " memories from " << path << '\n';
                }
            } catch (const std::exception& e) {
                out << "  error: " << e.what() << '\n';
            }
            continue;
        }
        if (cmd[0] == ':') {
            out << "  unknown command " << cmd << '\n';
            continue;
        }
        const size_t before = bank.size();
        auto step = run_turn(bank, env, history, cmd, *policy, cfg.pipeline);
        const TurnResult& r = step.result;
        out << "  retrieved:";
        if (r.retrieved.empty()) out << " none";
        out << '\n';
        for (const auto& e : r.retrieved)
            out << "    " << e.entry.entry_id << ' ' << std::fixed << std::setprecision(3) << e.score << ' '
                << e.entry.content << '\n';
        out.unsetf(std::ios::fixed);
        out << "  output:    " << r.raw_output << '\n';
        out << "  action:    " << to_string(r.action.category());
        if (!r.parse_ok) out << " (no recognized prefix)";
        if (!r.action.payload().empty()) out << " \"" << r.action.payload() << '"';
        out << '\n';
        out << "  bank:      " << to_string(r.memory_log.kind);
        if (r.memory_log.affected_entry_id) out << ' ' << *r.memory_log.affected_entry_id;
        out << ", " << before << " -> " << step.bank.size() << " entries\n";
        if (r.memory_error) out << "  memory error: " << *r.memory_error << '\n';
        if (r.downstream_command) out << "  downstream: " << *r.downstream_command << '\n';
        bank = std::move(step.bank);
        history.push_back({Role::User, cmd});
        history.push_back({Role::Assistant, r.raw_output});
    }
    return kOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Memory-driven device control: evaluation, reward scoring and fixtures", "homectl"};
    app.require_subcommand(1);
    std::string config_path;
    bool verbose = false;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_flag("-v,--verbose", verbose, "log retries and request failures");

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "run a dataset through the pipeline and write a metric report");
    evaluate->add_option("--dataset", ev.dataset, "JSONL dataset")->required();
    evaluate->add_option("--kind", ev.kind, "memhome or memhomelife")->check(CLI::IsMember({"memhome", "memhomelife"}));
    evaluate->add_option("--policy", ev.policy, "scripted:<rules.json> | remote[:<url>]")->required();
    evaluate->add_option("--judges", ev.judges, "scripted:<verdicts.json> | remote[:<url>]")->required();
    evaluate->add_option("--out", ev.out, "report JSON path")->required();
    evaluate->add_option("--csv", ev.csv, "also write the report as CSV");
    evaluate->add_option("--parallelism", ev.parallelism, "samples evaluated concurrently");
    evaluate->add_flag("--all-candidates", ev.all_candidates, "show every memory instead of the retrieved top-k");

    ScoreArgs sc;
    auto* score = app.add_subcommand("score", "score an offline rollout file");
    score->add_option("--rollouts", sc.rollouts, "JSONL, one rollout per line")->required();
    score->add_option("--judges", sc.judges, "scripted:<verdicts.json> | remote[:<url>]")->required();
    score->add_option("--policy", sc.policy, "policy used to score prefixes when logprobs are missing");
    score->add_option("--out", sc.out, "output JSONL")->required();
    score->add_option("--lambda", sc.lambda, "prefix reward weight");
    score->add_option("--mode", sc.mode, "veto or additive");
    score->add_flag("--fast", sc.fast, "stop judging at the first failed dimension");
    score->add_flag("--unified", sc.unified, "use the single unified judge");

    ServeArgs sv;
    auto* serve = app.add_subcommand("serve", "start the HTTP reward service");
    serve->add_option("--judges", sv.judges, "scripted:<verdicts.json> | remote[:<url>]")->required();
    serve->add_option("--policy", sv.policy, "policy used to score prefixes when logprobs are missing");
    serve->add_option("--host", sv.host, "bind address");
    serve->add_option("--port", sv.port, "port (0 picks a free one)");

    std::string stats_dataset;
    bool stats_json = false;
    auto* stats = app.add_subcommand("stats", "print dataset statistics");
    stats->add_option("--dataset", stats_dataset, "JSONL dataset")->required();
    stats->add_flag("--json", stats_json, "emit JSON");

    GenArgs gen;
    auto* gen_fixtures = app.add_subcommand("gen-fixtures", "generate a synthetic dataset");
    gen_fixtures->add_option("--seed", gen.seed, "generator seed");
    gen_fixtures->add_option("--no-memory", gen.no_memory, "no-memory samples");
    gen_fixtures->add_option("--memory-use", gen.memory_use, "memory-use samples");
    gen_fixtures->add_option("--state-change", gen.state_change, "memory-state-change samples");
    gen_fixtures->add_option("--dialogues", gen.dialogues, "dialogue count (memhomelife)");
    gen_fixtures->add_option("--kind", gen.kind, "memhome or memhomelife")->check(CLI::IsMember({"memhome", "memhomelife"}));
    gen_fixtures->add_option("--out", gen.out, "output JSONL")->required();
    gen_fixtures->add_option("--emit-oracle-rules", gen.oracle_rules,
                             "also write scripted policy rules that echo every ground truth");

    ReplArgs rp;
    auto* repl = app.add_subcommand("repl", "interactive single-session loop");
    repl->add_option("--policy", rp.policy, "scripted:<rules.json> | remote[:<url>]")->required();
    repl->add_option("--memories", rp.memories, "initial memories, one per line")->check(CLI::ExistingFile);
    repl->add_option("--bank", rp.bank, "initial bank snapshot")->check(CLI::ExistingFile);
    repl->add_option("--enter-room", rp.enter_room, "room the user is in");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kOk : kUsage;
    }

    if (verbose) {
        set_log_sink([&err](LogLevel, std::string_view msg) { err << msg << '\n'; });
    }
    try {
        AppConfig cfg = load_config(config_path);
        if (*evaluate) return cmd_evaluate(ev, cfg, out, err);
        if (*score) return cmd_score(sc, cfg, out);
        if (*serve) return cmd_serve(sv, cfg, out);
        if (*stats) return cmd_stats(stats_dataset, stats_json, out);
        if (*gen_fixtures) return cmd_gen_fixtures(gen, out);
        if (*repl) return cmd_repl(rp, cfg, in, out);
    } catch (const EndpointError& e) {
        err << "endpoint error: " << e.what() << '\n';
        return kEndpointError;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const MemoryError& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kUsage;
}

}  // namespace homectl::cli
