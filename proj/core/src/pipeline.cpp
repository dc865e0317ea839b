#include "homectl/pipeline.hpp"

#include <sstream>

#include "homectl/parallel.hpp"

namespace homectl {

json TurnResult::to_json() const {
    json retrieved_json = json::array();
    for (const auto& r : retrieved)
        retrieved_json.push_back({{"entry_id", r.entry.entry_id}, {"content", r.entry.content}, {"score", r.score}});
    json log = {{"kind", to_string(memory_log.kind)}};
    if (memory_log.affected_entry_id) log["entry_id"] = *memory_log.affected_entry_id;
    if (memory_log.similarity) log["similarity"] = *memory_log.similarity;
    json j = {{"raw_output", raw_output},
              {"parse_ok", parse_ok},
              {"category", to_string(action.category())},
              {"payload", std::string(action.payload())},
              {"retrieved", retrieved_json},
              {"memory_log", log}};
    j["downstream_command"] = downstream_command ? json(*downstream_command) : json(nullptr);
    if (memory_error) j["memory_error"] = *memory_error;
    return j;
}

TurnOutput run_turn(const MemoryBank& bank, const HomeEnvironment& env, const std::vector<DialogueTurn>& history,
                    const std::string& query, Policy& policy, const PipelineConfig& config, const std::string& tag) {
    TurnOutput out{{}, bank};
    TurnResult& r = out.result;
    r.retrieved = bank.retrieve(query, std::max<size_t>(1, config.memory.retrieval_k));

    PolicyContext ctx;
    ctx.system_prompt = config.system_prompt;
    ctx.environment = env;
    ctx.history = history;
    ctx.query = query;
    ctx.tag = tag;
    if (config.present_all_candidates) {
        ctx.retrieved_memories = bank.contents();
    } else {
        for (const auto& e : r.retrieved) ctx.retrieved_memories.push_back(e.entry.content);
    }

    r.raw_output = policy.complete(ctx).text;
    if (auto parsed = try_parse_action(r.raw_output)) {
        r.action = std::move(*parsed);
    } else {
        r.action = ActionOutput{NoRewrite{}, r.raw_output};
        r.parse_ok = false;
    }

    switch (r.action.category()) {
        case PrefixCategory::Memory:
            try {
                auto applied = bank.apply_action(r.action, query);
                out.bank = std::move(applied.bank);
                r.memory_log = std::move(applied.log);
            } catch (const MemoryError& e) {
                r.memory_error = e.what();
            }
            break;
        case PrefixCategory::Rewrite:
            r.downstream_command = std::string(r.action.payload());
            break;
        case PrefixCategory::NoRewrite:
            r.downstream_command = query;
            break;
    }
    return out;
}

DialogueResult run_dialogue(const LifeDialogue& d, Policy& policy, const PipelineConfig& config) {
    DialogueResult out;
    MemoryBank bank(config.memory);
    std::vector<DialogueTurn> history;
    for (size_t i = 0; i < d.turns.size(); ++i) {
        const LifeTurn& turn = d.turns[i];
        if (i > 0 && turn.session_index != d.turns[i - 1].session_index) {
            out.snapshots.push_back(snapshot(bank));
            history.clear();
        }
        if (i + 1 == d.turns.size()) {
            out.bank_before_final = bank;
            out.final_history = history;
        }
        auto step = run_turn(bank, d.environment, history, turn.query, policy, config,
                             d.id + "#" + std::to_string(i));
        bank = std::move(step.bank);
        history.push_back({Role::User, turn.query});
        history.push_back({Role::Assistant, step.result.raw_output});
        out.trajectory.push_back(bank);
        out.turns.push_back(std::move(step.result));
    }
    out.snapshots.push_back(snapshot(bank));
    if (!out.turns.empty()) out.final = out.turns.back();
    return out;
}

json EvaluationRow::to_json() const {
    json j = {{"sample_id", sample_id},
              {"category", to_string(category)},
              {"generated", generated},
              {"f1", f1},
              {"bleu1", bleu1},
              {"accuracy_bit", accuracy_bit ? 1 : 0},
              {"judge_calls", judge_calls},
              {"parse_ok", parse_ok},
              {"judge_parse_ok", judge_parse_ok},
              {"initial_bank_size", initial_bank_size}};
    if (memory_error) j["memory_error"] = *memory_error;
    return j;
}

json EvaluationResult::to_json() const {
    json rows_json = json::array();
    for (const auto& r : rows) rows_json.push_back(r.to_json());
    return {{"report", report.to_json()}, {"rows", rows_json}};
}

std::string rows_to_csv(std::span<const EvaluationRow> rows) {
    std::ostringstream os;
    os << "sample_id,category,f1,bleu1,accuracy_bit,judge_calls,parse_ok\n";
    for (const auto& r : rows) {
        os << r.sample_id << ',' << to_string(r.category) << ',' << r.f1 << ',' << r.bleu1 << ','
           << (r.accuracy_bit ? 1 : 0) << ',' << r.judge_calls << ',' << (r.parse_ok ? 1 : 0) << '\n';
    }
    return os.str();
}

namespace {

// Fills the scoring fields of a row from the final output.
void score_row(EvaluationRow& row, const TurnResult& turn, const std::string& ground_truth, PrefixCategory gt_category,
               JudgeRequest req, const EvaluationJudge& judge) {
    row.generated = turn.raw_output;
    row.parse_ok = turn.parse_ok;
    row.memory_error = turn.memory_error;
    row.f1 = f1(turn.raw_output, ground_truth);
    row.bleu1 = bleu1(turn.raw_output, ground_truth);
    if (row.category == MajorCategory::NoMemory) {
        row.accuracy_bit = prefix_match(turn.raw_output, gt_category);
        return;
    }
    req.predicted = turn.raw_output;
    auto outcome = judge.eval_judgment(req);
    row.accuracy_bit = outcome.verdict;
    row.judge_calls = outcome.judge_calls;
    row.judge_parse_ok = outcome.parse_ok;
}

template <class Item, class Fn>
EvaluationResult run_rows(std::span<const Item> items, const PipelineConfig& config, Fn&& evaluate_one) {
    if (items.empty()) throw DataError(DataError::Kind::EmptyDataset, 0, "", "nothing to evaluate");
    std::vector<std::optional<EvaluationRow>> slots(items.size());
    try {
        parallel_for(items.size(), config.parallelism, [&](size_t i) { slots[i] = evaluate_one(items[i]); });
    } catch (const EndpointError& e) {
        std::vector<EvaluationRow> partial;
        for (auto& s : slots)
            if (s) partial.push_back(std::move(*s));
        throw EvaluationAborted(e.what(), std::move(partial));
    }
    EvaluationResult res;
    res.rows.reserve(items.size());
    for (auto& s : slots) res.rows.push_back(std::move(*s));
    std::vector<MetricRow> metric_rows;
    metric_rows.reserve(res.rows.size());
    for (const auto& r : res.rows) metric_rows.push_back(r.metric_row());
    res.report = aggregate(metric_rows);
    return res;
}

}  // namespace

EvaluationResult evaluate_dataset(std::span<const Sample> samples, Policy& policy, const EvaluationJudge& judge,
                                  const PipelineConfig& config) {
    return run_rows(samples, config, [&](const Sample& s) {
        EvaluationRow row;
        row.sample_id = s.id;
        row.category = s.category.major;
        const MemoryBank bank = MemoryBank::from_contents(s.candidate_memories, config.memory);
        row.initial_bank_size = bank.size();
        auto step = run_turn(bank, s.environment, s.history, s.query, policy, config, s.id);
        score_row(row, step.result, s.ground_truth, s.gt_category, make_judge_request(s, {}), judge);
        return row;
    });
}

EvaluationResult evaluate_dialogues(std::span<const LifeDialogue> dialogues, Policy& policy,
                                    const EvaluationJudge& judge, const PipelineConfig& config) {
    return run_rows(dialogues, config, [&](const LifeDialogue& d) {
        EvaluationRow row;
        row.sample_id = d.id;
        row.category = major_for_prefix(d.final_gt_category);
        auto res = run_dialogue(d, policy, config);
        row.initial_bank_size = res.bank_before_final.size();
        JudgeRequest req;
        req.query = d.turns.empty() ? std::string() : d.turns.back().query;
        req.history = history_lines(res.final_history);
        req.memories = res.bank_before_final.contents();
        req.ground_truth = d.final_ground_truth;
        score_row(row, res.final, d.final_ground_truth, d.final_gt_category, std::move(req), judge);
        return row;
    });
}

}  // namespace homectl
