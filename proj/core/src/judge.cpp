#include "homectl/judge.hpp"

#include <future>
#include <stdexcept>

#include "homectl/protocol.hpp"
#include "homectl/text.hpp"
#include "prompt_data.hpp"

namespace homectl {

std::string_view to_string(Dimension d) {
    switch (d) {
        case Dimension::KeyInfo: return "key_info";
        case Dimension::SemanticIntent: return "semantic_intent";
        case Dimension::MemoryRejection: return "memory_rejection";
    }
    return "?";
}

std::string_view to_string(PromptKind k) {
    switch (k) {
        case PromptKind::KeyInfo: return "key_info";
        case PromptKind::SemanticIntent: return "semantic_intent";
        case PromptKind::MemoryRejection: return "memory_rejection";
        case PromptKind::Unified: return "unified";
        case PromptKind::Evaluation: return "evaluation";
    }
    return "?";
}

std::string_view to_string(Bit b) {
    switch (b) {
        case Bit::Zero: return "0";
        case Bit::One: return "1";
        case Bit::Skipped: return "skipped";
    }
    return "?";
}

PromptKind prompt_kind(Dimension d) {
    switch (d) {
        case Dimension::KeyInfo: return PromptKind::KeyInfo;
        case Dimension::SemanticIntent: return PromptKind::SemanticIntent;
        case Dimension::MemoryRejection: return PromptKind::MemoryRejection;
    }
    return PromptKind::Unified;
}

std::string_view prompt_template(PromptKind k) {
    switch (k) {
        case PromptKind::KeyInfo: return prompt_data::judge_key_info;
        case PromptKind::SemanticIntent: return prompt_data::judge_semantic_intent;
        case PromptKind::MemoryRejection: return prompt_data::judge_memory_rejection;
        case PromptKind::Unified: return prompt_data::judge_unified;
        case PromptKind::Evaluation: return prompt_data::eval_judge;
    }
    return {};
}

JudgeRequest make_judge_request(const Sample& s, std::string predicted) {
    JudgeRequest r;
    r.query = s.query;
    r.history = history_lines(s.history);
    r.memories = s.candidate_memories;
    r.ground_truth = s.ground_truth;
    r.predicted = std::move(predicted);
    return r;
}

std::string render_judge_prompt(PromptKind kind, const JudgeRequest& req) {
    return text::render_template(prompt_template(kind), {{"REQUEST", req.query},
                                                         {"HISTORY", json(req.history).dump()},
                                                         {"MEMORY", json(req.memories).dump()},
                                                         {"GROUND_TRUTH", req.ground_truth},
                                                         {"PREDICT_OUTPUT", req.predicted}});
}

std::string JudgeBackend::call(PromptKind kind, const JudgeRequest& req) {
    calls_.fetch_add(1);
    return reply(kind, req);
}

// ---------------------------------------------------------------------------
// scripted

JudgeBackendPtr ScriptedJudge::constant(std::string reply, std::string name) {
    auto j = std::shared_ptr<ScriptedJudge>(new ScriptedJudge(Mode::Constant, std::move(name)));
    j->replies_ = {std::move(reply)};
    return j;
}

JudgeBackendPtr ScriptedJudge::sequence(std::vector<std::string> replies, std::string name) {
    if (replies.empty()) throw std::invalid_argument("scripted judge sequence must not be empty");
    auto j = std::shared_ptr<ScriptedJudge>(new ScriptedJudge(Mode::Sequence, std::move(name)));
    j->replies_ = std::move(replies);
    return j;
}

JudgeBackendPtr ScriptedJudge::exact(std::string name) {
    return std::shared_ptr<ScriptedJudge>(new ScriptedJudge(Mode::Exact, std::move(name)));
}

JudgeBackendPtr ScriptedJudge::category(std::string name) {
    return std::shared_ptr<ScriptedJudge>(new ScriptedJudge(Mode::Category, std::move(name)));
}

JudgeBackendPtr ScriptedJudge::hash(double p, std::string salt, std::string name) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("scripted hash judge: p must be in [0,1]");
    auto j = std::shared_ptr<ScriptedJudge>(new ScriptedJudge(Mode::Hash, std::move(name)));
    j->p_ = p;
    j->salt_ = std::move(salt);
    return j;
}

JudgeBackendPtr ScriptedJudge::from_json(const json& spec) {
    if (spec.is_string()) return constant(spec.get<std::string>());
    if (!spec.is_object()) throw std::invalid_argument("judge spec must be a string or an object");
    const std::string mode = spec.at("mode").get<std::string>();
    const std::string name = spec.value("name", "scripted-" + mode);
    if (mode == "constant") return constant(spec.at("reply").get<std::string>(), name);
    if (mode == "sequence") return sequence(spec.at("replies").get<std::vector<std::string>>(), name);
    if (mode == "exact") return exact(name);
    if (mode == "category") return category(name);
    if (mode == "hash") return hash(spec.value("p", 0.5), spec.value("salt", std::string()), name);
    throw std::invalid_argument("unknown scripted judge mode '" + mode + "'");
}

std::string ScriptedJudge::reply(PromptKind kind, const JudgeRequest& req) {
    auto verdict = [kind](bool positive) -> std::string {
        if (kind == PromptKind::Evaluation) return positive ? "<output>true</output>" : "<output>false</output>";
        return positive ? "Y" : "N";
    };
    switch (mode_) {
        case Mode::Constant: return replies_.front();
        case Mode::Sequence: {
            size_t i = cursor_.fetch_add(1);
            return replies_[std::min(i, replies_.size() - 1)];
        }
        case Mode::Exact: {
            auto gt = try_parse_action(req.ground_truth);
            bool ok = gt && prefix_match(req.predicted, gt->category()) &&
                      text::trim(req.predicted) == text::trim(req.ground_truth);
            return verdict(ok);
        }
        case Mode::Category: {
            auto gt = try_parse_action(req.ground_truth);
            return verdict(gt && prefix_match(req.predicted, gt->category()));
        }
        case Mode::Hash: {
            std::string key = salt_;
            key += '\x1f';
            key += req.predicted;
            key += '\x1f';
            key += req.ground_truth;
            key += '\x1f';
            key += to_string(kind);
            double u = static_cast<double>(text::fnv1a(key) >> 11) * 0x1.0p-53;
            return verdict(u < p_);
        }
    }
    return verdict(false);
}

std::string RemoteJudge::reply(PromptKind kind, const JudgeRequest& req) {
    return chat_complete(client_, render_judge_prompt(kind, req));
}

// ---------------------------------------------------------------------------
// parsing

std::optional<bool> parse_yes_no(std::string_view reply) {
    const std::string s = text::ascii_lower(text::trim(reply));
    if (s == "y" || s == "yes") return true;
    if (s == "n" || s == "no") return false;
    return std::nullopt;
}

std::optional<bool> parse_output_envelope(std::string_view reply) {
    const std::string s = text::ascii_lower(reply);
    std::string_view inner;
    const auto open = s.find("<output>");
    if (open != std::string::npos) {
        const auto start = open + 8;
        const auto close = s.find("</output>", start);
        if (close == std::string::npos) return std::nullopt;
        inner = std::string_view(s).substr(start, close - start);
    } else {
        inner = s;
    }
    inner = text::trim(inner);
    if (inner == "true") return true;
    if (inner == "false") return false;
    return std::nullopt;
}

JudgeVerdict ask_judge(JudgeBackend& backend, PromptKind kind, const JudgeRequest& req) {
    auto parse = [kind](std::string_view r) {
        return kind == PromptKind::Evaluation ? parse_output_envelope(r) : parse_yes_no(r);
    };
    JudgeVerdict v;
    v.judge_id = backend.id();
    for (v.attempts = 1; v.attempts <= 2; ++v.attempts) {
        v.raw = backend.call(kind, req);
        if (auto bit = parse(v.raw)) {
            v.bit = *bit;
            v.parse_ok = true;
            return v;
        }
    }
    v.attempts = 2;
    v.bit = false;
    v.parse_ok = false;
    return v;
}

// ---------------------------------------------------------------------------
// dimension judges

std::vector<int> DimensionVector::values() const {
    std::vector<int> out;
    out.reserve(bits.size());
    for (Bit b : bits) out.push_back(b == Bit::One ? 1 : 0);
    return out;
}

json DimensionVector::to_json() const {
    json arr = json::array();
    for (Bit b : bits) {
        if (b == Bit::Skipped) arr.push_back(nullptr);
        else arr.push_back(b == Bit::One ? 1 : 0);
    }
    return arr;
}

bool DimensionResult::all_parsed() const {
    for (const auto& v : verdicts)
        if (!v.parse_ok) return false;
    return true;
}

DimensionJudges::DimensionJudges(std::array<JudgeBackendPtr, kDimensionCount> dims, JudgeBackendPtr unified)
    : dims_(std::move(dims)), unified_(std::move(unified)) {
    for (const auto& d : dims_)
        if (!d) throw std::invalid_argument("every dimension judge must be configured");
}

DimensionJudges DimensionJudges::shared(JudgeBackendPtr backend) {
    return DimensionJudges({backend, backend, backend}, backend);
}

JudgeVerdict DimensionJudges::judge_dimension(Dimension d, const JudgeRequest& req) const {
    return ask_judge(*dims_[static_cast<size_t>(d)], prompt_kind(d), req);
}

DimensionResult DimensionJudges::judge_all(const JudgeRequest& req, bool fast) const {
    DimensionResult out;
    bool vetoed = false;
    for (Dimension d : kAllDimensions) {
        out.vector.labels.emplace_back(to_string(d));
        if (vetoed) {
            out.vector.bits.push_back(Bit::Skipped);
            continue;
        }
        auto v = judge_dimension(d, req);
        out.vector.bits.push_back(v.bit ? Bit::One : Bit::Zero);
        if (fast && !v.bit) vetoed = true;
        out.verdicts.push_back(std::move(v));
    }
    return out;
}

JudgeVerdict DimensionJudges::unified_judge(const JudgeRequest& req) const {
    if (!unified_) throw std::logic_error("no unified judge configured");
    return ask_judge(*unified_, PromptKind::Unified, req);
}

size_t DimensionJudges::total_calls() const {
    // A backend shared across slots is counted once.
    std::vector<const JudgeBackend*> seen;
    size_t n = 0;
    auto add = [&](const JudgeBackendPtr& p) {
        if (!p) return;
        for (auto* s : seen)
            if (s == p.get()) return;
        seen.push_back(p.get());
        n += p->calls();
    };
    for (const auto& d : dims_) add(d);
    add(unified_);
    return n;
}

// ---------------------------------------------------------------------------
// evaluation judge

EvaluationJudge::EvaluationJudge(JudgeBackendPtr first, JudgeBackendPtr second, JudgeBackendPtr tiebreak)
    : first_(std::move(first)), second_(std::move(second)), tiebreak_(std::move(tiebreak)) {
    if (!first_ || !second_ || !tiebreak_) throw std::invalid_argument("evaluation needs three judges");
}

EvalOutcome EvaluationJudge::eval_judgment(const JudgeRequest& req) const {
    EvalOutcome out;
    auto second = std::async(std::launch::async, [&] { return ask_judge(*second_, PromptKind::Evaluation, req); });
    JudgeVerdict a = ask_judge(*first_, PromptKind::Evaluation, req);
    JudgeVerdict b = second.get();
    out.judge_calls = 2;
    out.parse_ok = a.parse_ok && b.parse_ok;
    const bool agree = a.bit == b.bit;
    out.verdicts.push_back(std::move(a));
    out.verdicts.push_back(std::move(b));
    if (agree) {
        out.verdict = out.verdicts[0].bit;
        return out;
    }
    JudgeVerdict c = ask_judge(*tiebreak_, PromptKind::Evaluation, req);
    out.judge_calls = 3;
    out.verdict = c.bit;
    out.parse_ok = out.parse_ok && c.parse_ok;
    out.verdicts.push_back(std::move(c));
    return out;
}

size_t EvaluationJudge::total_calls() const {
    std::vector<const JudgeBackend*> seen;
    size_t n = 0;
    for (const auto* p : {&first_, &second_, &tiebreak_}) {
        bool dup = false;
        for (auto* s : seen) dup = dup || s == p->get();
        if (dup) continue;
        seen.push_back(p->get());
        n += (*p)->calls();
    }
    return n;
}

}  // namespace homectl
