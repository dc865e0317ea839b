#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "homectl/dataset.hpp"
#include "homectl/http_client.hpp"

namespace homectl {

enum class Dimension { KeyInfo, SemanticIntent, MemoryRejection };
inline constexpr size_t kDimensionCount = 3;
inline constexpr std::array<Dimension, kDimensionCount> kAllDimensions = {
    Dimension::KeyInfo, Dimension::SemanticIntent, Dimension::MemoryRejection};

std::string_view to_string(Dimension d);

// What a judge is shown about one prediction.
struct JudgeRequest {
    std::string query;
    std::vector<std::string> history;   // rendered lines, e.g. "用户：灯光"
    std::vector<std::string> memories;
    std::string ground_truth;
    std::string predicted;
};

// Builds a request from a sample and a prediction. Memories are the sample's
// candidate memories.
JudgeRequest make_judge_request(const Sample& s, std::string predicted);

enum class PromptKind { KeyInfo, SemanticIntent, MemoryRejection, Unified, Evaluation };

PromptKind prompt_kind(Dimension d);
std::string_view to_string(PromptKind k);
std::string_view prompt_template(PromptKind k);

// Fills {REQUEST} {HISTORY} {MEMORY} {GROUND_TRUTH} {PREDICT_OUTPUT}.
std::string render_judge_prompt(PromptKind kind, const JudgeRequest& req);

// One judge endpoint. call() counts every invocation, retries included.
class JudgeBackend {
public:
    virtual ~JudgeBackend() = default;

    std::string call(PromptKind kind, const JudgeRequest& req);
    size_t calls() const { return calls_.load(); }
    void reset_calls() { calls_.store(0); }

    virtual std::string id() const = 0;

protected:
    virtual std::string reply(PromptKind kind, const JudgeRequest& req) = 0;

private:
    std::atomic<size_t> calls_{0};
};

using JudgeBackendPtr = std::shared_ptr<JudgeBackend>;

// Deterministic judge for tests and offline runs.
//   constant  fixed reply text
//   sequence  replies in order; the last one repeats
//   exact     positive iff the prediction parses to the ground-truth category
//             and its trimmed text equals the trimmed ground truth
//   category  positive iff the prediction's category matches
//   hash      positive iff a hash of (salt, prediction, ground truth, kind)
//             falls below `p`
// Positive/negative replies are "Y"/"N" for reward prompts and
// "<output>true</output>"/"<output>false</output>" for evaluation prompts.
class ScriptedJudge final : public JudgeBackend {
public:
    enum class Mode { Constant, Sequence, Exact, Category, Hash };

    static JudgeBackendPtr constant(std::string reply, std::string name = "scripted");
    static JudgeBackendPtr sequence(std::vector<std::string> replies, std::string name = "scripted");
    static JudgeBackendPtr exact(std::string name = "scripted-exact");
    static JudgeBackendPtr category(std::string name = "scripted-category");
    static JudgeBackendPtr hash(double p, std::string salt, std::string name = "scripted-hash");

    // A bare string is a constant reply; an object carries "mode" plus the
    // fields named above ("reply", "replies", "p", "salt", "name").
    static JudgeBackendPtr from_json(const json& spec);

    std::string id() const override { return name_; }

protected:
    std::string reply(PromptKind kind, const JudgeRequest& req) override;

private:
    ScriptedJudge(Mode mode, std::string name) : mode_(mode), name_(std::move(name)) {}

    Mode mode_;
    std::string name_;
    std::vector<std::string> replies_;
    std::atomic<size_t> cursor_{0};
    double p_ = 0.5;
    std::string salt_;
};

class RemoteJudge final : public JudgeBackend {
public:
    explicit RemoteJudge(EndpointConfig config) : client_(std::move(config)) {}
    std::string id() const override { return client_.config().id(); }

protected:
    std::string reply(PromptKind kind, const JudgeRequest& req) override;

private:
    HttpJsonClient client_;
};

struct JudgeVerdict {
    bool bit = false;
    std::string raw;
    std::string judge_id;
    bool parse_ok = true;
    int attempts = 1;
};

enum class Bit { Zero, One, Skipped };

std::string_view to_string(Bit b);

struct DimensionVector {
    std::vector<Bit> bits;
    std::vector<std::string> labels;

    size_t size() const { return bits.size(); }
    // Skipped bits count as 0 (they only occur after a veto).
    std::vector<int> values() const;
    json to_json() const;
};

// Trim + ASCII case-fold; "y"/"yes" → true, "n"/"no" → false.
std::optional<bool> parse_yes_no(std::string_view reply);

// Reads <output>true|false</output>, tolerating whitespace, an <explain>
// block and a bare true/false reply.
std::optional<bool> parse_output_envelope(std::string_view reply);

// Calls `backend`, retrying once on an unparseable reply. After that the
// verdict is negative with parse_ok = false.
JudgeVerdict ask_judge(JudgeBackend& backend, PromptKind kind, const JudgeRequest& req);

struct DimensionResult {
    DimensionVector vector;
    std::vector<JudgeVerdict> verdicts;  // one per evaluated dimension
    bool all_parsed() const;
};

// The reward-time judges: three dimension judges and an optional unified one.
class DimensionJudges {
public:
    DimensionJudges(std::array<JudgeBackendPtr, kDimensionCount> dims, JudgeBackendPtr unified = nullptr);

    // One shared backend answers every dimension.
    static DimensionJudges shared(JudgeBackendPtr backend);

    JudgeVerdict judge_dimension(Dimension d, const JudgeRequest& req) const;

    // Full mode evaluates all three; fast mode stops after the first 0 and
    // records the rest as Skipped.
    DimensionResult judge_all(const JudgeRequest& req, bool fast = false) const;

    // Throws std::logic_error when no unified backend is configured.
    JudgeVerdict unified_judge(const JudgeRequest& req) const;
    bool has_unified() const { return unified_ != nullptr; }

    const JudgeBackend& backend(Dimension d) const { return *dims_[static_cast<size_t>(d)]; }
    size_t total_calls() const;

private:
    std::array<JudgeBackendPtr, kDimensionCount> dims_;
    JudgeBackendPtr unified_;
};

struct EvalOutcome {
    bool verdict = false;
    int judge_calls = 0;      // judges consulted: 2 on agreement, 3 on a tie-break
    bool parse_ok = true;     // false when any consulted judge never parsed
    std::vector<JudgeVerdict> verdicts;
};

// Two primary judges queried concurrently; the third only on disagreement.
class EvaluationJudge {
public:
    EvaluationJudge(JudgeBackendPtr first, JudgeBackendPtr second, JudgeBackendPtr tiebreak);

    EvalOutcome eval_judgment(const JudgeRequest& req) const;
    size_t total_calls() const;

private:
    JudgeBackendPtr first_, second_, tiebreak_;
};

}  // namespace homectl
