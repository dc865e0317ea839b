#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "homectl/dataset.hpp"
#include "homectl/http_client.hpp"

namespace homectl {

// Everything the device-control policy sees for one query.
struct PolicyContext {
    std::string system_prompt;  // template with {MEMORY}/{HISTORY}/{QUERY}/{ENTER_ROOM} slots
    HomeEnvironment environment;
    std::vector<std::string> retrieved_memories;
    std::vector<DialogueTurn> history;
    std::string query;
    // Opaque request tag (the sample id during dataset evaluation). Remote
    // policies ignore it; scripted rules may match on it.
    std::string tag;
};

struct Completion {
    std::string text;
    std::optional<std::vector<double>> prefix_logprobs;
};

// The built-in device-control prompt template.
std::string_view device_control_template();

// Fills the template in ctx.system_prompt (or the built-in one when empty).
std::string render_policy_prompt(const PolicyContext& ctx);

// JSON array renderings used in prompt slots, e.g. ["用户：灯光", "助手：…"].
std::string render_memory_list(const std::vector<std::string>& memories);
std::string render_history(const std::vector<DialogueTurn>& history);

class Policy {
public:
    virtual ~Policy() = default;

    // Throws EndpointError (Unavailable / Timeout / Protocol).
    virtual Completion complete(const PolicyContext& ctx) = 0;

    // Per-token natural-log probabilities of the forced prefix. Throws
    // std::invalid_argument for an empty prefix and
    // EndpointError(CapabilityUnsupported) when the backend cannot score.
    virtual std::vector<double> score_prefix(const PolicyContext& ctx, std::string_view prefix_text) = 0;

    virtual std::string id() const = 0;
};

// Deterministic rule-driven policy. Rules are tried in order; the first whose
// every present matcher succeeds supplies the output.
class ScriptedPolicy final : public Policy {
public:
    struct Rule {
        std::optional<std::string> tag;       // exact match on ctx.tag
        std::optional<std::string> contains;  // substring of the query
        std::optional<std::string> pattern;   // ECMAScript regex searched in the query
        std::string output;
        std::optional<std::vector<double>> prefix_logprobs;
    };

    ScriptedPolicy(std::vector<Rule> rules, std::string default_output = "no-rewrite",
                   std::map<PrefixCategory, std::vector<double>> category_logprobs = {});

    // {"default": "...", "rules": [{"tag"|"match"|"regex", "output",
    //  "prefix_logprobs"?}], "category_logprobs": {"memory": [...], ...}}
    static ScriptedPolicy from_json(const json& j);
    static ScriptedPolicy load(const std::filesystem::path& path);

    Completion complete(const PolicyContext& ctx) override;
    std::vector<double> score_prefix(const PolicyContext& ctx, std::string_view prefix_text) override;
    std::string id() const override { return "scripted"; }

    const std::vector<Rule>& rules() const { return rules_; }

private:
    const Rule* find(const PolicyContext& ctx) const;

    std::vector<Rule> rules_;
    std::vector<std::optional<std::regex>> compiled_;
    std::string default_output_;
    std::map<PrefixCategory, std::vector<double>> category_logprobs_;
};

// Chat-completions endpoint. Prefix scoring uses /completions with
// echo=true, logprobs=1, max_tokens=0, and is only attempted when the
// endpoint config declares supports_echo.
class RemotePolicy final : public Policy {
public:
    explicit RemotePolicy(EndpointConfig config);

    Completion complete(const PolicyContext& ctx) override;
    std::vector<double> score_prefix(const PolicyContext& ctx, std::string_view prefix_text) override;
    std::string id() const override { return client_.config().id(); }

    const HttpJsonClient& client() const { return client_; }

private:
    HttpJsonClient client_;
};

// Rejects any positive log-probability; throws EndpointError(Protocol).
void check_logprobs(const std::vector<double>& logprobs, std::string_view source);

}  // namespace homectl
