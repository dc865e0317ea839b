#include "homectl/model_client.hpp"

#include <fstream>
#include <sstream>

#include "homectl/text.hpp"
#include "prompt_data.hpp"

namespace homectl {

std::string_view device_control_template() { return prompt_data::device_control; }

std::string render_memory_list(const std::vector<std::string>& memories) {
    return json(memories).dump();
}

std::string render_history(const std::vector<DialogueTurn>& history) {
    return json(history_lines(history)).dump();
}

std::string render_policy_prompt(const PolicyContext& ctx) {
    std::string_view tmpl = ctx.system_prompt.empty() ? device_control_template() : ctx.system_prompt;
    return text::render_template(tmpl, {{"MEMORY", render_memory_list(ctx.retrieved_memories)},
                                        {"HISTORY", render_history(ctx.history)},
                                        {"QUERY", ctx.query},
                                        {"ENTER_ROOM", ctx.environment.enter_room}});
}

void check_logprobs(const std::vector<double>& logprobs, std::string_view source) {
    for (double lp : logprobs) {
        if (!(lp <= 0.0)) {
            throw EndpointError(EndpointError::Kind::Protocol,
                                std::string(source) + " returned a log-probability > 0 (" + std::to_string(lp) + ")");
        }
    }
}

// ---------------------------------------------------------------------------
// scripted

ScriptedPolicy::ScriptedPolicy(std::vector<Rule> rules, std::string default_output,
                               std::map<PrefixCategory, std::vector<double>> category_logprobs)
    : rules_(std::move(rules)),
      default_output_(std::move(default_output)),
      category_logprobs_(std::move(category_logprobs)) {
    for (const auto& r : rules_) {
        compiled_.push_back(r.pattern ? std::optional<std::regex>(std::regex(*r.pattern, std::regex::ECMAScript))
                                      : std::nullopt);
        if (r.prefix_logprobs) check_logprobs(*r.prefix_logprobs, "scripted rule");
    }
    for (const auto& [_, v] : category_logprobs_) check_logprobs(v, "scripted category_logprobs");
}

ScriptedPolicy ScriptedPolicy::from_json(const json& j) {
    std::vector<Rule> rules;
    if (auto it = j.find("rules"); it != j.end()) {
        for (const auto& r : *it) {
            Rule rule;
            if (r.contains("tag")) rule.tag = r.at("tag").get<std::string>();
            if (r.contains("match")) rule.contains = r.at("match").get<std::string>();
            if (r.contains("regex")) rule.pattern = r.at("regex").get<std::string>();
            rule.output = r.at("output").get<std::string>();
            if (r.contains("prefix_logprobs")) rule.prefix_logprobs = r.at("prefix_logprobs").get<std::vector<double>>();
            rules.push_back(std::move(rule));
        }
    }
    std::map<PrefixCategory, std::vector<double>> cat;
    if (auto it = j.find("category_logprobs"); it != j.end()) {
        for (const auto& [k, v] : it->items()) {
            auto c = prefix_category_from_string(k);
            if (!c) throw std::invalid_argument("unknown prefix category '" + k + "' in category_logprobs");
            cat[*c] = v.get<std::vector<double>>();
        }
    }
    return ScriptedPolicy(std::move(rules), j.value("default", std::string("no-rewrite")), std::move(cat));
}

ScriptedPolicy ScriptedPolicy::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open policy rules " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

const ScriptedPolicy::Rule* ScriptedPolicy::find(const PolicyContext& ctx) const {
    for (size_t i = 0; i < rules_.size(); ++i) {
        const auto& r = rules_[i];
        if (r.tag && *r.tag != ctx.tag) continue;
        if (r.contains && ctx.query.find(*r.contains) == std::string::npos) continue;
        if (compiled_[i] && !std::regex_search(ctx.query, *compiled_[i])) continue;
        return &r;
    }
    return nullptr;
}

Completion ScriptedPolicy::complete(const PolicyContext& ctx) {
    if (const Rule* r = find(ctx)) return {r->output, r->prefix_logprobs};
    return {default_output_, std::nullopt};
}

std::vector<double> ScriptedPolicy::score_prefix(const PolicyContext& ctx, std::string_view prefix_text) {
    if (text::trim(prefix_text).empty()) throw std::invalid_argument("score_prefix: prefix must be non-empty");
    auto cat = detect_prefix_category(prefix_text);
    if (!cat) throw std::invalid_argument("score_prefix: '" + std::string(prefix_text) + "' is not a known prefix");
    if (auto it = category_logprobs_.find(*cat); it != category_logprobs_.end()) return it->second;
    if (const Rule* r = find(ctx); r && r->prefix_logprobs) return *r->prefix_logprobs;
    throw EndpointError(EndpointError::Kind::CapabilityUnsupported,
                        "scripted policy has no log-probabilities for prefix category " + std::string(to_string(*cat)));
}

// ---------------------------------------------------------------------------
// remote

RemotePolicy::RemotePolicy(EndpointConfig config) : client_(std::move(config)) {}

Completion RemotePolicy::complete(const PolicyContext& ctx) {
    return {chat_complete(client_, render_policy_prompt(ctx)), std::nullopt};
}

std::vector<double> RemotePolicy::score_prefix(const PolicyContext& ctx, std::string_view prefix_text) {
    if (text::trim(prefix_text).empty()) throw std::invalid_argument("score_prefix: prefix must be non-empty");
    const auto& cfg = client_.config();
    if (!cfg.supports_echo) {
        throw EndpointError(EndpointError::Kind::CapabilityUnsupported,
                            cfg.id() + " does not support echo scoring of forced tokens");
    }
    const std::string prompt = render_policy_prompt(ctx);
    json body = {{"model", cfg.model},
                 {"prompt", prompt + std::string(prefix_text)},
                 {"max_tokens", 0},
                 {"echo", true},
                 {"logprobs", 1},
                 {"temperature", cfg.temperature}};
    auto reply = client_.post("/completions", body);
    std::vector<double> out;
    try {
        const auto& lp = reply.at("choices").at(0).at("logprobs");
        if (lp.is_null()) {
            throw EndpointError(EndpointError::Kind::CapabilityUnsupported, cfg.id() + " returned no logprobs");
        }
        const auto& tokens = lp.at("token_logprobs");
        const auto& offsets = lp.at("text_offset");
        // Tokens starting at or after the end of the prompt belong to the prefix.
        for (size_t i = 0; i < tokens.size(); ++i) {
            if (offsets.at(i).get<size_t>() >= prompt.size() && !tokens[i].is_null()) {
                out.push_back(tokens[i].get<double>());
            }
        }
    } catch (const json::exception& e) {
        throw EndpointError(EndpointError::Kind::CapabilityUnsupported,
                            cfg.id() + " response lacks echo logprobs: " + e.what());
    }
    if (out.empty()) {
        throw EndpointError(EndpointError::Kind::CapabilityUnsupported, cfg.id() + " attributed no tokens to the prefix");
    }
    check_logprobs(out, cfg.id());
    return out;
}

}  // namespace homectl
