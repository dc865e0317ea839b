#include "homectl/protocol.hpp"

#include <fstream>
#include <sstream>

#include "homectl/text.hpp"

namespace homectl {

namespace {

constexpr std::string_view kFullWidthColon = "\xEF\xBC\x9A";  // U+FF1A

bool ascii_word_char(char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool starts_with_ci(std::string_view s, std::string_view form) {
    if (s.size() < form.size()) return false;
    for (size_t i = 0; i < form.size(); ++i) {
        char a = s[i];
        char b = form[i];
        if (a >= 'A' && a <= 'Z') a = static_cast<char>(a - 'A' + 'a');
        if (b >= 'A' && b <= 'Z') b = static_cast<char>(b - 'A' + 'a');
        if (a != b) return false;
    }
    return true;
}

// Number of leading whitespace bytes (spaces/tabs only, no newlines).
size_t skip_inline_space(std::string_view s, size_t pos) {
    while (pos < s.size()) {
        if (s[pos] == ' ' || s[pos] == '\t') {
            ++pos;
        } else if (s.substr(pos).starts_with("\xE3\x80\x80")) {
            pos += 3;
        } else {
            break;
        }
    }
    return pos;
}

// Returns position after the colon, or npos.
size_t match_colon(std::string_view s, size_t pos) {
    pos = skip_inline_space(s, pos);
    if (pos < s.size() && s[pos] == ':') return pos + 1;
    if (s.substr(pos).starts_with(kFullWidthColon)) return pos + kFullWidthColon.size();
    return std::string_view::npos;
}

// A form ending in an ASCII word character needs a boundary after it so that
// "deleted" is not read as "delete".
bool boundary_ok(std::string_view s, size_t end, std::string_view form) {
    if (form.empty() || !ascii_word_char(form.back())) return true;
    return end >= s.size() || !ascii_word_char(s[end]);
}

// Length of the delete keyword match at s[pos], or npos.
size_t match_delete(std::string_view s, size_t pos, const PrefixLexicon& lex) {
    size_t best = std::string_view::npos;
    for (const auto& form : lex.del()) {
        if (!starts_with_ci(s.substr(pos), form)) continue;
        size_t end = pos + form.size();
        if (!boundary_ok(s, end, form)) continue;
        if (ascii_word_char(form.back()) && end < s.size() && s[end] != ' ' && s[end] != '\t' &&
            s[end] != '\n' && !s.substr(end).starts_with("\xE3\x80\x80")) {
            continue;
        }
        if (best == std::string_view::npos || form.size() > best) best = form.size();
    }
    return best;
}

struct PrefixHit {
    PrefixCategory category;
    bool is_delete = false;
    size_t prefix_end = 0;   // end of the memory/rewrite colon, or of the no-rewrite form
    size_t payload_begin = 0;
};

std::optional<PrefixHit> match_prefix(std::string_view t, const PrefixLexicon& lex) {
    std::optional<PrefixHit> best;
    auto consider = [&](PrefixHit hit) {
        if (!best || hit.payload_begin > best->payload_begin) best = hit;
    };

    for (const auto& form : lex.memory()) {
        if (!starts_with_ci(t, form)) continue;
        size_t after = match_colon(t, form.size());
        if (after == std::string_view::npos) continue;
        size_t body = skip_inline_space(t, after);
        size_t del = match_delete(t, body, lex);
        if (del != std::string_view::npos) {
            consider({PrefixCategory::Memory, true, after, body + del});
        } else {
            consider({PrefixCategory::Memory, false, after, after});
        }
    }
    for (const auto& form : lex.rewrite()) {
        if (!starts_with_ci(t, form)) continue;
        size_t after = match_colon(t, form.size());
        if (after == std::string_view::npos) continue;
        consider({PrefixCategory::Rewrite, false, after, after});
    }
    for (const auto& form : lex.no_rewrite()) {
        if (!starts_with_ci(t, form)) continue;
        if (!boundary_ok(t, form.size(), form)) continue;
        consider({PrefixCategory::NoRewrite, false, form.size(), form.size()});
    }
    return best;
}

}  // namespace

std::string_view to_string(PrefixCategory c) {
    switch (c) {
        case PrefixCategory::Memory: return "memory";
        case PrefixCategory::Rewrite: return "rewrite";
        case PrefixCategory::NoRewrite: return "no_rewrite";
    }
    return "unknown";
}

std::optional<PrefixCategory> prefix_category_from_string(std::string_view s) {
    auto l = text::ascii_lower(text::trim(s));
    if (l == "memory") return PrefixCategory::Memory;
    if (l == "rewrite") return PrefixCategory::Rewrite;
    if (l == "no_rewrite" || l == "no-rewrite" || l == "norewrite") return PrefixCategory::NoRewrite;
    return std::nullopt;
}

PrefixCategory category_of(const ActionVariant& v) {
    if (std::holds_alternative<Rewrite>(v)) return PrefixCategory::Rewrite;
    if (std::holds_alternative<NoRewrite>(v)) return PrefixCategory::NoRewrite;
    return PrefixCategory::Memory;
}

PrefixCategory ActionOutput::category() const { return category_of(variant); }

std::string_view ActionOutput::payload() const {
    if (auto* w = std::get_if<MemoryWrite>(&variant)) return w->content;
    if (auto* d = std::get_if<MemoryDelete>(&variant)) return d->content;
    if (auto* r = std::get_if<Rewrite>(&variant)) return r->command;
    return {};
}

const PrefixLexicon& PrefixLexicon::builtin() {
    static const PrefixLexicon lex = [] {
        PrefixLexicon l;
        l.add("memory", "memory");
        l.add("memory", "记忆");
        l.add("delete", "delete");
        l.add("delete", "删除");
        l.add("rewrite", "rewrite");
        l.add("rewrite", "改写");
        l.add("no_rewrite", "no-rewrite");
        l.add("no_rewrite", "不改写");
        return l;
    }();
    return lex;
}

void PrefixLexicon::add(std::string_view key, std::string_view surface) {
    auto form = std::string(text::trim(surface));
    if (form.empty()) throw std::invalid_argument("empty surface form for key '" + std::string(key) + "'");
    std::vector<std::string>* target = nullptr;
    if (key == "memory") target = &memory_;
    else if (key == "delete") target = &delete_;
    else if (key == "rewrite") target = &rewrite_;
    else if (key == "no_rewrite") target = &no_rewrite_;
    else throw std::invalid_argument("unknown lexicon key '" + std::string(key) + "'");
    for (const auto& f : *target) {
        if (text::ascii_lower(f) == text::ascii_lower(form)) return;
    }
    target->push_back(std::move(form));
}

PrefixLexicon PrefixLexicon::parse(std::string_view content) {
    PrefixLexicon lex = builtin();
    std::istringstream in{std::string(content)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        std::string_view l = text::trim(std::string_view(line).substr(0, hash));
        if (l.empty()) continue;
        auto eq = l.find('=');
        if (eq == std::string_view::npos) {
            throw std::invalid_argument("lexicon line " + std::to_string(lineno) + ": expected key = surface");
        }
        lex.add(text::trim(l.substr(0, eq)), l.substr(eq + 1));
    }
    return lex;
}

PrefixLexicon PrefixLexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open lexicon file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::optional<ActionOutput> try_parse_action(std::string_view input, const PrefixLexicon& lex) {
    std::string_view t = text::trim(input);
    auto hit = match_prefix(t, lex);
    if (!hit) return std::nullopt;

    ActionOutput out;
    out.raw = std::string(input);
    std::string payload(text::trim(t.substr(hit->payload_begin)));
    switch (hit->category) {
        case PrefixCategory::NoRewrite:
            out.variant = NoRewrite{};
            return out;
        case PrefixCategory::Rewrite:
            if (payload.empty()) return std::nullopt;
            out.variant = Rewrite{std::move(payload)};
            return out;
        case PrefixCategory::Memory:
            if (payload.empty()) return std::nullopt;
            if (hit->is_delete) {
                out.variant = MemoryDelete{std::move(payload)};
            } else {
                out.variant = MemoryWrite{std::move(payload)};
            }
            return out;
    }
    return std::nullopt;
}

ActionOutput parse_action(std::string_view text, const PrefixLexicon& lex) {
    auto a = try_parse_action(text, lex);
    if (!a) {
        auto shown = std::string(text.substr(0, 80));
        throw ParseError("unparseable model output: no recognized prefix in \"" + shown + "\"");
    }
    return *std::move(a);
}

std::string canonical_prefix(PrefixCategory c, Lexicon lexicon) {
    const bool en = lexicon == Lexicon::English;
    switch (c) {
        case PrefixCategory::Memory: return en ? "memory:" : "记忆：";
        case PrefixCategory::Rewrite: return en ? "rewrite:" : "改写：";
        case PrefixCategory::NoRewrite: return en ? "no-rewrite" : "不改写";
    }
    return {};
}

std::string render_action(const ActionVariant& v, Lexicon lexicon) {
    const bool en = lexicon == Lexicon::English;
    if (auto* w = std::get_if<MemoryWrite>(&v)) {
        return (en ? "memory: " : "记忆：") + std::string(text::trim(w->content));
    }
    if (auto* d = std::get_if<MemoryDelete>(&v)) {
        return (en ? "memory: delete " : "记忆：删除") + std::string(text::trim(d->content));
    }
    if (auto* r = std::get_if<Rewrite>(&v)) {
        return (en ? "rewrite: " : "改写：") + std::string(text::trim(r->command));
    }
    return en ? "no-rewrite" : "不改写";
}

std::string render_action(const ActionOutput& a, Lexicon lexicon) {
    return render_action(a.variant, lexicon);
}

bool is_valid(const ActionVariant& v, const PrefixLexicon& lex) {
    if (std::holds_alternative<NoRewrite>(v)) return true;
    std::string_view payload;
    if (auto* w = std::get_if<MemoryWrite>(&v)) payload = w->content;
    if (auto* d = std::get_if<MemoryDelete>(&v)) payload = d->content;
    if (auto* r = std::get_if<Rewrite>(&v)) payload = r->command;
    payload = text::trim(payload);
    if (payload.empty()) return false;
    if (std::holds_alternative<MemoryWrite>(v)) {
        if (match_delete(payload, 0, lex) != std::string_view::npos) return false;
        // Chinese delete forms carry no boundary, so a payload that merely
        // starts with one is already ambiguous.
        for (const auto& form : lex.del()) {
            if (!ascii_word_char(form.back()) && starts_with_ci(payload, form)) return false;
        }
    }
    return true;
}

std::optional<std::string> prefix_surface(std::string_view input, const PrefixLexicon& lex) {
    std::string_view t = text::trim(input);
    auto hit = match_prefix(t, lex);
    if (!hit) return std::nullopt;
    return std::string(t.substr(0, hit->prefix_end));
}

std::optional<PrefixCategory> detect_prefix_category(std::string_view input,
                                                     const PrefixLexicon& lex) {
    auto hit = match_prefix(text::trim(input), lex);
    if (!hit) return std::nullopt;
    return hit->category;
}

bool prefix_match(std::string_view predicted, PrefixCategory gt, const PrefixLexicon& lex) {
    auto a = try_parse_action(predicted, lex);
    return a && a->category() == gt;
}

}  // namespace homectl
