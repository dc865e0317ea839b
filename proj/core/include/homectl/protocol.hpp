#pragma once

// Prefix-tagged output grammar. Every model output is routed by its prefix:
//
//   memory: <content>          write or update a memory entry
//   memory: delete <content>   delete a memory entry
//   rewrite: <command>         memory-informed command rewrite
//   no-rewrite                 pass the query through untouched
//
// The Chinese surface forms (记忆：/记忆：删除/改写：/不改写) are accepted as
// well, with either the ASCII or the full-width colon.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace homectl {

enum class PrefixCategory { Memory, Rewrite, NoRewrite };

enum class Lexicon { English, Chinese };

std::string_view to_string(PrefixCategory c);
std::optional<PrefixCategory> prefix_category_from_string(std::string_view s);

struct MemoryWrite {
    std::string content;
    bool operator==(const MemoryWrite&) const = default;
};
struct MemoryDelete {
    std::string content;
    bool operator==(const MemoryDelete&) const = default;
};
struct Rewrite {
    std::string command;
    bool operator==(const Rewrite&) const = default;
};
struct NoRewrite {
    bool operator==(const NoRewrite&) const = default;
};

using ActionVariant = std::variant<MemoryWrite, MemoryDelete, Rewrite, NoRewrite>;

struct ActionOutput {
    ActionVariant variant;
    std::string raw;  // model output exactly as received

    PrefixCategory category() const;
    // Content of MemoryWrite/MemoryDelete, command of Rewrite, empty for NoRewrite.
    std::string_view payload() const;
    bool operator==(const ActionOutput&) const = default;
};

PrefixCategory category_of(const ActionVariant& v);

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Surface forms recognized by the parser. Keys: memory, delete, rewrite,
// no_rewrite. Forms are matched ASCII-case-insensitively.
class PrefixLexicon {
public:
    static const PrefixLexicon& builtin();

    // UTF-8 file of `key = surface` lines; `#` starts a comment. Loaded forms
    // extend the built-in ones.
    static PrefixLexicon load(const std::filesystem::path& path);
    static PrefixLexicon parse(std::string_view text);

    void add(std::string_view key, std::string_view surface);

    const std::vector<std::string>& memory() const { return memory_; }
    const std::vector<std::string>& del() const { return delete_; }
    const std::vector<std::string>& rewrite() const { return rewrite_; }
    const std::vector<std::string>& no_rewrite() const { return no_rewrite_; }

private:
    std::vector<std::string> memory_;
    std::vector<std::string> delete_;
    std::vector<std::string> rewrite_;
    std::vector<std::string> no_rewrite_;
};

// Non-throwing parse; std::nullopt when no prefix is recognized or the
// payload is empty.
std::optional<ActionOutput> try_parse_action(std::string_view text,
                                             const PrefixLexicon& lex = PrefixLexicon::builtin());

// Throws ParseError on unparseable input.
ActionOutput parse_action(std::string_view text,
                          const PrefixLexicon& lex = PrefixLexicon::builtin());

// Canonical surface form. Precondition: is_valid(a).
std::string render_action(const ActionOutput& a, Lexicon lexicon);
std::string render_action(const ActionVariant& v, Lexicon lexicon);

// Trimmed payload non-empty, and a MemoryWrite payload does not itself begin
// with a delete keyword (that text would render as a deletion).
bool is_valid(const ActionVariant& v, const PrefixLexicon& lex = PrefixLexicon::builtin());

// Canonical prefix string for a category, e.g. "改写：" or "no-rewrite".
std::string canonical_prefix(PrefixCategory c, Lexicon lexicon);

// The exact prefix substring at the start of `text` (after leading
// whitespace), including the colon; e.g. "记忆：" for "记忆：删除X".
std::optional<std::string> prefix_surface(std::string_view text,
                                          const PrefixLexicon& lex = PrefixLexicon::builtin());

// Category of a bare prefix such as "记忆：" or "rewrite:"; no payload needed.
std::optional<PrefixCategory> detect_prefix_category(
    std::string_view text, const PrefixLexicon& lex = PrefixLexicon::builtin());

// Unparseable output never matches.
bool prefix_match(std::string_view predicted, PrefixCategory gt,
                  const PrefixLexicon& lex = PrefixLexicon::builtin());

}  // namespace homectl
