#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace homectl::text {

// Decodes UTF-8 into code points. Invalid bytes decode as U+FFFD, one per byte.
std::vector<char32_t> decode_utf8(std::string_view s);
void append_utf8(std::string& out, char32_t cp);
std::string encode_utf8(const std::vector<char32_t>& cps);

bool is_space(char32_t cp);
bool is_ascii_alnum(char32_t cp);
// CJK ideographs, kana and hangul syllables.
bool is_cjk(char32_t cp);

// Trims ASCII whitespace plus the ideographic space (U+3000).
std::string_view trim(std::string_view s);

std::string ascii_lower(std::string_view s);

// Single pass over `tmpl`: every `{NAME}` whose NAME is a key of `slots` is
// replaced by its value. Unknown braces are copied verbatim and inserted
// values are never rescanned.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& slots);

// 64-bit FNV-1a; stable across platforms and runs.
std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace homectl::text
