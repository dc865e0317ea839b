#include "homectl/memory.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "homectl/text.hpp"

namespace homectl {

using json = nlohmann::json;

namespace {

constexpr std::string_view kSnapshotFormat = "homectl-memory/1";

std::vector<char32_t> normalize(std::string_view s) {
    std::vector<char32_t> out;
    for (char32_t cp : text::decode_utf8(s)) {
        if (cp >= 'A' && cp <= 'Z') cp = cp - 'A' + 'a';
        if (text::is_ascii_alnum(cp) || text::is_cjk(cp)) out.push_back(cp);
    }
    return out;
}

std::map<std::u32string, int> grams(const std::vector<char32_t>& cps, size_t n) {
    std::map<std::u32string, int> out;
    for (size_t i = 0; i + n <= cps.size(); ++i) ++out[std::u32string(cps.begin() + i, cps.begin() + i + n)];
    return out;
}

}  // namespace

std::string_view to_string(OperationKind k) {
    switch (k) {
        case OperationKind::Added: return "added";
        case OperationKind::Updated: return "updated";
        case OperationKind::Deleted: return "deleted";
        case OperationKind::NoChange: return "no_change";
    }
    return "unknown";
}

double bigram_dice(std::string_view a, std::string_view b) {
    auto na = normalize(a);
    auto nb = normalize(b);
    if (na.empty() || nb.empty()) return 0.0;
    // A single-character side has no bigrams; compare on unigrams instead.
    const size_t n = (na.size() < 2 || nb.size() < 2) ? 1 : 2;
    auto ga = grams(na, n);
    auto gb = grams(nb, n);
    size_t total_a = 0, total_b = 0, common = 0;
    for (const auto& [g, c] : ga) {
        total_a += static_cast<size_t>(c);
        if (auto it = gb.find(g); it != gb.end()) common += static_cast<size_t>(std::min(c, it->second));
    }
    for (const auto& [g, c] : gb) total_b += static_cast<size_t>(c);
    return 2.0 * static_cast<double>(common) / static_cast<double>(total_a + total_b);
}

std::string extract_memory_rule(std::string_view content) {
    static const std::vector<std::string_view> leads = {
        "好的，已帮您记住", "好的，已帮你记住", "好的,已帮您记住", "好的,已帮你记住", "已帮您记住", "已帮你记住",
        "好的，我记住了", "OK, I'll remember", "ok, i'll remember", "Got it, I'll remember"};
    std::string_view s = text::trim(content);
    for (auto lead : leads) {
        if (s.starts_with(lead)) {
            s = text::trim(s.substr(lead.size()));
            if (s.starts_with(":") || s.starts_with(",")) s = text::trim(s.substr(1));
            if (s.starts_with("：") || s.starts_with("，")) s = text::trim(s.substr(3));
            break;
        }
    }
    static const std::vector<std::pair<std::string_view, std::string_view>> quotes = {
        {"\"", "\""}, {"“", "”"}, {"「", "」"}, {"'", "'"}};
    for (const auto& [open, close] : quotes) {
        if (s.size() > open.size() + close.size() && s.starts_with(open)) {
            auto rest = s.substr(open.size());
            // Allow trailing sentence punctuation after the closing quote.
            std::string_view tail = rest;
            for (std::string_view p : {"。", "."}) {
                if (tail.ends_with(p)) tail.remove_suffix(p.size());
            }
            if (tail.ends_with(close) && tail.find(close) == tail.size() - close.size()) {
                s = text::trim(tail.substr(0, tail.size() - close.size()));
            }
            break;
        }
    }
    if (s.empty()) return std::string(text::trim(content));
    return std::string(s);
}

MemoryBank MemoryBank::from_contents(std::span<const std::string> contents, MemoryConfig config) {
    MemoryBank bank(config);
    for (size_t i = 0; i < contents.size(); ++i) {
        auto turn = static_cast<std::int64_t>(i);
        bank.entries_.push_back({"m" + std::to_string(i), contents[i], turn, turn, ""});
    }
    bank.turn_counter_ = static_cast<std::int64_t>(contents.size());
    return bank;
}

std::vector<std::string> MemoryBank::contents() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.content);
    return out;
}

std::vector<ScoredEntry> MemoryBank::retrieve(std::string_view query, size_t k) const {
    if (k == 0) throw std::invalid_argument("retrieve: k must be >= 1");
    std::vector<ScoredEntry> scored;
    for (const auto& e : entries_) {
        double s = bigram_dice(query, e.content);
        if (s >= config_.retrieval_threshold && s > 0.0) scored.push_back({e, s});
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredEntry& a, const ScoredEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.entry.updated_turn != b.entry.updated_turn) return a.entry.updated_turn > b.entry.updated_turn;
        return a.entry.entry_id < b.entry.entry_id;
    });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

std::string MemoryBank::next_id() const {
    std::set<std::string> used;
    for (const auto& e : entries_) used.insert(e.entry_id);
    std::string id = "m" + std::to_string(turn_counter_);
    for (int suffix = 1; used.contains(id); ++suffix) {
        id = "m" + std::to_string(turn_counter_) + "-" + std::to_string(suffix);
    }
    return id;
}

std::optional<std::pair<size_t, double>> MemoryBank::best_match(std::string_view content) const {
    std::optional<std::pair<size_t, double>> best;
    for (size_t i = 0; i < entries_.size(); ++i) {
        double s = bigram_dice(content, entries_[i].content);
        if (!best || s > best->second ||
            (s == best->second && entries_[i].updated_turn > entries_[best->first].updated_turn)) {
            best = {i, s};
        }
    }
    return best;
}

ApplyResult MemoryBank::apply_action(const ActionOutput& action, std::string_view source_query) const {
    return apply_action(action.variant, source_query);
}

ApplyResult MemoryBank::apply_action(const ActionVariant& action, std::string_view source_query) const {
    ApplyResult r{*this, {}};
    const std::int64_t turn = turn_counter_;

    if (auto* w = std::get_if<MemoryWrite>(&action)) {
        auto rule = extract_memory_rule(w->content);
        auto best = best_match(rule);
        if (best && best->second >= config_.update_threshold) {
            auto& e = r.bank.entries_[best->first];
            e.content = rule;
            e.updated_turn = turn;
            e.source_query = std::string(source_query);
            r.log = {OperationKind::Updated, e.entry_id, best->second};
        } else {
            MemoryEntry e{next_id(), rule, turn, turn, std::string(source_query)};
            r.log = {OperationKind::Added, e.entry_id, best ? std::optional<double>(best->second) : std::nullopt};
            r.bank.entries_.push_back(std::move(e));
        }
    } else if (auto* d = std::get_if<MemoryDelete>(&action)) {
        auto target = extract_memory_rule(d->content);
        auto best = best_match(target);
        if (!best || best->second < config_.delete_threshold) {
            throw MemoryError(MemoryError::Kind::DeleteNoMatch,
                              "no memory entry matches deletion request \"" + target + "\"");
        }
        r.log = {OperationKind::Deleted, entries_[best->first].entry_id, best->second};
        r.bank.entries_.erase(r.bank.entries_.begin() + static_cast<std::ptrdiff_t>(best->first));
    } else {
        r.log = {OperationKind::NoChange, std::nullopt, std::nullopt};
    }
    r.bank.turn_counter_ = turn + 1;
    return r;
}

bool MemoryBank::well_formed() const {
    std::set<std::string> ids;
    if (turn_counter_ < 0) return false;
    for (const auto& e : entries_) {
        if (!ids.insert(e.entry_id).second) return false;
        if (text::trim(e.content).empty()) return false;
        if (e.updated_turn < e.created_turn) return false;
        if (e.updated_turn > turn_counter_) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// snapshots

std::string snapshot(const MemoryBank& bank) {
    const auto& c = bank.config();
    json header = {{"format", kSnapshotFormat},
                   {"turn_counter", bank.turn_counter()},
                   {"entries", bank.size()},
                   {"config",
                    {{"retrieval_threshold", c.retrieval_threshold},
                     {"retrieval_k", c.retrieval_k},
                     {"update_threshold", c.update_threshold},
                     {"delete_threshold", c.delete_threshold}}}};
    std::string out = header.dump() + "\n";
    for (const auto& e : bank.entries()) {
        json j = {{"entry_id", e.entry_id},
                  {"content", e.content},
                  {"created_turn", e.created_turn},
                  {"updated_turn", e.updated_turn},
                  {"source_query", e.source_query}};
        out += j.dump() + "\n";
    }
    return out;
}

MemoryBank restore(std::string_view record) {
    auto corrupt = [](const std::string& why) {
        return MemoryError(MemoryError::Kind::CorruptSnapshot, "corrupt memory snapshot: " + why);
    };
    std::vector<std::string_view> lines;
    size_t pos = 0;
    while (pos < record.size()) {
        auto nl = record.find('\n', pos);
        auto line = record.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (!text::trim(line).empty()) lines.push_back(line);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    if (lines.empty()) throw corrupt("missing header");

    MemoryBank bank;
    size_t expected = 0;
    try {
        auto h = json::parse(lines.front());
        if (h.at("format").get<std::string>() != kSnapshotFormat) throw corrupt("unknown format tag");
        bank.turn_counter_ = h.at("turn_counter").get<std::int64_t>();
        expected = h.at("entries").get<size_t>();
        const auto& c = h.at("config");
        bank.config_.retrieval_threshold = c.at("retrieval_threshold").get<double>();
        bank.config_.retrieval_k = c.at("retrieval_k").get<size_t>();
        bank.config_.update_threshold = c.at("update_threshold").get<double>();
        bank.config_.delete_threshold = c.at("delete_threshold").get<double>();
        for (size_t i = 1; i < lines.size(); ++i) {
            auto j = json::parse(lines[i]);
            bank.entries_.push_back({j.at("entry_id").get<std::string>(), j.at("content").get<std::string>(),
                                     j.at("created_turn").get<std::int64_t>(),
                                     j.at("updated_turn").get<std::int64_t>(),
                                     j.at("source_query").get<std::string>()});
        }
    } catch (const MemoryError&) {
        throw;
    } catch (const std::exception& e) {
        throw corrupt(e.what());
    }
    if (bank.entries_.size() != expected) {
        throw corrupt("expected " + std::to_string(expected) + " entries, found " +
                      std::to_string(bank.entries_.size()));
    }
    if (!bank.well_formed()) throw corrupt("entry invariants violated");
    return bank;
}

void save_snapshot(const MemoryBank& bank, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write snapshot " + path.string());
    out << snapshot(bank);
}

MemoryBank load_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MemoryError(MemoryError::Kind::CorruptSnapshot, "cannot open snapshot " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return restore(ss.str());
}

}  // namespace homectl
