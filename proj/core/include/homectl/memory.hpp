#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "homectl/protocol.hpp"

namespace homectl {

struct MemoryEntry {
    std::string entry_id;
    std::string content;
    std::int64_t created_turn = 0;
    std::int64_t updated_turn = 0;
    std::string source_query;
    bool operator==(const MemoryEntry&) const = default;
};

struct MemoryConfig {
    double retrieval_threshold = 0.10;
    size_t retrieval_k = 5;
    double update_threshold = 0.60;
    double delete_threshold = 0.35;
    bool operator==(const MemoryConfig&) const = default;
};

enum class OperationKind { Added, Updated, Deleted, NoChange };

std::string_view to_string(OperationKind k);

struct OperationLog {
    OperationKind kind = OperationKind::NoChange;
    std::optional<std::string> affected_entry_id;
    std::optional<double> similarity;
    bool operator==(const OperationLog&) const = default;
};

struct ScoredEntry {
    MemoryEntry entry;
    double score = 0.0;
};

class MemoryError : public std::runtime_error {
public:
    enum class Kind { DeleteNoMatch, CorruptSnapshot };
    MemoryError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Dice coefficient over character-bigram multisets of the normalized texts
// (ASCII lower-cased; whitespace and punctuation dropped). Texts shorter than
// two characters fall back to unigrams. Result in [0, 1].
double bigram_dice(std::string_view a, std::string_view b);

// Strips a leading acknowledgement ("好的，已帮您记住") and one layer of
// surrounding quotes from a memory-write payload, leaving the rule itself.
std::string extract_memory_rule(std::string_view content);

class MemoryBank;

struct ApplyResult;

// Ordered entry store. Values are immutable in spirit: apply_action returns
// the successor bank and leaves *this untouched.
class MemoryBank {
public:
    MemoryBank() = default;
    explicit MemoryBank(MemoryConfig config) : config_(config) {}

    // Entry i gets id "m<i>" and created_turn = updated_turn = i; the turn
    // counter starts at contents.size().
    static MemoryBank from_contents(std::span<const std::string> contents, MemoryConfig config = {});

    const std::vector<MemoryEntry>& entries() const { return entries_; }
    std::int64_t turn_counter() const { return turn_counter_; }
    const MemoryConfig& config() const { return config_; }
    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    std::vector<std::string> contents() const;

    // Entries scoring at least the retrieval threshold, best first; ties
    // broken by higher updated_turn, then entry_id. Precondition: k >= 1.
    std::vector<ScoredEntry> retrieve(std::string_view query, size_t k) const;
    std::vector<ScoredEntry> retrieve(std::string_view query) const { return retrieve(query, config_.retrieval_k); }

    // Throws MemoryError(DeleteNoMatch) when a delete finds no entry at or
    // above the delete threshold.
    ApplyResult apply_action(const ActionOutput& action, std::string_view source_query = {}) const;
    ApplyResult apply_action(const ActionVariant& action, std::string_view source_query = {}) const;

    // Invariant check used by tests and restore().
    bool well_formed() const;

    bool operator==(const MemoryBank&) const = default;

private:
    friend MemoryBank restore(std::string_view);

    std::string next_id() const;
    // Index and similarity of the best-matching entry, recency breaking ties.
    std::optional<std::pair<size_t, double>> best_match(std::string_view content) const;

    MemoryConfig config_;
    std::vector<MemoryEntry> entries_;
    std::int64_t turn_counter_ = 0;
};

struct ApplyResult {
    MemoryBank bank;
    OperationLog log;
};

// JSONL: a header line {"format":"homectl-memory/1","turn_counter":..,
// "entries":n,"config":{..}} followed by one line per entry.
std::string snapshot(const MemoryBank& bank);
// Throws MemoryError(CorruptSnapshot).
MemoryBank restore(std::string_view record);

void save_snapshot(const MemoryBank& bank, const std::filesystem::path& path);
MemoryBank load_snapshot(const std::filesystem::path& path);

}  // namespace homectl
