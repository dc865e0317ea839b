#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "homectl/protocol.hpp"

namespace homectl {

using json = nlohmann::json;

enum class MajorCategory { NoMemory, MemoryUse, MemoryStateChange };
enum class MinorCategory { DoNotMemorize, MemoryAdd, MemoryDelete };

inline constexpr MajorCategory kAllMajorCategories[] = {
    MajorCategory::NoMemory, MajorCategory::MemoryUse, MajorCategory::MemoryStateChange};

std::string_view to_string(MajorCategory c);
std::string_view to_string(MinorCategory c);
std::optional<MajorCategory> major_from_string(std::string_view s);
std::optional<MinorCategory> minor_from_string(std::string_view s);

// The prefix category a sample of this major category must be answered with.
PrefixCategory expected_prefix(MajorCategory c);
MajorCategory major_for_prefix(PrefixCategory c);

struct CategoryLabel {
    MajorCategory major = MajorCategory::NoMemory;
    std::optional<MinorCategory> minor;
    bool operator==(const CategoryLabel&) const = default;
};

struct Device {
    std::string room;
    std::string type;
    std::string name;
    bool operator==(const Device&) const = default;
};

struct HomeEnvironment {
    std::vector<std::string> rooms;
    std::vector<Device> devices;
    std::string enter_room;
    bool operator==(const HomeEnvironment&) const = default;
};

enum class Role { User, Assistant };

struct DialogueTurn {
    Role role = Role::User;
    std::string text;
    bool operator==(const DialogueTurn&) const = default;
};

struct Sample {
    std::string id;
    CategoryLabel category;
    HomeEnvironment environment;
    std::vector<DialogueTurn> history;
    std::vector<std::string> candidate_memories;
    std::string query;
    std::string ground_truth;
    PrefixCategory gt_category = PrefixCategory::NoRewrite;
    bool operator==(const Sample&) const = default;
};

struct LifeTurn {
    std::string query;
    std::optional<ActionOutput> expected_action;
    int session_index = 0;
    int day_index = 0;
    bool operator==(const LifeTurn&) const = default;
};

struct LifeDialogue {
    std::string id;
    HomeEnvironment environment;
    std::vector<LifeTurn> turns;
    std::string final_ground_truth;
    PrefixCategory final_gt_category = PrefixCategory::NoRewrite;
    bool operator==(const LifeDialogue&) const = default;
};

struct Violation {
    std::string field;
    std::string rule;
    bool operator==(const Violation&) const = default;
};

std::vector<Violation> validate_environment(const HomeEnvironment& env);
std::vector<Violation> validate_sample(const Sample& s);
std::vector<Violation> validate_dialogue(const LifeDialogue& d);

class DataError : public std::runtime_error {
public:
    enum class Kind { MalformedRecord, SchemaViolation, EmptyDataset, Io };

    DataError(Kind kind, size_t line, std::string field, const std::string& message);

    Kind kind() const { return kind_; }
    size_t line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    Kind kind_;
    size_t line_;
    std::string field_;
};

// JSON mapping for the record schema. Decoding throws std::invalid_argument
// naming the offending field.
json to_json(const HomeEnvironment& env);
json to_json(const Sample& s);
json to_json(const LifeDialogue& d);
HomeEnvironment environment_from_json(const json& j);
Sample sample_from_json(const json& j);
LifeDialogue dialogue_from_json(const json& j);

std::vector<Sample> load_samples(const std::filesystem::path& path);
std::vector<LifeDialogue> load_dialogues(const std::filesystem::path& path);
std::vector<Sample> parse_samples(std::string_view jsonl);
std::vector<LifeDialogue> parse_dialogues(std::string_view jsonl);

std::string to_jsonl(std::span<const Sample> samples);
std::string to_jsonl(std::span<const LifeDialogue> dialogues);
void write_text_file(const std::filesystem::path& path, std::string_view content);

// Number of user utterances in the history.
size_t history_turns(const Sample& s);

// "用户：<text>" / "助手：<text>", the form prompts show history in.
std::vector<std::string> history_lines(const std::vector<DialogueTurn>& history);

struct FieldStat {
    double avg = 0.0;
    size_t max = 0;
};

struct CategoryStats {
    size_t count = 0;
    FieldStat rooms;
    FieldStat devices;
    FieldStat history_turns;
    FieldStat memories;
};

struct StatsReport {
    std::map<MajorCategory, CategoryStats> per_category;
    CategoryStats overall;

    json to_json() const;
    std::string to_table() const;
};

// Throws DataError(EmptyDataset) on empty input.
StatsReport compute_stats(std::span<const Sample> samples);

struct CategoryCounts {
    size_t no_memory = 0;
    size_t memory_use = 0;
    size_t state_change = 0;

    size_t total() const { return no_memory + memory_use + state_change; }
};

// Per-category sample counts of the reference evaluation set.
inline constexpr CategoryCounts kReferenceEvalCounts{53, 220, 116};

// Deterministic schema-valid fixtures; ids are unique within one call.
std::vector<Sample> generate_fixtures(std::uint64_t seed, CategoryCounts counts);

std::vector<LifeDialogue> generate_dialogues(std::uint64_t seed, size_t count);

// Stratified deterministic split. Throws DataError(EmptyDataset) on empty
// input and std::invalid_argument unless 0 < train_fraction < 1.
std::pair<std::vector<Sample>, std::vector<Sample>> split(std::span<const Sample> samples,
                                                          double train_fraction,
                                                          std::uint64_t seed);

}  // namespace homectl
