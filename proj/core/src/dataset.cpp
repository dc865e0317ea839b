#include "homectl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "homectl/rng.hpp"
#include "homectl/text.hpp"

namespace homectl {

std::string_view to_string(MajorCategory c) {
    switch (c) {
        case MajorCategory::NoMemory: return "no_memory";
        case MajorCategory::MemoryUse: return "memory_use";
        case MajorCategory::MemoryStateChange: return "memory_state_change";
    }
    return "unknown";
}

std::string_view to_string(MinorCategory c) {
    switch (c) {
        case MinorCategory::DoNotMemorize: return "do_not_memorize";
        case MinorCategory::MemoryAdd: return "memory_add";
        case MinorCategory::MemoryDelete: return "memory_delete";
    }
    return "unknown";
}

std::optional<MajorCategory> major_from_string(std::string_view s) {
    for (auto c : kAllMajorCategories) {
        if (to_string(c) == s) return c;
    }
    return std::nullopt;
}

std::optional<MinorCategory> minor_from_string(std::string_view s) {
    for (auto c : {MinorCategory::DoNotMemorize, MinorCategory::MemoryAdd, MinorCategory::MemoryDelete}) {
        if (to_string(c) == s) return c;
    }
    return std::nullopt;
}

PrefixCategory expected_prefix(MajorCategory c) {
    switch (c) {
        case MajorCategory::NoMemory: return PrefixCategory::NoRewrite;
        case MajorCategory::MemoryUse: return PrefixCategory::Rewrite;
        case MajorCategory::MemoryStateChange: return PrefixCategory::Memory;
    }
    return PrefixCategory::NoRewrite;
}

MajorCategory major_for_prefix(PrefixCategory c) {
    switch (c) {
        case PrefixCategory::NoRewrite: return MajorCategory::NoMemory;
        case PrefixCategory::Rewrite: return MajorCategory::MemoryUse;
        case PrefixCategory::Memory: return MajorCategory::MemoryStateChange;
    }
    return MajorCategory::NoMemory;
}

DataError::DataError(Kind kind, size_t line, std::string field, const std::string& message)
    : std::runtime_error(message), kind_(kind), line_(line), field_(std::move(field)) {}

// ---------------------------------------------------------------------------
// validation

std::vector<Violation> validate_environment(const HomeEnvironment& env) {
    std::vector<Violation> out;
    if (env.rooms.empty()) out.push_back({"environment.rooms", "must be non-empty"});
    std::set<std::string> rooms(env.rooms.begin(), env.rooms.end());
    if (!rooms.contains(env.enter_room)) {
        out.push_back({"environment.enter_room", "must be one of environment.rooms"});
    }
    for (size_t i = 0; i < env.devices.size(); ++i) {
        if (!rooms.contains(env.devices[i].room)) {
            out.push_back({"environment.devices[" + std::to_string(i) + "].room",
                           "must be one of environment.rooms"});
        }
    }
    return out;
}

namespace {

void check_label(const CategoryLabel& label, std::vector<Violation>& out) {
    switch (label.major) {
        case MajorCategory::NoMemory:
            if (label.minor && *label.minor != MinorCategory::DoNotMemorize) {
                out.push_back({"category.minor", "no_memory allows only do_not_memorize or none"});
            }
            break;
        case MajorCategory::MemoryUse:
            if (label.minor) out.push_back({"category.minor", "memory_use takes no minor label"});
            break;
        case MajorCategory::MemoryStateChange:
            if (!label.minor || *label.minor == MinorCategory::DoNotMemorize) {
                out.push_back({"category.minor", "memory_state_change requires memory_add or memory_delete"});
            }
            break;
    }
}

void check_history(const std::vector<DialogueTurn>& history, std::vector<Violation>& out) {
    for (size_t i = 0; i < history.size(); ++i) {
        if (text::trim(history[i].text).empty()) {
            out.push_back({"history[" + std::to_string(i) + "].text", "must be non-empty"});
        }
    }
}

}  // namespace

std::vector<Violation> validate_sample(const Sample& s) {
    std::vector<Violation> out;
    if (text::trim(s.id).empty()) out.push_back({"id", "must be non-empty"});
    check_label(s.category, out);
    for (auto& v : validate_environment(s.environment)) out.push_back(std::move(v));
    check_history(s.history, out);
    for (size_t i = 0; i < s.candidate_memories.size(); ++i) {
        if (text::trim(s.candidate_memories[i]).empty()) {
            out.push_back({"candidate_memories[" + std::to_string(i) + "]", "must be non-empty"});
        }
    }
    if (text::trim(s.query).empty()) out.push_back({"query", "must be non-empty"});
    if (s.gt_category != expected_prefix(s.category.major)) {
        out.push_back({"gt_category", "inconsistent with category.major"});
    }
    auto parsed = try_parse_action(s.ground_truth);
    if (!parsed) {
        out.push_back({"ground_truth", "must parse under the prefix grammar"});
    } else if (parsed->category() != s.gt_category) {
        out.push_back({"ground_truth", "prefix does not match gt_category"});
    }
    return out;
}

std::vector<Violation> validate_dialogue(const LifeDialogue& d) {
    std::vector<Violation> out;
    if (text::trim(d.id).empty()) out.push_back({"id", "must be non-empty"});
    for (auto& v : validate_environment(d.environment)) out.push_back(std::move(v));
    if (d.turns.empty()) out.push_back({"turns", "must contain at least one turn"});
    for (size_t i = 0; i < d.turns.size(); ++i) {
        const auto& t = d.turns[i];
        auto field = "turns[" + std::to_string(i) + "]";
        if (text::trim(t.query).empty()) out.push_back({field + ".query", "must be non-empty"});
        if (t.session_index < 0) out.push_back({field + ".session_index", "must be >= 0"});
        if (t.day_index < 0) out.push_back({field + ".day_index", "must be >= 0"});
        if (i > 0 && t.session_index < d.turns[i - 1].session_index) {
            out.push_back({field + ".session_index", "must be non-decreasing"});
        }
        if (i > 0 && t.day_index < d.turns[i - 1].day_index) {
            out.push_back({field + ".day_index", "must be non-decreasing"});
        }
        if (t.expected_action && !is_valid(t.expected_action->variant)) {
            out.push_back({field + ".expected_action", "must be a valid action"});
        }
    }
    auto parsed = try_parse_action(d.final_ground_truth);
    if (!parsed) {
        out.push_back({"final_ground_truth", "must parse under the prefix grammar"});
    } else if (parsed->category() != d.final_gt_category) {
        out.push_back({"final_ground_truth", "prefix does not match final_gt_category"});
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

const json& field(const json& j, const char* name) {
    if (!j.is_object()) throw std::invalid_argument("record is not an object");
    auto it = j.find(name);
    if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + name + "'");
    return *it;
}

std::string string_field(const json& j, const char* name) {
    const auto& v = field(j, name);
    if (!v.is_string()) throw std::invalid_argument(std::string("field '") + name + "' must be a string");
    return v.get<std::string>();
}

int int_field(const json& j, const char* name) {
    const auto& v = field(j, name);
    if (!v.is_number_integer()) throw std::invalid_argument(std::string("field '") + name + "' must be an integer");
    return v.get<int>();
}

std::vector<std::string> string_array(const json& j, const char* name) {
    const auto& v = field(j, name);
    if (!v.is_array()) throw std::invalid_argument(std::string("field '") + name + "' must be an array");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) throw std::invalid_argument(std::string("field '") + name + "' must hold strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

PrefixCategory prefix_field(const json& j, const char* name) {
    auto s = string_field(j, name);
    auto c = prefix_category_from_string(s);
    if (!c) throw std::invalid_argument(std::string("field '") + name + "' has unknown value '" + s + "'");
    return *c;
}

json history_json(const std::vector<DialogueTurn>& history) {
    json arr = json::array();
    for (const auto& t : history) {
        arr.push_back({{"role", t.role == Role::User ? "user" : "assistant"}, {"text", t.text}});
    }
    return arr;
}

}  // namespace

json to_json(const HomeEnvironment& env) {
    json devices = json::array();
    for (const auto& d : env.devices) devices.push_back({{"room", d.room}, {"type", d.type}, {"name", d.name}});
    return {{"rooms", env.rooms}, {"devices", devices}, {"enter_room", env.enter_room}};
}

json to_json(const Sample& s) {
    json category = {{"major", to_string(s.category.major)},
                     {"minor", s.category.minor ? json(to_string(*s.category.minor)) : json(nullptr)}};
    return {{"id", s.id},
            {"category", category},
            {"environment", to_json(s.environment)},
            {"history", history_json(s.history)},
            {"candidate_memories", s.candidate_memories},
            {"query", s.query},
            {"ground_truth", s.ground_truth},
            {"gt_category", to_string(s.gt_category)}};
}

json to_json(const LifeDialogue& d) {
    json turns = json::array();
    for (const auto& t : d.turns) {
        json jt = {{"query", t.query}, {"session_index", t.session_index}, {"day_index", t.day_index}};
        if (t.expected_action) jt["expected_action"] = t.expected_action->raw;
        turns.push_back(std::move(jt));
    }
    return {{"id", d.id},
            {"environment", to_json(d.environment)},
            {"turns", turns},
            {"final_ground_truth", d.final_ground_truth},
            {"final_gt_category", to_string(d.final_gt_category)}};
}

HomeEnvironment environment_from_json(const json& j) {
    HomeEnvironment env;
    env.rooms = string_array(j, "rooms");
    const auto& devices = field(j, "devices");
    if (!devices.is_array()) throw std::invalid_argument("field 'devices' must be an array");
    for (const auto& d : devices) {
        env.devices.push_back({string_field(d, "room"), string_field(d, "type"), string_field(d, "name")});
    }
    env.enter_room = string_field(j, "enter_room");
    return env;
}

Sample sample_from_json(const json& j) {
    Sample s;
    s.id = string_field(j, "id");
    const auto& cat = field(j, "category");
    auto major = string_field(cat, "major");
    auto m = major_from_string(major);
    if (!m) throw std::invalid_argument("field 'major' has unknown value '" + major + "'");
    s.category.major = *m;
    if (auto it = cat.find("minor"); it != cat.end() && !it->is_null()) {
        if (!it->is_string()) throw std::invalid_argument("field 'minor' must be a string or null");
        auto mn = minor_from_string(it->get<std::string>());
        if (!mn) throw std::invalid_argument("field 'minor' has unknown value '" + it->get<std::string>() + "'");
        s.category.minor = *mn;
    }
    s.environment = environment_from_json(field(j, "environment"));
    const auto& history = field(j, "history");
    if (!history.is_array()) throw std::invalid_argument("field 'history' must be an array");
    for (const auto& t : history) {
        auto role = string_field(t, "role");
        if (role != "user" && role != "assistant") {
            throw std::invalid_argument("field 'role' must be user or assistant");
        }
        s.history.push_back({role == "user" ? Role::User : Role::Assistant, string_field(t, "text")});
    }
    s.candidate_memories = string_array(j, "candidate_memories");
    s.query = string_field(j, "query");
    s.ground_truth = string_field(j, "ground_truth");
    s.gt_category = prefix_field(j, "gt_category");
    return s;
}

LifeDialogue dialogue_from_json(const json& j) {
    LifeDialogue d;
    d.id = string_field(j, "id");
    d.environment = environment_from_json(field(j, "environment"));
    const auto& turns = field(j, "turns");
    if (!turns.is_array()) throw std::invalid_argument("field 'turns' must be an array");
    for (const auto& t : turns) {
        LifeTurn lt;
        lt.query = string_field(t, "query");
        lt.session_index = int_field(t, "session_index");
        lt.day_index = int_field(t, "day_index");
        if (auto it = t.find("expected_action"); it != t.end() && !it->is_null()) {
            if (!it->is_string()) throw std::invalid_argument("field 'expected_action' must be a string");
            auto a = try_parse_action(it->get<std::string>());
            if (!a) throw std::invalid_argument("field 'expected_action' does not parse");
            lt.expected_action = std::move(a);
        }
        d.turns.push_back(std::move(lt));
    }
    d.final_ground_truth = string_field(j, "final_ground_truth");
    d.final_gt_category = prefix_field(j, "final_gt_category");
    return d;
}

// ---------------------------------------------------------------------------
// loading

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataError::Kind::Io, 0, "", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <class Record, class Decode, class Validate>
std::vector<Record> parse_jsonl(std::string_view content, Decode decode, Validate validate) {
    std::vector<Record> out;
    std::set<std::string> ids;
    size_t lineno = 0;
    size_t pos = 0;
    while (pos < content.size()) {
        auto nl = content.find('\n', pos);
        auto line = content.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? content.size() : nl + 1;
        ++lineno;
        if (text::trim(line).empty()) continue;

        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(DataError::Kind::MalformedRecord, lineno, "",
                            "line " + std::to_string(lineno) + ": malformed JSON: " + e.what());
        }
        Record r;
        try {
            r = decode(j);
        } catch (const std::exception& e) {
            throw DataError(DataError::Kind::MalformedRecord, lineno, "",
                            "line " + std::to_string(lineno) + ": " + e.what());
        }
        auto violations = validate(r);
        if (!violations.empty()) {
            const auto& v = violations.front();
            throw DataError(DataError::Kind::SchemaViolation, lineno, v.field,
                            "line " + std::to_string(lineno) + ": schema violation on " + v.field + ": " + v.rule);
        }
        if (!ids.insert(r.id).second) {
            throw DataError(DataError::Kind::SchemaViolation, lineno, "id",
                            "line " + std::to_string(lineno) + ": duplicate id '" + r.id + "'");
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

std::vector<Sample> parse_samples(std::string_view jsonl) {
    return parse_jsonl<Sample>(jsonl, sample_from_json, validate_sample);
}

std::vector<LifeDialogue> parse_dialogues(std::string_view jsonl) {
    return parse_jsonl<LifeDialogue>(jsonl, dialogue_from_json, validate_dialogue);
}

namespace {

// Re-raises a parse error with the file name in front of its message.
template <class Fn>
auto with_path(const std::filesystem::path& path, Fn&& fn) {
    try {
        return fn();
    } catch (const DataError& e) {
        if (e.kind() == DataError::Kind::Io) throw;
        throw DataError(e.kind(), e.line(), e.field(), path.string() + ": " + e.what());
    }
}

}  // namespace

std::vector<Sample> load_samples(const std::filesystem::path& path) {
    return with_path(path, [&] { return parse_samples(read_file(path)); });
}

std::vector<LifeDialogue> load_dialogues(const std::filesystem::path& path) {
    return with_path(path, [&] { return parse_dialogues(read_file(path)); });
}

std::string to_jsonl(std::span<const Sample> samples) {
    std::string out;
    for (const auto& s : samples) {
        out += to_json(s).dump();
        out += '\n';
    }
    return out;
}

std::string to_jsonl(std::span<const LifeDialogue> dialogues) {
    std::string out;
    for (const auto& d : dialogues) {
        out += to_json(d).dump();
        out += '\n';
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(DataError::Kind::Io, 0, "", "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError(DataError::Kind::Io, 0, "", "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// statistics

std::vector<std::string> history_lines(const std::vector<DialogueTurn>& history) {
    std::vector<std::string> out;
    out.reserve(history.size());
    for (const auto& t : history) out.push_back((t.role == Role::User ? "用户：" : "助手：") + t.text);
    return out;
}

size_t history_turns(const Sample& s) {
    return static_cast<size_t>(
        std::count_if(s.history.begin(), s.history.end(), [](const DialogueTurn& t) { return t.role == Role::User; }));
}

namespace {

struct Accumulator {
    size_t count = 0;
    size_t sums[4] = {0, 0, 0, 0};
    size_t maxes[4] = {0, 0, 0, 0};

    void add(const Sample& s) {
        const size_t values[4] = {s.environment.rooms.size(), s.environment.devices.size(), history_turns(s),
                                  s.candidate_memories.size()};
        ++count;
        for (int i = 0; i < 4; ++i) {
            sums[i] += values[i];
            maxes[i] = std::max(maxes[i], values[i]);
        }
    }

    CategoryStats finish() const {
        CategoryStats c;
        c.count = count;
        FieldStat* fields[4] = {&c.rooms, &c.devices, &c.history_turns, &c.memories};
        for (int i = 0; i < 4; ++i) {
            fields[i]->avg = count ? static_cast<double>(sums[i]) / static_cast<double>(count) : 0.0;
            fields[i]->max = maxes[i];
        }
        return c;
    }
};

}  // namespace

StatsReport compute_stats(std::span<const Sample> samples) {
    if (samples.empty()) throw DataError(DataError::Kind::EmptyDataset, 0, "", "dataset is empty");
    std::map<MajorCategory, Accumulator> per;
    Accumulator all;
    for (const auto& s : samples) {
        per[s.category.major].add(s);
        all.add(s);
    }
    StatsReport report;
    for (const auto& [cat, acc] : per) report.per_category[cat] = acc.finish();
    report.overall = all.finish();
    return report;
}

json StatsReport::to_json() const {
    auto cell = [](const CategoryStats& c) {
        auto f = [](const FieldStat& s) { return json{{"avg", s.avg}, {"max", s.max}}; };
        return json{{"samples", c.count},
                    {"rooms", f(c.rooms)},
                    {"devices", f(c.devices)},
                    {"history_turns", f(c.history_turns)},
                    {"memories", f(c.memories)}};
    };
    json j = json::object();
    for (const auto& [cat, c] : per_category) j[std::string(to_string(cat))] = cell(c);
    j["overall"] = cell(overall);
    return j;
}

std::string StatsReport::to_table() const {
    std::vector<std::pair<std::string, const CategoryStats*>> cols;
    for (auto cat : kAllMajorCategories) {
        if (auto it = per_category.find(cat); it != per_category.end()) {
            cols.emplace_back(std::string(to_string(cat)), &it->second);
        }
    }
    cols.emplace_back("all", &overall);

    std::ostringstream os;
    auto avgmax = [](const FieldStat& f) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(2) << f.avg << "/" << f.max;
        return s.str();
    };
    os << std::left << std::setw(14) << "";
    for (const auto& [name, _] : cols) os << std::setw(22) << name;
    os << "\n" << std::setw(14) << "#samples";
    for (const auto& [_, c] : cols) os << std::setw(22) << c->count;
    const std::pair<const char*, FieldStat CategoryStats::*> rows[] = {{"rooms", &CategoryStats::rooms},
                                                                        {"devices", &CategoryStats::devices},
                                                                        {"hist. turns", &CategoryStats::history_turns},
                                                                        {"memory", &CategoryStats::memories}};
    for (const auto& [label, member] : rows) {
        os << "\n" << std::setw(14) << label;
        for (const auto& [_, c] : cols) os << std::setw(22) << avgmax(c->*member);
    }
    os << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// split

std::pair<std::vector<Sample>, std::vector<Sample>> split(std::span<const Sample> samples, double train_fraction,
                                                          std::uint64_t seed) {
    if (samples.empty()) throw DataError(DataError::Kind::EmptyDataset, 0, "", "dataset is empty");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("train_fraction must lie strictly between 0 and 1");
    }

    std::map<MajorCategory, std::vector<size_t>> strata;
    for (size_t i = 0; i < samples.size(); ++i) strata[samples[i].category.major].push_back(i);

    // Largest-remainder allocation: every stratum gets floor(f*n) or that plus
    // one, and the total equals round(f*N).
    const auto total_train = static_cast<size_t>(std::llround(train_fraction * static_cast<double>(samples.size())));
    struct Quota {
        MajorCategory cat;
        size_t take;
        double remainder;
    };
    std::vector<Quota> quotas;
    size_t assigned = 0;
    for (const auto& [cat, idx] : strata) {
        double exact = train_fraction * static_cast<double>(idx.size());
        auto base = static_cast<size_t>(std::floor(exact));
        quotas.push_back({cat, base, exact - static_cast<double>(base)});
        assigned += base;
    }
    std::vector<size_t> order(quotas.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return quotas[a].remainder > quotas[b].remainder; });
    for (size_t k = 0; assigned < total_train && k < order.size(); ++k) {
        auto& q = quotas[order[k]];
        if (q.take < strata[q.cat].size()) {
            ++q.take;
            ++assigned;
        }
    }

    std::vector<bool> in_train(samples.size(), false);
    for (const auto& q : quotas) {
        auto idx = strata[q.cat];
        Rng rng(seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(q.cat) + 1)));
        rng.shuffle(idx);
        for (size_t k = 0; k < q.take; ++k) in_train[idx[k]] = true;
    }

    std::pair<std::vector<Sample>, std::vector<Sample>> out;
    for (size_t i = 0; i < samples.size(); ++i) {
        (in_train[i] ? out.first : out.second).push_back(samples[i]);
    }
    return out;
}

}  // namespace homectl
