#include <algorithm>
#include <array>
#include <cstdio>
#include <set>

#include "homectl/dataset.hpp"
#include "homectl/rng.hpp"

// Synthetic evaluation fixtures. Content is slot-filled from templates;
// the size distributions below are tuned so per-category averages land near
// the reference evaluation set (rooms ~14.8, devices ~117, history ~0.8,
// memories ~1.4).

namespace homectl {

namespace {

const std::vector<std::string> kRoomPool = {
    "客厅", "主卧", "次卧", "儿童房", "老人房", "书房", "厨房", "餐厅", "主卫", "次卫",
    "阳台", "玄关", "衣帽间", "储物间", "健身房", "影音室", "茶室", "洗衣房", "车库", "花园"};

const std::vector<std::string> kFillerTypes = {
    "吸顶灯", "射灯", "灯带", "台灯", "落地灯", "窗帘", "电视", "音箱", "插座", "加湿器",
    "空气净化器", "除湿机", "扫地机器人", "新风机", "摄像头", "门锁", "晾衣架", "浴霸", "地暖",
    "热水器", "冰箱", "烤箱", "油烟机", "洗衣机", "风扇"};

struct Setting {
    std::string type;
    std::string setting;   // phrase appended to a control verb
};

// Device types that rules can target, with plausible settings.
const std::vector<Setting> kSettings = {
    {"空调", "设置25度"},           {"空调", "设置26度并开启制冷模式"}, {"空调", "开启除湿模式"},
    {"空调", "风速调到中档"},       {"灯", "亮度调到60%暖白"},         {"灯", "亮度调到30%"},
    {"灯", "色温调到4000K"},        {"风扇", "切换到自然风模式并摇头"}, {"风扇", "风速调到二档"},
    {"窗帘", "只打开一半"},         {"加湿器", "湿度设为50%"},          {"热水器", "水温设为42度"},
    {"洗衣机", "水温设为40度"},     {"洗衣机", "选择快洗模式"},         {"电视", "音量调到20"},
    {"空气净化器", "切换到睡眠模式"}, {"地暖", "温度设为22度"}};

const std::vector<std::pair<std::string, std::string>> kChitChat = {
    {"现在几点了", "现在是下午3点15分。"},
    {"今天天气怎么样", "今天多云，气温18到25度。"},
    {"灯光", "需要打开还是调节亮度还是要关了？"},
    {"空调模式", "请问你调节空调什么模式呢？"},
    {"帮我看看家里设备", "好的，家里设备都在线。"},
    {"请你记一下那个", "请问你要我为你记住什么呢？"},
    {"有点闷", "需要为您打开新风吗？"},
    {"播放点音乐", "好的，正在为您播放音乐。"}};

const std::vector<std::string> kNonDeviceRemember = {
    "帮我记住我的身份证号是110101199001011234", "记住我女儿的生日是五月二十号",
    "帮我记一下我的车停在B2层", "记住我喜欢吃辣", "帮我记住明天要交电费"};

struct DrawTable {
    std::vector<size_t> values;
    std::vector<double> weights;

    size_t draw(Rng& rng) const { return values[rng.weighted(weights)]; }
};

const DrawTable kRoomCounts{{13, 14, 15, 16}, {0.10, 0.25, 0.35, 0.30}};

const DrawTable& history_table(MajorCategory c) {
    static const DrawTable none{{0, 1, 2, 3, 4, 5}, {0.40, 0.30, 0.20, 0.06, 0.02, 0.02}};
    static const DrawTable use{{0, 1, 2, 3}, {0.45, 0.38, 0.12, 0.05}};
    static const DrawTable change{{0, 1, 2, 3, 4}, {0.45, 0.35, 0.12, 0.05, 0.03}};
    switch (c) {
        case MajorCategory::NoMemory: return none;
        case MajorCategory::MemoryUse: return use;
        case MajorCategory::MemoryStateChange: return change;
    }
    return none;
}

const DrawTable kMemoriesNoMemory{{1, 2, 3}, {0.10, 0.74, 0.16}};
const DrawTable kMemoriesUse{{1, 2}, {0.90, 0.10}};
const DrawTable kMemoriesAdd{{0, 1, 2, 3, 4}, {0.15, 0.30, 0.35, 0.15, 0.05}};
const DrawTable kMemoriesDelete{{1, 2, 3, 4}, {0.30, 0.40, 0.20, 0.10}};

bool is_light(const std::string& type) {
    return type == "灯" || type == "射灯" || type == "吸顶灯" || type == "灯带" || type == "台灯" ||
           type == "落地灯";
}

HomeEnvironment make_environment(Rng& rng) {
    HomeEnvironment env;
    auto pool = kRoomPool;
    rng.shuffle(pool);
    // 客厅 is always present; most reference homes have a living room entry.
    auto living = std::find(pool.begin(), pool.end(), "客厅");
    std::iter_swap(pool.begin(), living);
    size_t n_rooms = kRoomCounts.draw(rng);
    env.rooms.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_rooms));

    auto n_devices = static_cast<size_t>(rng.between(105, 129));
    std::map<std::string, int> per_name;
    auto add = [&](const std::string& room, const std::string& type) {
        std::string name = room + type;
        int n = ++per_name[name];
        if (n > 1) name += std::to_string(n);
        env.devices.push_back({room, type, name});
    };
    // Every room gets a light and an air conditioner so rule targets exist.
    for (const auto& room : env.rooms) {
        add(room, "灯");
        add(room, "空调");
    }
    std::vector<std::string> rule_types;
    for (const auto& s : kSettings) {
        if (std::find(rule_types.begin(), rule_types.end(), s.type) == rule_types.end()) rule_types.push_back(s.type);
    }
    for (const auto& t : rule_types) {
        if (t != "灯" && t != "空调") add(env.rooms[rng.uniform(env.rooms.size())], t);
    }
    while (env.devices.size() < n_devices) {
        add(env.rooms[rng.uniform(env.rooms.size())], rng.pick(kFillerTypes));
    }
    env.enter_room = env.rooms[rng.uniform(std::min<size_t>(env.rooms.size(), 4))];
    return env;
}

struct Rule {
    std::string room;
    std::string type;
    std::string setting;

    std::string memory_text() const { return "打开" + room + type + "时默认" + setting; }
    std::string rewrite() const { return "改写：打开" + room + type + "并" + setting + "。"; }
};

// A rule for a device present in `env`, distinct from every rule in `taken`
// by (room, type).
Rule draw_rule(Rng& rng, const HomeEnvironment& env, const std::vector<Rule>& taken) {
    for (int attempt = 0; attempt < 64; ++attempt) {
        const auto& s = rng.pick(kSettings);
        std::vector<const Device*> matches;
        for (const auto& d : env.devices) {
            if (d.type == s.type) matches.push_back(&d);
        }
        if (matches.empty()) continue;
        const Device* d = matches[rng.uniform(matches.size())];
        bool clash = std::any_of(taken.begin(), taken.end(),
                                 [&](const Rule& r) { return r.room == d->room && r.type == d->type; });
        if (clash) continue;
        return {d->room, d->type, s.setting};
    }
    return {env.rooms.front(), "灯", "亮度调到50%"};
}

std::vector<DialogueTurn> make_history(Rng& rng, size_t turns) {
    std::vector<DialogueTurn> h;
    for (size_t i = 0; i < turns; ++i) {
        const auto& [u, a] = rng.pick(kChitChat);
        h.push_back({Role::User, u});
        h.push_back({Role::Assistant, a});
    }
    return h;
}

std::vector<std::string> distractor_memories(Rng& rng, const HomeEnvironment& env, std::vector<Rule>& taken,
                                             size_t n) {
    std::vector<std::string> out;
    for (size_t i = 0; i < n; ++i) {
        auto r = draw_rule(rng, env, taken);
        taken.push_back(r);
        out.push_back(r.memory_text());
    }
    return out;
}

Sample make_memory_use(Rng& rng, HomeEnvironment env) {
    Sample s;
    s.category = {MajorCategory::MemoryUse, std::nullopt};
    s.gt_category = PrefixCategory::Rewrite;
    std::vector<Rule> taken;
    Rule target = draw_rule(rng, env, taken);
    taken.push_back(target);
    size_t n_mem = kMemoriesUse.draw(rng);
    size_t n_hist = history_table(MajorCategory::MemoryUse).draw(rng);

    std::vector<std::string> memories{target.memory_text()};
    if (n_mem > 1) {
        // Competing memory: same device type in another room when possible.
        Rule competitor = target;
        for (const auto& room : env.rooms) {
            if (room != target.room) {
                competitor.room = room;
                break;
            }
        }
        if (competitor.room != target.room && rng.chance(0.5)) {
            bool ok = false;
            for (const auto& st : kSettings) {
                if (st.type == competitor.type && st.setting != target.setting) {
                    competitor.setting = st.setting;
                    ok = true;
                    break;
                }
            }
            if (!ok) competitor.setting = target.setting;
            taken.push_back(competitor);
            memories.push_back(competitor.memory_text());
        } else {
            auto extra = distractor_memories(rng, env, taken, 1);
            memories.insert(memories.end(), extra.begin(), extra.end());
        }
    }
    rng.shuffle(memories);
    s.candidate_memories = memories;

    if (is_light(target.type) && n_hist > 0 && rng.chance(0.4)) {
        // Implicit trigger: the device is only named in the history.
        s.history = make_history(rng, n_hist - 1);
        s.history.push_back({Role::User, "灯光"});
        s.history.push_back({Role::Assistant, "需要打开还是调节亮度还是要关了？"});
        s.query = "是赶紧调下";
    } else {
        s.history = make_history(rng, n_hist);
        static const std::array<const char*, 3> forms = {"打开%s", "把%s打开", "%s开一下"};
        std::string device = rng.chance(0.5) ? target.room + target.type : target.type;
        char buf[256];
        std::snprintf(buf, sizeof buf, forms[rng.uniform(forms.size())], device.c_str());
        s.query = buf;
    }
    s.ground_truth = target.rewrite();
    s.environment = std::move(env);
    return s;
}

Sample make_state_change(Rng& rng, HomeEnvironment env) {
    Sample s;
    s.gt_category = PrefixCategory::Memory;
    bool is_delete = rng.chance(0.3);
    s.history = make_history(rng, history_table(MajorCategory::MemoryStateChange).draw(rng));
    std::vector<Rule> taken;
    if (is_delete) {
        s.category = {MajorCategory::MemoryStateChange, MinorCategory::MemoryDelete};
        Rule target = draw_rule(rng, env, taken);
        taken.push_back(target);
        size_t n_mem = kMemoriesDelete.draw(rng);
        std::vector<std::string> memories{target.memory_text()};
        auto extra = distractor_memories(rng, env, taken, n_mem - 1);
        memories.insert(memories.end(), extra.begin(), extra.end());
        rng.shuffle(memories);
        s.candidate_memories = memories;
        s.query = rng.chance(0.5) ? "把" + target.room + target.type + "那条记忆删掉"
                                  : "以后打开" + target.room + target.type + "不用再" + target.setting + "了";
        s.ground_truth = "记忆：删除" + target.memory_text();
    } else {
        s.category = {MajorCategory::MemoryStateChange, MinorCategory::MemoryAdd};
        Rule target = draw_rule(rng, env, taken);
        taken.push_back(target);
        s.candidate_memories = distractor_memories(rng, env, taken, kMemoriesAdd.draw(rng));
        std::string device = rng.chance(0.5) ? target.room + target.type : target.type;
        s.query = "帮我记住我以后每次打开" + device + "的时候，都要" + target.setting;
        s.ground_truth = "记忆：好的，已帮您记住\"打开" + device + "，就要" + target.setting + "\"";
    }
    s.environment = std::move(env);
    return s;
}

Sample make_no_memory(Rng& rng, HomeEnvironment env) {
    Sample s;
    s.gt_category = PrefixCategory::NoRewrite;
    s.ground_truth = "不改写";
    s.history = make_history(rng, history_table(MajorCategory::NoMemory).draw(rng));
    std::vector<Rule> taken;
    size_t n_mem = kMemoriesNoMemory.draw(rng);
    double kind = rng.unit();
    if (kind < 0.35) {
        s.category = {MajorCategory::NoMemory, MinorCategory::DoNotMemorize};
        s.candidate_memories = distractor_memories(rng, env, taken, n_mem);
        if (rng.chance(0.6)) {
            s.query = rng.pick(kNonDeviceRemember);
        } else {
            s.query = "帮我记住明天早上七点打开" + env.enter_room + "窗帘";
        }
    } else if (kind < 0.55) {
        // Hard negative: a memory on the same device that the query must not use.
        s.category = {MajorCategory::NoMemory, std::nullopt};
        Rule near{env.rooms.front(), "空调", "开启除湿模式"};
        taken.push_back(near);
        s.candidate_memories.push_back(near.room + "空调的平常设置为除湿模式，温度二十六度，风速中");
        auto extra = distractor_memories(rng, env, taken, n_mem - 1);
        s.candidate_memories.insert(s.candidate_memories.end(), extra.begin(), extra.end());
        rng.shuffle(s.candidate_memories);
        s.query = "太热了，降一点";
        s.history.push_back({Role::User, "空调模式"});
        s.history.push_back({Role::Assistant, "请问你调节空调什么模式呢？"});
    } else {
        s.category = {MajorCategory::NoMemory, std::nullopt};
        s.candidate_memories = distractor_memories(rng, env, taken, n_mem);
        const auto& d = env.devices[rng.uniform(env.devices.size())];
        s.query = (rng.chance(0.5) ? "关闭" : "查询") + d.name + (rng.chance(0.5) ? "" : "的状态");
    }
    s.environment = std::move(env);
    return s;
}

std::string make_id(const char* prefix, std::uint64_t seed, size_t index) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s-%llu-%05zu", prefix, static_cast<unsigned long long>(seed), index);
    return buf;
}

}  // namespace

std::vector<Sample> generate_fixtures(std::uint64_t seed, CategoryCounts counts) {
    Rng rng(seed);
    std::vector<MajorCategory> plan;
    plan.insert(plan.end(), counts.no_memory, MajorCategory::NoMemory);
    plan.insert(plan.end(), counts.memory_use, MajorCategory::MemoryUse);
    plan.insert(plan.end(), counts.state_change, MajorCategory::MemoryStateChange);
    rng.shuffle(plan);

    std::vector<Sample> out;
    out.reserve(plan.size());
    for (size_t i = 0; i < plan.size(); ++i) {
        auto env = make_environment(rng);
        Sample s;
        switch (plan[i]) {
            case MajorCategory::NoMemory: s = make_no_memory(rng, std::move(env)); break;
            case MajorCategory::MemoryUse: s = make_memory_use(rng, std::move(env)); break;
            case MajorCategory::MemoryStateChange: s = make_state_change(rng, std::move(env)); break;
        }
        s.id = make_id("mh", seed, i);
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// long-horizon dialogues

namespace {

std::string remember_ack(const Rule& r) {
    return "记忆：好的，已帮您记住\"打开" + r.room + r.type + "，就要" + r.setting + "\"";
}

std::string remembered_text(const Rule& r) { return "打开" + r.room + r.type + "，就要" + r.setting; }

}  // namespace

std::vector<LifeDialogue> generate_dialogues(std::uint64_t seed, size_t count) {
    Rng rng(seed ^ 0x5DEECE66DULL);
    std::vector<LifeDialogue> out;
    for (size_t n = 0; n < count; ++n) {
        LifeDialogue d;
        d.id = make_id("life", seed, n);
        d.environment = make_environment(rng);

        auto n_turns = static_cast<size_t>(rng.between(6, 23));
        auto n_sessions = static_cast<int>(std::clamp<std::int64_t>(
            static_cast<std::int64_t>(n_turns / 2) + rng.between(-1, 1), 1, 13));
        n_sessions = std::min<int>(n_sessions, static_cast<int>(n_turns));
        auto span_days = static_cast<int>(rng.between(std::max(1, n_sessions - 1), 21));

        // Session start positions: first turn opens session 0, the remaining
        // boundaries are distinct random turn indices.
        std::vector<size_t> cuts;
        for (size_t i = 1; i < n_turns; ++i) cuts.push_back(i);
        rng.shuffle(cuts);
        cuts.resize(static_cast<size_t>(n_sessions - 1));
        std::sort(cuts.begin(), cuts.end());
        std::vector<int> session_day(static_cast<size_t>(n_sessions));
        for (auto& day : session_day) day = static_cast<int>(rng.between(0, span_days));
        std::sort(session_day.begin(), session_day.end());
        session_day.front() = 0;

        std::vector<Rule> active;
        std::vector<Rule> taken;
        int session = 0;
        for (size_t i = 0; i < n_turns; ++i) {
            while (session < n_sessions - 1 && i >= cuts[static_cast<size_t>(session)]) ++session;
            LifeTurn t;
            t.session_index = session;
            t.day_index = session_day[static_cast<size_t>(session)];
            const bool last = i + 1 == n_turns;

            double roll = rng.unit();
            std::string gt;
            if (!last && (active.empty() || (roll < 0.30 && active.size() < 7))) {
                Rule r = draw_rule(rng, d.environment, taken);
                taken.push_back(r);
                active.push_back(r);
                t.query = "帮我记住我以后每次打开" + r.room + r.type + "的时候，都要" + r.setting;
                gt = remember_ack(r);
            } else if (!last && roll < 0.40 && !active.empty()) {
                size_t k = rng.uniform(active.size());
                t.query = "把" + active[k].room + active[k].type + "那条记忆删掉";
                gt = "记忆：删除" + remembered_text(active[k]);
                active.erase(active.begin() + static_cast<std::ptrdiff_t>(k));
            } else if (roll < 0.80 && !active.empty()) {
                const Rule& r = active[rng.uniform(active.size())];
                t.query = "打开" + r.room + r.type;
                gt = "改写：打开" + r.room + r.type + "并" + r.setting + "。";
            } else {
                const auto& dev = d.environment.devices[rng.uniform(d.environment.devices.size())];
                t.query = "关闭" + dev.name;
                gt = "不改写";
            }
            t.expected_action = parse_action(gt);
            if (last) {
                d.final_ground_truth = gt;
                d.final_gt_category = t.expected_action->category();
            }
            d.turns.push_back(std::move(t));
        }
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace homectl
