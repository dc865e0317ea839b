#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "homectl/dataset.hpp"

namespace fs = std::filesystem;
using homectl::json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("homectl_cli_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args, const std::string& input = "") {
    std::istringstream in(input);
    std::ostringstream out, err;
    int code = homectl::cli::dispatch(args, in, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors") {
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"stats"}).code == 1);
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"evaluate", "--dataset", "x"}).code == 1);
}

TEST_CASE("gen-fixtures is deterministic") {
    TempDir dir;
    const std::vector<std::string> base = {"gen-fixtures", "--seed", "7", "--no-memory", "53",
                                           "--memory-use", "220", "--state-change", "116"};
    auto a = base, b = base;
    a.insert(a.end(), {"--out", dir / "a.jsonl"});
    b.insert(b.end(), {"--out", dir / "b.jsonl"});
    REQUIRE(run(a).code == 0);
    REQUIRE(run(b).code == 0);
    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
    CHECK(homectl::load_samples(dir / "a.jsonl").size() == 389);
}

TEST_CASE("stats") {
    TempDir dir;
    REQUIRE(run({"gen-fixtures", "--out", dir / "fx.jsonl"}).code == 0);
    auto r = run({"stats", "--dataset", dir / "fx.jsonl"});
    CHECK(r.code == 0);
    CHECK(r.out.find("389") != std::string::npos);
    CHECK(r.out.find("rooms") != std::string::npos);

    auto j = run({"stats", "--dataset", dir / "fx.jsonl", "--json"});
    REQUIRE(j.code == 0);
    CHECK(json::parse(j.out)["overall"]["samples"] == 389);

    CHECK(run({"stats", "--dataset", dir / "missing.jsonl"}).code == 2);
    spit(dir / "bad.jsonl", "{\"id\": 1}\n");
    auto bad = run({"stats", "--dataset", dir / "bad.jsonl"});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("bad.jsonl: line 1") != std::string::npos);
    spit(dir / "empty.jsonl", "");
    CHECK(run({"stats", "--dataset", dir / "empty.jsonl"}).code == 2);
}

TEST_CASE("evaluate with the oracle policy") {
    TempDir dir;
    REQUIRE(run({"gen-fixtures", "--no-memory", "5", "--memory-use", "10", "--state-change", "6", "--out",
                 dir / "fx.jsonl", "--emit-oracle-rules", dir / "rules.json"})
                .code == 0);
    spit(dir / "verdicts.json", R"({"evaluation": {"mode": "exact"}, "reward": {"dimensions": "Y"}})");
    auto r = run({"evaluate", "--dataset", dir / "fx.jsonl", "--policy", "scripted:" + (dir / "rules.json"), "--judges",
                  "scripted:" + (dir / "verdicts.json"), "--out", dir / "report.json", "--csv", dir / "report.csv"});
    CHECK(r.code == 0);
    auto report = json::parse(slurp(dir / "report.json"));
    CHECK(report["report"]["overall"]["accuracy"] == 1.0);
    CHECK(report["rows"].size() == 21);
    CHECK(slurp(dir / "report.csv").rfind("category,count,f1,bleu1,accuracy", 0) == 0);

    // Malformed rules file is a data error naming the file.
    spit(dir / "broken.json", "{");
    auto broken = run({"evaluate", "--dataset", dir / "fx.jsonl", "--policy", "scripted:" + (dir / "broken.json"),
                       "--judges", "scripted:" + (dir / "verdicts.json"), "--out", dir / "r2.json"});
    CHECK(broken.code == 2);
    CHECK(broken.err.find("broken.json") != std::string::npos);

    auto bad_spec = run({"evaluate", "--dataset", dir / "fx.jsonl", "--policy", "carrier-pigeon", "--judges",
                         "scripted:" + (dir / "verdicts.json"), "--out", dir / "r3.json"});
    CHECK(bad_spec.code == 1);
}

TEST_CASE("evaluate against an unreachable endpoint") {
    TempDir dir;
    REQUIRE(run({"gen-fixtures", "--no-memory", "2", "--memory-use", "2", "--state-change", "2", "--out",
                 dir / "fx.jsonl"})
                .code == 0);
    spit(dir / "verdicts.json", R"({"evaluation": {"mode": "exact"}})");
    spit(dir / "config.json", R"({"policy": {"retries": 0, "timeout_s": 1}})");
    auto r = run({"--config", dir / "config.json", "evaluate", "--dataset", dir / "fx.jsonl", "--policy",
                  "remote:http://127.0.0.1:1/v1", "--judges", "scripted:" + (dir / "verdicts.json"), "--out",
                  dir / "report.json"});
    CHECK(r.code == 3);
    CHECK(fs::exists(dir / "report.json.partial.json"));
    CHECK(r.err.find("127.0.0.1:1") != std::string::npos);
}

TEST_CASE("evaluate dialogues") {
    TempDir dir;
    REQUIRE(run({"gen-fixtures", "--kind", "memhomelife", "--dialogues", "6", "--out", dir / "life.jsonl",
                 "--emit-oracle-rules", dir / "rules.json"})
                .code == 0);
    spit(dir / "verdicts.json", R"({"evaluation": {"mode": "exact"}})");
    auto r = run({"evaluate", "--kind", "memhomelife", "--dataset", dir / "life.jsonl", "--policy",
                  "scripted:" + (dir / "rules.json"), "--judges", "scripted:" + (dir / "verdicts.json"), "--out",
                  dir / "report.json"});
    CHECK(r.code == 0);
    CHECK(json::parse(slurp(dir / "report.json"))["report"]["overall"]["accuracy"] == 1.0);
}

TEST_CASE("score") {
    TempDir dir;
    spit(dir / "verdicts.json", R"({"reward": {"dimensions": "Y"}})");
    json a = {{"sample_id", "a"},
              {"generated_text", "记忆：卧室空调默认26度"},
              {"ground_truth_text", "记忆：卧室空调默认26度"},
              {"gt_prefix_category", "memory"},
              {"prefix_logprobs", {std::log(0.9), std::log(0.9)}}};
    json b = a;
    b["sample_id"] = "b";
    b["generated_text"] = "不改写";
    spit(dir / "rollouts.jsonl", a.dump() + "\n" + b.dump() + "\n");
    auto r = run({"score", "--rollouts", dir / "rollouts.jsonl", "--judges", "scripted:" + (dir / "verdicts.json"),
                  "--out", dir / "rewards.jsonl"});
    REQUIRE(r.code == 0);
    std::istringstream lines(slurp(dir / "rewards.jsonl"));
    std::string l1, l2;
    std::getline(lines, l1);
    std::getline(lines, l2);
    CHECK(std::abs(json::parse(l1)["reward"].get<double>() - 0.984354) <= 1e-6);
    CHECK(json::parse(l2)["reward"] == 0.0);
    CHECK(json::parse(l2)["sample_id"] == "b");

    CHECK(run({"score", "--rollouts", dir / "rollouts.jsonl", "--judges", "scripted:" + (dir / "verdicts.json"),
               "--out", dir / "x.jsonl", "--mode", "sometimes"})
              .code == 1);
    spit(dir / "bad.jsonl", "{\"generated_text\": 3}\n");
    CHECK(run({"score", "--rollouts", dir / "bad.jsonl", "--judges", "scripted:" + (dir / "verdicts.json"), "--out",
               dir / "x.jsonl"})
              .code == 2);
}

TEST_CASE("repl") {
    TempDir dir;
    spit(dir / "rules.json",
         R"({"rules": [{"match": "记住", "output": "记忆：客厅灯默认暖白"}, {"match": "开灯", "output": "改写：打开客厅灯并调为暖白"}]})");
    auto r = run({"repl", "--policy", "scripted:" + (dir / "rules.json")},
                 "记住我喜欢暖白灯\n开灯\n:bank\n:save " + (dir / "bank.jsonl") + "\n:quit\n");
    CHECK(r.code == 0);
    CHECK(r.out.find("客厅灯默认暖白") != std::string::npos);
    CHECK(r.out.find("downstream: 打开客厅灯并调为暖白") != std::string::npos);
    CHECK(fs::exists(dir / "bank.jsonl"));
}

}  // TEST_SUITE
