#include "life/runner.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace life;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = LIFE_CONFIG_DIR;

nlohmann::json config_json(const std::string& name) {
    std::ifstream in(kConfigs / name);
    return nlohmann::json::parse(in);
}

RunConfig small_run(int episodes) {
    auto j = config_json("acceptance.json");
    j["episodes"] = episodes;
    return RunConfig::from_json(j, kConfigs);
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("life_test_runner_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("config validation") {
    auto j = config_json("recurring_dns.json");
    CHECK_NOTHROW(RunConfig::from_json(j, kConfigs));

    auto no_seed = j;
    no_seed.erase("seed");
    CHECK_THROWS_AS(RunConfig::from_json(no_seed, kConfigs), ConfigError);

    auto bad_target = j;
    bad_target["script"][0]["target"] = "svc_nope";
    CHECK_THROWS_AS(RunConfig::from_json(bad_target, kConfigs), ConfigError);

    auto empty_script = j;
    empty_script["script"] = nlohmann::json::array();
    CHECK_THROWS_AS(RunConfig::from_json(empty_script, kConfigs), ConfigError);
    empty_script["episodes"] = 0;
    CHECK_NOTHROW(RunConfig::from_json(empty_script, kConfigs));

    auto negative = j;
    negative["episodes"] = -1;
    CHECK_THROWS_AS(RunConfig::from_json(negative, kConfigs), ConfigError);

    auto missing_file = j;
    missing_file["topology"] = "nowhere.json";
    CHECK_THROWS_AS(RunConfig::from_json(missing_file, kConfigs), ConfigError);
    CHECK_THROWS_AS(RunConfig::load(kConfigs / "absent.json"), ConfigError);
}

TEST_CASE("zero episodes give an empty report") {
    auto art = execute(small_run(0));
    CHECK(art.report.rows.empty());
    CHECK(art.report.aggregates.episodes == 0);
    CHECK(art.report.aggregates.top1_accuracy == 0.0);
    CHECK(art.report.aggregates.total_compute_centi == 0);
    for (const auto& m : art.report.aggregates.mean_ticks_to_resolve)
        CHECK_FALSE(m.has_value());
}

TEST_CASE("aggregates recompute from rows") {
    auto art = execute(small_run(9));
    REQUIRE(art.report.rows.size() == 9);
    CHECK(aggregate(art.report.rows) == art.report.aggregates);

    std::size_t correct = 0;
    std::int64_t total = 0;
    for (const auto& r : art.report.rows) {
        correct += r.correct;
        total += r.total_centi();
    }
    CHECK(art.report.aggregates.top1_accuracy == doctest::Approx(correct / 9.0));
    CHECK(art.report.aggregates.total_compute_centi == total);

    std::vector<ReportRow> rows(3);
    rows[0].ticks_to_resolve = 10;
    rows[1].ticks_to_resolve = 20;
    rows[2].escalated = true;
    auto a = aggregate(rows);
    CHECK(a.mean_ticks_to_resolve[0] == 10.0);
    CHECK(a.mean_ticks_to_resolve[1] == 20.0);
    CHECK_FALSE(a.mean_ticks_to_resolve[2].has_value());
}

TEST_CASE("report rows and aggregates survive json") {
    auto art = execute(small_run(4));
    for (const auto& r : art.report.rows)
        CHECK(row_from_json(to_json(r)) == r);
    CHECK(aggregates_from_json(to_json(art.report.aggregates)) == art.report.aggregates);
}

TEST_CASE("artifacts, read_report and replay") {
    auto art = execute(small_run(5));
    auto dir = scratch("artifacts");
    write_artifacts(art, dir);
    for (const char* f : {"report.jsonl", "episodes.jsonl", "transitions.log", "kg.tsv", "episodic.jsonl", "rules.jsonl"})
        CHECK(fs::exists(dir / f));
    CHECK(slurp(dir / "report.jsonl") == art.report_jsonl);

    auto back = read_report(dir / "report.jsonl");
    CHECK(back.seed == art.report.seed);
    CHECK(back.rows == art.report.rows);
    CHECK(back.aggregates == art.report.aggregates);

    const auto& first = art.outcomes.front();
    auto text = replay(dir / "report.jsonl", first.episode.id);
    CHECK(text.find("episode " + first.episode.id) != std::string::npos);
    for (const auto& t : first.transitions)
        CHECK(text.find(std::string(to_string(t.from)) + " --" + std::string(to_string(t.event)) + "--> " +
                        std::string(to_string(t.to))) != std::string::npos);
    CHECK_THROWS_AS(replay(dir / "report.jsonl", "ep-9999"), Error);
    CHECK_THROWS_AS(replay(dir / "missing.jsonl", first.episode.id), Error);
    CHECK_THROWS_AS(read_report(dir / "missing.jsonl"), Error);
    fs::remove_all(dir);
}

TEST_CASE("escalated transcripts end with the reason") {
    auto art = execute(RunConfig::load(kConfigs / "budget_limited.json"));
    auto dir = scratch("budget");
    write_artifacts(art, dir);
    for (const auto& o : art.outcomes) {
        REQUIRE(o.escalated);
        auto text = replay(dir / "report.jsonl", o.episode.id);
        CHECK(text.find("--budget_exceeded--> Escalated") != std::string::npos);
        CHECK(text.find("outcome: Escalated (budget_exceeded)") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("runs are deterministic for a seed") {
    auto cfg = small_run(6);
    auto a = execute(cfg);
    auto b = execute(cfg);
    CHECK(a.report_jsonl == b.report_jsonl);
    CHECK(a.episodes_jsonl == b.episodes_jsonl);
    CHECK(a.transitions_log == b.transitions_log);
    CHECK(a.kg_tsv == b.kg_tsv);
    CHECK(a.rules_jsonl == b.rules_jsonl);

    cfg.seed += 1;
    auto c = execute(cfg);
    CHECK(c.report.seed == cfg.seed);
    CHECK(c.report_jsonl != a.report_jsonl);
}

TEST_CASE("before_episode hook sees every episode") {
    std::vector<std::size_t> seen;
    RunHooks hooks;
    hooks.before_episode = [&](std::size_t i, Orchestrator&, ClusterSim&) { seen.push_back(i); };
    execute(small_run(4), hooks);
    CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("recurring dns run learns rules by the sixth episode") {
    auto art = execute(RunConfig::load(kConfigs / "recurring_dns.json"));
    REQUIRE(art.report.rows.size() == 20);
    for (std::size_t i = 5; i < 20; ++i)
        CHECK(art.report.rows[i].rules_active > 0);
    CHECK(art.report.aggregates.rules_validated > 0);
}
