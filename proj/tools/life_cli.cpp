// life: scenario runner.
//
//   life run --config cfg.json [--seed N] [--episodes N] [--out DIR]
//   life replay --report DIR/report.jsonl --episode ep-0003
//   life export-kg --config cfg.json --out kg.tsv
//
// Exit status: 0 ok, 1 bad config or arguments, 2 runtime failure.

#include "life/runner.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

int fail(int code, const std::string& msg) {
    std::cerr << "life: " << msg << '\n';
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"closed-loop incident agent runner"};
    app.require_subcommand(1);

    std::string config_path, out_dir, report_path, episode_id, kg_out;
    std::optional<std::uint64_t> seed;
    std::optional<int> episodes;

    auto* run = app.add_subcommand("run", "run a scenario config and write its artifacts");
    run->add_option("--config", config_path, "scenario config (JSON)")->required();
    run->add_option("--seed", seed, "override the config seed");
    run->add_option("--episodes", episodes, "override the episode count");
    run->add_option("--out", out_dir, "output directory (default: config 'output')");

    auto* rep = app.add_subcommand("replay", "print the transcript of one logged episode");
    rep->add_option("--report", report_path, "report.jsonl from a previous run")->required();
    rep->add_option("--episode", episode_id, "episode id, e.g. ep-0001")->required();

    auto* kg = app.add_subcommand("export-kg", "run a config and export the final knowledge graph");
    kg->add_option("--config", config_path, "scenario config (JSON)")->required();
    kg->add_option("--out", kg_out, "destination TSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    using namespace life;
    RunConfig cfg;
    if (*run || *kg) {
        try {
            cfg = RunConfig::load(config_path);
            if (seed)
                cfg.seed = *seed;
            if (episodes) {
                if (*episodes < 0)
                    throw ConfigError("--episodes must be >= 0");
                cfg.episodes = *episodes;
            }
            if (cfg.episodes > 0 && cfg.script.empty())
                throw ConfigError("episodes requested but the script is empty");
        } catch (const ConfigError& e) {
            return fail(1, e.what());
        }
    }

    try {
        if (*run) {
            RunArtifacts art = execute(cfg);
            std::filesystem::path dir = out_dir.empty() ? std::filesystem::path(cfg.output) : std::filesystem::path(out_dir);
            write_artifacts(art, dir);
            const auto& a = art.report.aggregates;
            std::cout << "episodes " << a.episodes << "  top1 " << a.top1_accuracy << "  rules mined "
                      << a.rules_mined << " validated " << a.rules_validated << " retired " << a.rules_retired
                      << "  compute " << static_cast<double>(a.total_compute_centi) / 100.0 << '\n'
                      << "wrote " << (dir / "report.jsonl").string() << '\n';
        } else if (*rep) {
            if (!std::filesystem::exists(report_path))
                return fail(1, "no report at " + report_path);
            std::cout << replay(report_path, episode_id);
        } else if (*kg) {
            RunArtifacts art = execute(cfg);
            std::ofstream out(kg_out, std::ios::binary);
            if (!out)
                return fail(2, "cannot write " + kg_out);
            out << art.kg_tsv;
        }
    } catch (const ConfigError& e) {
        return fail(1, e.what());
    } catch (const std::exception& e) {
        // An unknown episode id is a usage error, not a crash.
        if (*rep)
            return fail(1, e.what());
        return fail(2, e.what());
    }
    return 0;
}
