#pragma once

#include "life/orchestrator.hpp"

#include <filesystem>

namespace life {

// Bad or inconsistent configuration; the CLI maps it to exit status 1.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct ScriptStep {
    FaultScenario fault; // start_tick is filled in when the step runs
    Tick gap = 6;        // ticks from "now" to the fault's start
};

struct RunConfig {
    std::uint64_t seed = 0;
    int episodes = 0;
    TopologySpec topology;
    SimParams sim;
    std::vector<ScriptStep> script;
    OrchestratorConfig orchestrator;
    PolicySet policies;
    std::vector<Runbook> runbooks;
    std::string output = "out";

    // Paths inside the JSON (topology, runbooks) resolve against `base_dir`.
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    static RunConfig load(const std::filesystem::path& path);
};

struct ReportRow {
    std::string episode;
    std::optional<FaultKind> fault_kind;
    EntityId fault_target;
    std::optional<FaultKind> top1_kind;
    EntityId top1_suspect;
    bool correct = false;
    bool resolved = false;
    bool escalated = false;
    std::optional<Tick> ticks_to_resolve;
    std::map<Component, std::int64_t> compute_centi;
    bool shortcut = false;
    std::size_t rules_active = 0;
    std::size_t rules_mined = 0;
    std::size_t rules_injected = 0;
    std::size_t rules_retired = 0; // by learning or maintenance since the previous row

    std::int64_t total_centi() const;
    bool operator==(const ReportRow&) const = default;
};

nlohmann::json to_json(const ReportRow& r);
ReportRow row_from_json(const nlohmann::json& j);

struct Aggregates {
    std::size_t episodes = 0;
    double top1_accuracy = 0.0;
    // Mean ticks_to_resolve over resolved rows in each third of the run.
    std::array<std::optional<double>, 3> mean_ticks_to_resolve;
    std::size_t rules_mined = 0;
    std::size_t rules_validated = 0;
    std::size_t rules_retired = 0;
    std::int64_t total_compute_centi = 0;
    bool operator==(const Aggregates&) const = default;
};

Aggregates aggregate(const std::vector<ReportRow>& rows);
nlohmann::json to_json(const Aggregates& a);
Aggregates aggregates_from_json(const nlohmann::json& j);

struct RunReport {
    std::uint64_t seed = 0;
    std::vector<ReportRow> rows;
    Aggregates aggregates;
    std::int64_t idle_detector_centi = 0;
    std::vector<MaintenanceRecord> maintenance;
};

// Everything a run produces, held in memory so runs can be compared.
struct RunArtifacts {
    RunReport report;
    std::vector<EpisodeOutcome> outcomes;
    std::string report_jsonl;
    std::string episodes_jsonl;
    std::string transitions_log;
    std::string kg_tsv;
    std::string episodic_jsonl;
    std::string rules_jsonl;
    std::vector<std::pair<std::string, std::string>> contexts; // file name, csv
};

struct RunHooks {
    // Runs before each episode, after any maintenance steps that precede it.
    std::function<void(std::size_t index, Orchestrator&, ClusterSim&)> before_episode;
};

RunArtifacts execute(const RunConfig& config, const RunHooks& hooks = {});
void write_artifacts(const RunArtifacts& artifacts, const std::filesystem::path& dir);

std::string report_jsonl(const RunReport& report);
RunReport read_report(const std::filesystem::path& path);

// Human-readable transcript of one episode from the episodes.jsonl written
// beside the report. Throws Error on an unknown id.
std::string replay(const std::filesystem::path& report_path, const std::string& episode_id);
std::string format_transcript(const nlohmann::json& episode_log);

} // namespace life
