#pragma once

#include "life/ill.hpp"
#include "life/reasoner.hpp"

#include <functional>

namespace life {

enum class Phase { Idle, Detecting, Enriching, Diagnosing, Selecting, Executing, Verifying, Logging, Learning, Escalated };

enum class Event {
    alert_raised,
    pack_ready,
    hypotheses_ready,
    plan_ready,
    action_done,
    symptoms_clear,
    symptoms_persist,
    budget_exceeded,
    abstain,
    episode_logged,
    learning_done,
    component_failure,
};

std::string_view to_string(Phase p);
std::string_view to_string(Event e);
std::optional<Phase> parse_phase(std::string_view s);
std::optional<Event> parse_event(std::string_view s);

struct MachineState {
    Phase phase = Phase::Idle;
    std::optional<std::string> incident;
    int attempt = 0;
    int escalation_after = 3;
    bool operator==(const MachineState&) const = default;
};

struct TransitionResult {
    bool accepted = false;
    MachineState next;
    std::string diagnostic;
};

// Pure transition table. `learning_due` only matters for episode_logged.
// Illegal pairs come back rejected with the state unchanged.
TransitionResult transition(const MachineState& state, Event event, bool learning_due = false);

struct TransitionRecord {
    std::string incident;
    Tick tick = 0;
    Phase from = Phase::Idle;
    Event event = Event::alert_raised;
    Phase to = Phase::Idle;
    int attempt = 0;         // after the transition
    bool learning_due = false;
    std::int64_t ledger_centi = 0; // compute total when the event fired
    bool over_limit = false;       // ledger was past a limit when the event fired
    std::string note;
};

nlohmann::json to_json(const TransitionRecord& r);
TransitionRecord transition_from_json(const nlohmann::json& j);
std::string format_transition(const TransitionRecord& r);

// Replays one incident's records against the table. Returns the first
// violation, or nothing when every step is legal, the loop stays within
// escalation_after, and each over-limit event is a budget_exceeded into Escalated.
std::optional<std::string> audit_transitions(const std::vector<TransitionRecord>& records, int escalation_after);

enum class Component { detector, ace, reasoner, ill, memory };
inline constexpr Component kAllComponents[] = {Component::detector, Component::ace, Component::reasoner, Component::ill,
                                               Component::memory};
std::string_view to_string(Component c);

// Compute units are kept in hundredths so that itemized sums are exact.
struct LedgerLimits {
    std::optional<std::int64_t> compute_centi;
    std::optional<int> tool_calls;
};

class BudgetLedger {
public:
    BudgetLedger() = default;
    explicit BudgetLedger(LedgerLimits limits) : limits_(limits) {}

    void charge(Component c, std::int64_t centi);
    void tool_call(int n = 1) { tool_calls_ += n; }
    void record_pack(int cost) { pack_costs_.push_back(cost); }

    std::int64_t centi(Component c) const;
    std::int64_t total_centi() const;
    double units(Component c) const { return static_cast<double>(centi(c)) / 100.0; }
    double total_units() const { return static_cast<double>(total_centi()) / 100.0; }
    int tool_calls() const { return tool_calls_; }
    const std::vector<int>& pack_costs() const { return pack_costs_; }
    const LedgerLimits& limits() const { return limits_; }
    bool exceeded() const;

    nlohmann::json to_json() const;

private:
    LedgerLimits limits_;
    std::map<Component, std::int64_t> centi_;
    int tool_calls_ = 0;
    std::vector<int> pack_costs_;
};

// Published tariffs, in hundredths of a unit.
namespace tariff {
inline constexpr std::int64_t detector_window = 100;
inline constexpr std::int64_t ace_assembly = 100;
inline constexpr std::int64_t ace_item = 10;
inline constexpr std::int64_t reasoner_unit = 100;
inline constexpr std::int64_t ill_closure = 100;
inline constexpr std::int64_t memory_item = 1;
} // namespace tariff

struct OrchestratorConfig {
    int detect_ticks = 1; // extra ticks gathered after the first alert
    int verify_ticks = 3;
    int max_idle_ticks = 200;
    std::size_t buffer_capacity = 64;
    LedgerLimits limits{200000, 64};
    DetectorParams detector;
    BudgetPolicy ace;
    IllParams ill;
    ReasonerParams reasoner = ReasonerParams::defaults();

    static OrchestratorConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Multi-service incidents become one subtask per affected service, the service
// with the largest downstream set first. Single-service incidents pass through.
std::vector<IncidentDescriptor> decompose(const IncidentDescriptor& task, const ClusterTopology& topo);

// Memory tiers and learned state. The orchestrator is its only writer.
struct Agent {
    ShortTermBuffer buffer{64};
    EpisodicStore episodic;
    KnowledgeGraph kg;
    RunbookStore runbooks;
    PolicySet policies;
    AceState ace;
    std::shared_ptr<const Reasoner> reasoner;
    std::int64_t episodes_closed = 0;
    std::int64_t since_learning = 0;
    std::int64_t learning_runs = 0;
};

struct MaintenanceRecord {
    Tick tick = 0;
    EntityId node;
    std::size_t triples_retracted = 0;
    std::size_t episodes_forgotten = 0;
    std::size_t rules_retired = 0;
};

nlohmann::json to_json(const MaintenanceRecord& m);

struct LearningSummary {
    std::size_t concepts = 0;
    std::size_t closures = 0;
    std::size_t mined = 0;
    std::size_t injected = 0;
    std::size_t retired = 0;
    std::vector<std::pair<std::string, std::string>> rejected;
};

struct EpisodeOutcome {
    Episode episode;
    std::optional<FaultScenario> ground_truth;
    bool correct = false;
    bool escalated = false;
    std::string escalation_reason;
    Diagnosis diagnosis;
    std::vector<ContextPack> packs;
    std::vector<TransitionRecord> transitions;
    BudgetLedger ledger;
    std::optional<LearningSummary> learning;
    std::size_t rules_active = 0;
    nlohmann::json log;
};

class Orchestrator {
public:
    Orchestrator(std::shared_ptr<const ClusterTopology> topo, OrchestratorConfig config, Agent agent,
                 Baselines baselines);

    // Steps the simulator in Idle until an incident opens, then drives it to
    // Logging/Learning or Escalated. Throws Error if nothing alerts within
    // max_idle_ticks.
    EpisodeOutcome run_episode(ClusterSim& sim);

    // Steps the simulator in Idle for up to `ticks`, handling maintenance
    // events. Stops early, keeping the alerts for the next episode, when an
    // incident alert appears.
    void idle(ClusterSim& sim, int ticks);

    const Agent& agent() const { return agent_; }
    Agent& agent_mut() { return agent_; }
    const OrchestratorConfig& config() const { return config_; }
    // Idle-time detector work, outside any episode.
    const BudgetLedger& run_ledger() const { return run_ledger_; }
    const std::vector<MaintenanceRecord>& maintenance() const { return maintenance_; }

    // Called after each learning run with the run's formal context.
    std::function<void(const IllReport&, std::int64_t run_index)> on_learning;

private:
    std::vector<Alert> observe_tick(ClusterSim& sim, BudgetLedger& ledger);
    void handle_decommission(const EntityId& node, Tick tick);

    std::shared_ptr<const ClusterTopology> topo_;
    OrchestratorConfig config_;
    Agent agent_;
    Baselines baselines_;
    DetectorWindow window_;
    BudgetLedger run_ledger_;
    std::vector<Alert> pending_;
    std::vector<MaintenanceRecord> maintenance_;
};

// Fresh agent: bootstrapped graph, policies and seed runbooks.
Agent make_agent(const ClusterTopology& topo, const PolicySet& policies, const std::vector<Runbook>& runbooks,
                 std::shared_ptr<const Reasoner> reasoner, std::size_t buffer_capacity = 64);

} // namespace life
