#pragma once

#include "life/core.hpp"
#include "life/rng.hpp"

#include <json.hpp>

#include <iosfwd>
#include <map>
#include <memory>
#include <set>
#include <vector>

namespace life {

enum class EntityClass { node, rack, tor_switch, pod, service };

std::string_view to_string(EntityClass c);

struct NodeInfo {
    EntityId id;
    EntityId rack;
    std::string hw_generation;
};

// Declarative topology description, usually parsed from JSON.
struct TopologySpec {
    struct Rack {
        EntityId id;
        EntityId tor; // empty => "tor_<rack>"
        std::vector<NodeInfo> nodes;
    };
    struct Pod {
        EntityId id;
        EntityId node;
        EntityId service;
    };
    struct Service {
        EntityId id;
        std::vector<EntityId> depends_on;
    };
    std::vector<Rack> racks;
    std::vector<Pod> pods;
    std::vector<Service> services;

    static TopologySpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Validated, immutable cluster layout. Dependency edges point caller -> callee.
class ClusterTopology {
public:
    static ClusterTopology build(const TopologySpec& spec);

    const std::map<EntityId, NodeInfo>& nodes() const { return nodes_; }
    const std::vector<EntityId>& racks() const { return racks_; }
    const std::map<EntityId, EntityId>& switches() const { return rack_switch_; }
    const std::map<EntityId, EntityId>& pods() const { return pod_node_; }
    const std::map<EntityId, std::set<EntityId>>& services() const { return service_pods_; }
    const std::vector<std::pair<EntityId, EntityId>>& dependencies() const { return dependencies_; }

    bool contains(const EntityId& id) const { return classes_.contains(id); }
    std::optional<EntityClass> class_of(const EntityId& id) const;

    const EntityId& service_of_pod(const EntityId& pod) const { return pod_service_.at(pod); }
    const EntityId& node_of_pod(const EntityId& pod) const { return pod_node_.at(pod); }
    const EntityId& rack_of_node(const EntityId& node) const { return nodes_.at(node).rack; }
    const EntityId& switch_of_rack(const EntityId& rack) const { return rack_switch_.at(rack); }
    EntityId rack_of_switch(const EntityId& tor) const;

    std::vector<EntityId> pods_on_node(const EntityId& node) const;
    std::vector<EntityId> pods_in_rack(const EntityId& rack) const;
    std::vector<EntityId> nodes_in_rack(const EntityId& rack) const;
    // Services with a direct dependency edge onto `service`.
    std::vector<EntityId> callers_of(const EntityId& service) const;
    // Services reachable from `service` along caller -> callee edges, excluding itself.
    std::set<EntityId> downstream_of(const EntityId& service) const;

private:
    std::map<EntityId, NodeInfo> nodes_;
    std::vector<EntityId> racks_;
    std::map<EntityId, EntityId> rack_switch_;
    std::map<EntityId, EntityId> pod_node_;
    std::map<EntityId, EntityId> pod_service_;
    std::map<EntityId, std::set<EntityId>> service_pods_;
    std::vector<std::pair<EntityId, EntityId>> dependencies_;
    std::map<EntityId, EntityClass> classes_;
};

struct FaultScenario {
    FaultKind kind = FaultKind::dns_error_burst;
    EntityId target;
    Tick start_tick = 0;
    Tick duration = 1;
    bool persistent = false;
    double magnitude = 1.0;

    // Throws Error when the scenario is malformed or its target is not a valid
    // entity of the class the fault kind acts on.
    void validate(const ClusterTopology& topo) const;

    static FaultScenario from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    bool operator==(const FaultScenario&) const = default;
};

struct SimParams {
    std::map<Metric, double> baseline{{Metric::cpu_util, 0.30},       {Metric::mem_util, 0.40},
                                      {Metric::disk_io, 0.20},        {Metric::net_latency_ms, 20.0},
                                      {Metric::packet_loss_rate, 0.001}, {Metric::pod_restarts, 0.0}};
    // Offset added at magnitude 1.0.
    std::map<Metric, double> headroom{{Metric::cpu_util, 0.70},       {Metric::mem_util, 0.60},
                                      {Metric::disk_io, 0.80},        {Metric::net_latency_ms, 200.0},
                                      {Metric::packet_loss_rate, 0.5}, {Metric::pod_restarts, 5.0}};
    // Uniform noise amplitude as a fraction of baseline (+/-).
    double noise_frac = 0.02;

    static SimParams from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct TelemetrySample {
    Tick tick = 0;
    EntityId entity;
    std::string metric;
    double value = 0.0;
};

enum class EventSource { event, alert, ticket };

struct RawEvent {
    Tick tick = 0;
    EntityId entity;
    std::string kind;
    EventSource source = EventSource::event;
    std::map<std::string, std::string> attributes;
};

struct StepOutput {
    std::vector<TelemetrySample> samples;
    std::vector<RawEvent> events;
};

struct RemediationAction {
    ActionKind kind = ActionKind::restart_pod;
    EntityId target;
};

enum class ActionEffect { cleared, no_effect, acknowledged };

std::string_view to_string(ActionEffect e);

struct ActionResult {
    ActionEffect effect = ActionEffect::no_effect;
    std::optional<FaultKind> cleared_fault;
    Tick tick = 0;
    bool success() const { return effect != ActionEffect::no_effect; }
};

struct ActiveFault {
    FaultScenario scenario;
    bool cleared = false;
    bool operator==(const ActiveFault&) const = default;
};

// Value-type simulator state. Copying it snapshots the run, RNG included.
struct SimState {
    Tick tick = 0;
    std::vector<ActiveFault> active_faults;
    std::uint64_t rng_seed = 0;
    Rng rng{0};
    std::set<EntityId> decommissioned;
    // Node decommissions whose event has already been emitted.
    std::set<EntityId> announced;
    std::map<Metric, double> baseline;

    static SimState initial(std::uint64_t seed, const SimParams& params);
    bool operator==(const SimState&) const = default;
};

// Deterministic tick-stepped cluster model.
class ClusterSim {
public:
    ClusterSim(std::shared_ptr<const ClusterTopology> topo, SimParams params, std::uint64_t seed);

    const ClusterTopology& topology() const { return *topo_; }
    const SimParams& params() const { return params_; }
    const SimState& state() const { return state_; }
    Tick tick() const { return state_.tick; }

    StepOutput step();
    void inject_fault(const FaultScenario& scenario);
    ActionResult apply_action(const RemediationAction& action);

    // Clears every transient fault still in effect; models an operator taking over
    // after the agent escalates. Returns the number cleared.
    std::size_t operator_clear();

    bool is_live(const EntityId& id) const;
    // Faults whose effect window covers the current tick and that are not cleared.
    std::vector<FaultScenario> effective_faults() const;

    // Entities whose telemetry a fault perturbs (pods, nodes).
    std::set<EntityId> blast_set(const FaultScenario& f) const;
    // Entities an action may target to clear the fault.
    std::set<EntityId> remedy_scope(const FaultScenario& f) const;

    SimState snapshot() const { return state_; }
    void restore(SimState s) { state_ = std::move(s); }

private:
    bool in_effect(const ActiveFault& f, Tick t) const;
    double offset(const EntityId& entity, Metric m, Tick t) const;

    std::shared_ptr<const ClusterTopology> topo_;
    SimParams params_;
    SimState state_;
};

// One JSON object per line: {tick, entity, metric, value} or {tick, entity, event_kind, attributes}.
void write_jsonl(std::ostream& out, const StepOutput& step);
nlohmann::json to_json(const TelemetrySample& s);
nlohmann::json to_json(const RawEvent& e);
TelemetrySample sample_from_json(const nlohmann::json& j);
RawEvent event_from_json(const nlohmann::json& j);

} // namespace life
