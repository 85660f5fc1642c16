#include "life/cluster_sim.hpp"

#include <algorithm>
#include <ostream>

namespace life {

using nlohmann::json;

std::string_view to_string(EntityClass c) {
    switch (c) {
    case EntityClass::node:
        return "Node";
    case EntityClass::rack:
        return "Rack";
    case EntityClass::tor_switch:
        return "ToRSwitch";
    case EntityClass::pod:
        return "Pod";
    case EntityClass::service:
        return "Service";
    }
    return "Unknown";
}

std::string_view to_string(ActionEffect e) {
    switch (e) {
    case ActionEffect::cleared:
        return "cleared";
    case ActionEffect::no_effect:
        return "no_effect";
    case ActionEffect::acknowledged:
        return "acknowledged";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Topology

TopologySpec TopologySpec::from_json(const json& j) {
    TopologySpec spec;
    for (const auto& r : j.at("racks")) {
        Rack rack;
        rack.id = r.at("id").get<std::string>();
        rack.tor = r.value("tor", std::string{});
        for (const auto& n : r.at("nodes"))
            rack.nodes.push_back({n.at("id").get<std::string>(), rack.id, n.value("hw", std::string{"gen1"})});
        spec.racks.push_back(std::move(rack));
    }
    for (const auto& p : j.at("pods"))
        spec.pods.push_back({p.at("id").get<std::string>(), p.at("node").get<std::string>(),
                             p.at("service").get<std::string>()});
    for (const auto& s : j.at("services"))
        spec.services.push_back(
            {s.at("id").get<std::string>(), s.value("depends_on", std::vector<std::string>{})});
    return spec;
}

json TopologySpec::to_json() const {
    json j;
    j["racks"] = json::array();
    for (const auto& r : racks) {
        json nodes = json::array();
        for (const auto& n : r.nodes)
            nodes.push_back({{"id", n.id}, {"hw", n.hw_generation}});
        json rj = {{"id", r.id}, {"nodes", nodes}};
        if (!r.tor.empty())
            rj["tor"] = r.tor;
        j["racks"].push_back(rj);
    }
    j["pods"] = json::array();
    for (const auto& p : pods)
        j["pods"].push_back({{"id", p.id}, {"node", p.node}, {"service", p.service}});
    j["services"] = json::array();
    for (const auto& s : services)
        j["services"].push_back({{"id", s.id}, {"depends_on", s.depends_on}});
    return j;
}

ClusterTopology ClusterTopology::build(const TopologySpec& spec) {
    ClusterTopology t;
    auto claim = [&](const EntityId& id, EntityClass c) {
        if (id.empty())
            throw Error("topology: empty entity id");
        if (!t.classes_.emplace(id, c).second)
            throw Error("topology: duplicate entity id '" + id + "'");
    };

    if (spec.racks.empty())
        throw Error("topology: at least one rack is required");
    for (const auto& rack : spec.racks) {
        if (rack.nodes.empty())
            throw Error("topology: rack '" + rack.id + "' has no nodes");
        claim(rack.id, EntityClass::rack);
        t.racks_.push_back(rack.id);
        EntityId tor = rack.tor.empty() ? "tor_" + rack.id : rack.tor;
        claim(tor, EntityClass::tor_switch);
        t.rack_switch_[rack.id] = tor;
        for (const auto& n : rack.nodes) {
            claim(n.id, EntityClass::node);
            t.nodes_[n.id] = {n.id, rack.id, n.hw_generation};
        }
    }
    for (const auto& s : spec.services) {
        claim(s.id, EntityClass::service);
        t.service_pods_[s.id];
    }
    for (const auto& p : spec.pods) {
        if (!t.nodes_.contains(p.node))
            throw Error("topology: pod '" + p.id + "' references unknown node '" + p.node + "'");
        if (!t.service_pods_.contains(p.service))
            throw Error("topology: pod '" + p.id + "' references unknown service '" + p.service + "'");
        claim(p.id, EntityClass::pod);
        t.pod_node_[p.id] = p.node;
        t.pod_service_[p.id] = p.service;
        t.service_pods_[p.service].insert(p.id);
    }
    bool any_populated = std::any_of(t.service_pods_.begin(), t.service_pods_.end(),
                                     [](const auto& kv) { return !kv.second.empty(); });
    if (!any_populated)
        throw Error("topology: at least one service with a pod is required");
    for (const auto& s : spec.services) {
        for (const auto& callee : s.depends_on) {
            if (callee == s.id)
                throw Error("topology: service '" + s.id + "' depends on itself");
            if (!t.service_pods_.contains(callee))
                throw Error("topology: service '" + s.id + "' depends on unknown service '" + callee + "'");
            std::pair<EntityId, EntityId> edge{s.id, callee};
            if (std::find(t.dependencies_.begin(), t.dependencies_.end(), edge) == t.dependencies_.end())
                t.dependencies_.push_back(std::move(edge));
        }
    }
    return t;
}

std::optional<EntityClass> ClusterTopology::class_of(const EntityId& id) const {
    auto it = classes_.find(id);
    if (it == classes_.end())
        return std::nullopt;
    return it->second;
}

EntityId ClusterTopology::rack_of_switch(const EntityId& tor) const {
    for (const auto& [rack, sw] : rack_switch_)
        if (sw == tor)
            return rack;
    throw Error("topology: unknown switch '" + tor + "'");
}

std::vector<EntityId> ClusterTopology::pods_on_node(const EntityId& node) const {
    std::vector<EntityId> out;
    for (const auto& [pod, n] : pod_node_)
        if (n == node)
            out.push_back(pod);
    return out;
}

std::vector<EntityId> ClusterTopology::nodes_in_rack(const EntityId& rack) const {
    std::vector<EntityId> out;
    for (const auto& [id, info] : nodes_)
        if (info.rack == rack)
            out.push_back(id);
    return out;
}

std::vector<EntityId> ClusterTopology::pods_in_rack(const EntityId& rack) const {
    std::vector<EntityId> out;
    for (const auto& [pod, n] : pod_node_)
        if (nodes_.at(n).rack == rack)
            out.push_back(pod);
    return out;
}

std::vector<EntityId> ClusterTopology::callers_of(const EntityId& service) const {
    std::vector<EntityId> out;
    for (const auto& [caller, callee] : dependencies_)
        if (callee == service)
            out.push_back(caller);
    std::sort(out.begin(), out.end());
    return out;
}

std::set<EntityId> ClusterTopology::downstream_of(const EntityId& service) const {
    std::set<EntityId> seen;
    std::vector<EntityId> frontier{service};
    while (!frontier.empty()) {
        EntityId cur = frontier.back();
        frontier.pop_back();
        for (const auto& [caller, callee] : dependencies_)
            if (caller == cur && callee != service && seen.insert(callee).second)
                frontier.push_back(callee);
    }
    return seen;
}

// ---------------------------------------------------------------------------
// Scenarios and params

namespace {

EntityClass target_class(FaultKind k) {
    switch (k) {
    case FaultKind::dns_error_burst:
    case FaultKind::ingress_throttle:
        return EntityClass::service;
    case FaultKind::tor_packet_loss:
        return EntityClass::tor_switch;
    case FaultKind::noisy_neighbor:
    case FaultKind::node_decommission:
        return EntityClass::node;
    }
    return EntityClass::node;
}

constexpr Metric kNodeMetrics[] = {Metric::cpu_util, Metric::mem_util, Metric::disk_io};

} // namespace

void FaultScenario::validate(const ClusterTopology& topo) const {
    if (start_tick < 0)
        throw Error("fault: start_tick must be >= 0");
    if (!persistent && duration < 1)
        throw Error("fault: duration must be >= 1 unless persistent");
    if (!(magnitude > 0.0 && magnitude <= 1.0))
        throw Error("fault: magnitude must lie in (0, 1]");
    auto cls = topo.class_of(target);
    if (!cls)
        throw Error("fault: unknown target entity '" + target + "'");
    if (*cls != target_class(kind))
        throw Error("fault: " + std::string(to_string(kind)) + " cannot target " + std::string(to_string(*cls)) +
                    " '" + target + "'");
}

FaultScenario FaultScenario::from_json(const json& j) {
    FaultScenario f;
    auto kind = parse_fault_kind(j.at("kind").get<std::string>());
    if (!kind)
        throw Error("fault: unknown kind '" + j.at("kind").get<std::string>() + "'");
    f.kind = *kind;
    f.target = j.at("target").get<std::string>();
    f.start_tick = j.value("start_tick", Tick{0});
    f.duration = j.value("duration", Tick{1});
    f.magnitude = j.value("magnitude", 1.0);
    f.persistent = j.value("persistent", f.kind == FaultKind::node_decommission);
    return f;
}

json FaultScenario::to_json() const {
    return {{"kind", to_string(kind)}, {"target", target},         {"start_tick", start_tick},
            {"duration", duration},    {"persistent", persistent}, {"magnitude", magnitude}};
}

SimParams SimParams::from_json(const json& j) {
    SimParams p;
    auto read_map = [](const json& src, std::map<Metric, double>& dst) {
        for (const auto& [name, v] : src.items()) {
            auto m = parse_metric(name);
            if (!m)
                throw Error("sim params: unknown metric '" + name + "'");
            dst[*m] = v.get<double>();
        }
    };
    if (j.contains("baseline"))
        read_map(j.at("baseline"), p.baseline);
    if (j.contains("headroom"))
        read_map(j.at("headroom"), p.headroom);
    p.noise_frac = j.value("noise_frac", p.noise_frac);
    if (p.noise_frac < 0.0)
        throw Error("sim params: noise_frac must be >= 0");
    return p;
}

json SimParams::to_json() const {
    json b, h;
    for (const auto& [m, v] : baseline)
        b[std::string(life::to_string(m))] = v;
    for (const auto& [m, v] : headroom)
        h[std::string(life::to_string(m))] = v;
    return {{"baseline", b}, {"headroom", h}, {"noise_frac", noise_frac}};
}

SimState SimState::initial(std::uint64_t seed, const SimParams& params) {
    SimState s;
    s.rng_seed = seed;
    s.rng = Rng(seed);
    s.baseline = params.baseline;
    return s;
}

// ---------------------------------------------------------------------------
// Simulator

ClusterSim::ClusterSim(std::shared_ptr<const ClusterTopology> topo, SimParams params, std::uint64_t seed)
    : topo_(std::move(topo)), params_(std::move(params)), state_(SimState::initial(seed, params_)) {}

bool ClusterSim::is_live(const EntityId& id) const {
    auto cls = topo_->class_of(id);
    if (!cls)
        return false;
    if (*cls == EntityClass::node)
        return !state_.decommissioned.contains(id);
    if (*cls == EntityClass::pod)
        return !state_.decommissioned.contains(topo_->node_of_pod(id));
    return true;
}

bool ClusterSim::in_effect(const ActiveFault& f, Tick t) const {
    const auto& s = f.scenario;
    if (f.cleared || s.kind == FaultKind::node_decommission)
        return false;
    return s.start_tick <= t && (s.persistent || t < s.start_tick + s.duration);
}

std::vector<FaultScenario> ClusterSim::effective_faults() const {
    std::vector<FaultScenario> out;
    for (const auto& f : state_.active_faults)
        if (in_effect(f, state_.tick))
            out.push_back(f.scenario);
    return out;
}

std::set<EntityId> ClusterSim::blast_set(const FaultScenario& f) const {
    std::set<EntityId> out;
    auto add_pods = [&](const std::vector<EntityId>& pods) { out.insert(pods.begin(), pods.end()); };
    switch (f.kind) {
    case FaultKind::dns_error_burst:
        for (const auto& caller : topo_->callers_of(f.target))
            add_pods({topo_->services().at(caller).begin(), topo_->services().at(caller).end()});
        break;
    case FaultKind::tor_packet_loss:
        add_pods(topo_->pods_in_rack(topo_->rack_of_switch(f.target)));
        break;
    case FaultKind::ingress_throttle:
        add_pods({topo_->services().at(f.target).begin(), topo_->services().at(f.target).end()});
        break;
    case FaultKind::noisy_neighbor:
    case FaultKind::node_decommission:
        out.insert(f.target);
        add_pods(topo_->pods_on_node(f.target));
        break;
    }
    return out;
}

std::set<EntityId> ClusterSim::remedy_scope(const FaultScenario& f) const {
    std::set<EntityId> scope = blast_set(f);
    scope.insert(f.target);
    for (const auto& e : blast_set(f)) {
        if (topo_->class_of(e) == EntityClass::pod) {
            scope.insert(topo_->service_of_pod(e));
            scope.insert(topo_->node_of_pod(e));
        }
    }
    return scope;
}

double ClusterSim::offset(const EntityId& entity, Metric m, Tick t) const {
    double total = 0.0;
    for (const auto& af : state_.active_faults) {
        if (!in_effect(af, t))
            continue;
        const auto& f = af.scenario;
        bool hit = false;
        switch (f.kind) {
        case FaultKind::dns_error_burst:
        case FaultKind::ingress_throttle:
            hit = m == Metric::net_latency_ms;
            break;
        case FaultKind::tor_packet_loss:
            hit = m == Metric::packet_loss_rate || m == Metric::net_latency_ms;
            break;
        case FaultKind::noisy_neighbor:
            hit = m == Metric::cpu_util || m == Metric::disk_io;
            break;
        case FaultKind::node_decommission:
            break;
        }
        if (hit && blast_set(f).contains(entity))
            total += f.magnitude * params_.headroom.at(m);
    }
    return total;
}

StepOutput ClusterSim::step() {
    StepOutput out;
    const Tick t = state_.tick;

    for (const auto& af : state_.active_faults) {
        const auto& f = af.scenario;
        if (f.kind == FaultKind::node_decommission && f.start_tick <= t && !state_.announced.contains(f.target)) {
            state_.decommissioned.insert(f.target);
            state_.announced.insert(f.target);
            out.events.push_back({t, f.target, "node_decommissioned", EventSource::event, {}});
        }
    }

    auto emit = [&](const EntityId& entity, Metric m) {
        const double base = state_.baseline.at(m);
        const double noise = state_.rng.uniform(-1.0, 1.0) * params_.noise_frac * base;
        out.samples.push_back({t, entity, std::string(to_string(m)), base + offset(entity, m, t) + noise});
    };
    for (const auto& [node, info] : topo_->nodes()) {
        if (!is_live(node))
            continue;
        for (Metric m : kNodeMetrics)
            emit(node, m);
    }
    for (const auto& [pod, node] : topo_->pods()) {
        if (!is_live(pod))
            continue;
        for (Metric m : kAllMetrics)
            emit(pod, m);
    }

    for (const auto& af : state_.active_faults) {
        if (!in_effect(af, t) || af.scenario.kind != FaultKind::dns_error_burst)
            continue;
        for (const auto& e : blast_set(af.scenario))
            if (is_live(e))
                out.events.push_back({t, e, "dns_error", EventSource::event, {{"resolver", af.scenario.target}}});
    }

    ++state_.tick;
    return out;
}

void ClusterSim::inject_fault(const FaultScenario& scenario) {
    scenario.validate(*topo_);
    if (!is_live(scenario.target))
        throw Error("fault: target '" + scenario.target + "' is decommissioned");
    FaultScenario f = scenario;
    if (f.kind == FaultKind::node_decommission)
        f.persistent = true;
    state_.active_faults.push_back({std::move(f), false});
}

ActionResult ClusterSim::apply_action(const RemediationAction& action) {
    if (!topo_->contains(action.target))
        throw Error("action: unknown target '" + action.target + "'");
    if (!is_live(action.target))
        throw Error("action: target '" + action.target + "' is decommissioned");

    ActionResult result;
    result.tick = state_.tick;
    for (auto& af : state_.active_faults) {
        if (!in_effect(af, state_.tick) || remedy_for(af.scenario.kind) != action.kind)
            continue;
        if (!remedy_scope(af.scenario).contains(action.target))
            continue;
        af.cleared = true;
        if (!result.cleared_fault) {
            result.effect = ActionEffect::cleared;
            result.cleared_fault = af.scenario.kind;
        }
    }
    if (result.effect == ActionEffect::no_effect && action.kind == ActionKind::drain_node &&
        topo_->class_of(action.target) == EntityClass::node)
        result.effect = ActionEffect::acknowledged;
    return result;
}

std::size_t ClusterSim::operator_clear() {
    std::size_t n = 0;
    for (auto& af : state_.active_faults) {
        if (in_effect(af, state_.tick)) {
            af.cleared = true;
            ++n;
        }
    }
    return n;
}

// ---------------------------------------------------------------------------
// JSONL

json to_json(const TelemetrySample& s) {
    return {{"tick", s.tick}, {"entity", s.entity}, {"metric", s.metric}, {"value", s.value}};
}

json to_json(const RawEvent& e) {
    json j = {{"tick", e.tick}, {"entity", e.entity}, {"event_kind", e.kind}, {"attributes", e.attributes}};
    if (e.source != EventSource::event)
        j["source"] = e.source == EventSource::alert ? "alert" : "ticket";
    return j;
}

TelemetrySample sample_from_json(const json& j) {
    return {j.at("tick").get<Tick>(), j.at("entity").get<std::string>(), j.at("metric").get<std::string>(),
            j.at("value").get<double>()};
}

RawEvent event_from_json(const json& j) {
    RawEvent e;
    e.tick = j.at("tick").get<Tick>();
    e.entity = j.at("entity").get<std::string>();
    e.kind = j.at("event_kind").get<std::string>();
    e.attributes = j.value("attributes", std::map<std::string, std::string>{});
    std::string src = j.value("source", std::string{"event"});
    if (src == "alert")
        e.source = EventSource::alert;
    else if (src == "ticket")
        e.source = EventSource::ticket;
    else if (src != "event")
        throw Error("event: unknown source '" + src + "'");
    return e;
}

void write_jsonl(std::ostream& out, const StepOutput& step) {
    for (const auto& s : step.samples)
        out << to_json(s).dump() << '\n';
    for (const auto& e : step.events)
        out << to_json(e).dump() << '\n';
}

} // namespace life
