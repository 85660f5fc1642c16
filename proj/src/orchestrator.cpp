#include "life/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace life {

using nlohmann::json;

namespace {

constexpr std::pair<Phase, std::string_view> kPhaseNames[] = {
    {Phase::Idle, "Idle"},           {Phase::Detecting, "Detecting"}, {Phase::Enriching, "Enriching"},
    {Phase::Diagnosing, "Diagnosing"}, {Phase::Selecting, "Selecting"}, {Phase::Executing, "Executing"},
    {Phase::Verifying, "Verifying"}, {Phase::Logging, "Logging"},     {Phase::Learning, "Learning"},
    {Phase::Escalated, "Escalated"}};

constexpr std::pair<Event, std::string_view> kEventNames[] = {
    {Event::alert_raised, "alert_raised"},         {Event::pack_ready, "pack_ready"},
    {Event::hypotheses_ready, "hypotheses_ready"}, {Event::plan_ready, "plan_ready"},
    {Event::action_done, "action_done"},           {Event::symptoms_clear, "symptoms_clear"},
    {Event::symptoms_persist, "symptoms_persist"}, {Event::budget_exceeded, "budget_exceeded"},
    {Event::abstain, "abstain"},                   {Event::episode_logged, "episode_logged"},
    {Event::learning_done, "learning_done"},       {Event::component_failure, "component_failure"}};

} // namespace

std::string_view to_string(Phase p) {
    for (const auto& [k, v] : kPhaseNames)
        if (k == p)
            return v;
    return "?";
}

std::string_view to_string(Event e) {
    for (const auto& [k, v] : kEventNames)
        if (k == e)
            return v;
    return "?";
}

std::optional<Phase> parse_phase(std::string_view s) {
    for (const auto& [k, v] : kPhaseNames)
        if (v == s)
            return k;
    return std::nullopt;
}

std::optional<Event> parse_event(std::string_view s) {
    for (const auto& [k, v] : kEventNames)
        if (v == s)
            return k;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Transition table

TransitionResult transition(const MachineState& s, Event e, bool learning_due) {
    TransitionResult r{true, s, {}};
    auto go = [&](Phase p) {
        r.next.phase = p;
        return r;
    };
    const Phase p = s.phase;

    if (p == Phase::Escalated)
        return {false, s, "Escalated is terminal for the incident"};
    if (e == Event::budget_exceeded || e == Event::component_failure)
        return go(Phase::Escalated);

    switch (p) {
    case Phase::Idle:
        if (e == Event::alert_raised)
            return go(Phase::Detecting);
        break;
    case Phase::Detecting:
        if (e == Event::alert_raised)
            return go(Phase::Enriching);
        break;
    case Phase::Enriching:
        if (e == Event::pack_ready)
            return go(Phase::Diagnosing);
        break;
    case Phase::Diagnosing:
        if (e == Event::hypotheses_ready) {
            r.next.attempt = 1;
            return go(Phase::Selecting);
        }
        if (e == Event::abstain)
            return go(Phase::Escalated);
        break;
    case Phase::Selecting:
        if (e == Event::plan_ready)
            return go(Phase::Executing);
        break;
    case Phase::Executing:
        if (e == Event::action_done)
            return go(Phase::Verifying);
        break;
    case Phase::Verifying:
        if (e == Event::symptoms_clear)
            return go(Phase::Logging);
        if (e == Event::symptoms_persist) {
            if (s.attempt >= s.escalation_after)
                return go(Phase::Escalated);
            r.next.attempt = s.attempt + 1;
            return go(Phase::Selecting);
        }
        break;
    case Phase::Logging:
        if (e == Event::episode_logged)
            return go(learning_due ? Phase::Learning : Phase::Idle);
        break;
    case Phase::Learning:
        if (e == Event::learning_done)
            return go(Phase::Idle);
        break;
    case Phase::Escalated:
        break;
    }
    return {false, s, "illegal event " + std::string(to_string(e)) + " in phase " + std::string(to_string(p))};
}

json to_json(const TransitionRecord& r) {
    return {{"incident", r.incident},
            {"tick", r.tick},
            {"from", to_string(r.from)},
            {"event", to_string(r.event)},
            {"to", to_string(r.to)},
            {"attempt", r.attempt},
            {"learning_due", r.learning_due},
            {"ledger_centi", r.ledger_centi},
            {"over_limit", r.over_limit},
            {"note", r.note}};
}

TransitionRecord transition_from_json(const json& j) {
    TransitionRecord r;
    r.incident = j.at("incident").get<std::string>();
    r.tick = j.at("tick").get<Tick>();
    auto from = parse_phase(j.at("from").get<std::string>());
    auto to = parse_phase(j.at("to").get<std::string>());
    auto ev = parse_event(j.at("event").get<std::string>());
    if (!from || !to || !ev)
        throw Error("transition record: unknown phase or event");
    r.from = *from;
    r.to = *to;
    r.event = *ev;
    r.attempt = j.at("attempt").get<int>();
    r.learning_due = j.value("learning_due", false);
    r.ledger_centi = j.value("ledger_centi", std::int64_t{0});
    r.over_limit = j.value("over_limit", false);
    r.note = j.value("note", std::string());
    return r;
}

std::string format_transition(const TransitionRecord& r) {
    std::ostringstream out;
    out << r.incident << '\t' << r.tick << '\t' << to_string(r.from) << '\t' << to_string(r.event) << '\t'
        << to_string(r.to) << "\tattempt=" << r.attempt;
    if (!r.note.empty())
        out << '\t' << r.note;
    return out.str();
}

std::optional<std::string> audit_transitions(const std::vector<TransitionRecord>& records, int escalation_after) {
    MachineState s;
    s.escalation_after = escalation_after;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        auto where = [&] { return r.incident + " #" + std::to_string(i) + ": "; };
        if (r.from != s.phase)
            return where() + "starts in " + std::string(to_string(r.from)) + " but machine is in " +
                   std::string(to_string(s.phase));
        if (r.over_limit && (r.event != Event::budget_exceeded || r.to != Phase::Escalated))
            return where() + "ledger over limit but event was " + std::string(to_string(r.event));
        auto t = transition(s, r.event, r.learning_due);
        if (!t.accepted)
            return where() + t.diagnostic;
        if (t.next.phase != r.to || t.next.attempt != r.attempt)
            return where() + "table gives " + std::string(to_string(t.next.phase)) + "/attempt " +
                   std::to_string(t.next.attempt) + ", log has " + std::string(to_string(r.to)) + "/attempt " +
                   std::to_string(r.attempt);
        if (t.next.attempt > escalation_after)
            return where() + "attempt exceeds escalation_after";
        s = t.next;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Ledger

std::string_view to_string(Component c) {
    switch (c) {
    case Component::detector: return "detector";
    case Component::ace: return "ace";
    case Component::reasoner: return "reasoner";
    case Component::ill: return "ill";
    case Component::memory: return "memory";
    }
    return "?";
}

void BudgetLedger::charge(Component c, std::int64_t centi) {
    if (centi < 0)
        throw Error("ledger: negative charge");
    centi_[c] += centi;
}

std::int64_t BudgetLedger::centi(Component c) const {
    auto it = centi_.find(c);
    return it == centi_.end() ? 0 : it->second;
}

std::int64_t BudgetLedger::total_centi() const {
    std::int64_t t = 0;
    for (const auto& [c, v] : centi_)
        t += v;
    return t;
}

bool BudgetLedger::exceeded() const {
    return (limits_.compute_centi && total_centi() > *limits_.compute_centi) ||
           (limits_.tool_calls && tool_calls_ > *limits_.tool_calls);
}

json BudgetLedger::to_json() const {
    json units = json::object();
    for (Component c : kAllComponents)
        units[std::string(to_string(c))] = this->units(c);
    json lim = json::object();
    lim["compute_units"] = limits_.compute_centi ? json(static_cast<double>(*limits_.compute_centi) / 100.0) : json(nullptr);
    lim["tool_calls"] = limits_.tool_calls ? json(*limits_.tool_calls) : json(nullptr);
    return {{"compute_units", units},
            {"total_compute_units", total_units()},
            {"tool_calls", tool_calls_},
            {"pack_costs", pack_costs_},
            {"limits", lim}};
}

// ---------------------------------------------------------------------------
// Config

OrchestratorConfig OrchestratorConfig::from_json(const json& j) {
    OrchestratorConfig c;
    c.detect_ticks = j.value("detect_ticks", c.detect_ticks);
    c.verify_ticks = j.value("verify_ticks", c.verify_ticks);
    c.max_idle_ticks = j.value("max_idle_ticks", c.max_idle_ticks);
    c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
    if (j.contains("limits")) {
        const auto& l = j.at("limits");
        if (l.contains("compute_units"))
            c.limits.compute_centi = l.at("compute_units").is_null()
                                         ? std::nullopt
                                         : std::optional<std::int64_t>(std::llround(l.at("compute_units").get<double>() * 100.0));
        if (l.contains("tool_calls"))
            c.limits.tool_calls = l.at("tool_calls").is_null() ? std::nullopt : std::optional<int>(l.at("tool_calls").get<int>());
    }
    if (j.contains("detector"))
        c.detector = DetectorParams::from_json(j.at("detector"));
    if (j.contains("ace"))
        c.ace = BudgetPolicy::from_json(j.at("ace"));
    if (j.contains("ill"))
        c.ill = IllParams::from_json(j.at("ill"));
    if (j.contains("reasoner"))
        c.reasoner = ReasonerParams::from_json(j.at("reasoner"));
    if (c.detect_ticks < 0 || c.verify_ticks < 1 || c.max_idle_ticks < 1 || c.buffer_capacity < 1)
        throw Error("orchestrator: detect_ticks >= 0, verify_ticks >= 1, max_idle_ticks >= 1 and buffer_capacity >= 1");
    return c;
}

json OrchestratorConfig::to_json() const {
    json lim = json::object();
    lim["compute_units"] = limits.compute_centi ? json(static_cast<double>(*limits.compute_centi) / 100.0) : json(nullptr);
    lim["tool_calls"] = limits.tool_calls ? json(*limits.tool_calls) : json(nullptr);
    return {{"detect_ticks", detect_ticks}, {"verify_ticks", verify_ticks}, {"max_idle_ticks", max_idle_ticks},
            {"buffer_capacity", buffer_capacity}, {"limits", lim},  {"detector", detector.to_json()},
            {"ace", ace.to_json()},           {"ill", ill.to_json()},
            {"reasoner", {{"decay", reasoner.decay}, {"rule_boost", reasoner.rule_boost},
                          {"escalation_after", reasoner.escalation_after}}}};
}

// ---------------------------------------------------------------------------
// Decomposition

namespace {

// Pod (or, failing that, any entity) with the largest summed alert severity.
EntityId focus_entity(const std::vector<Alert>& alerts, const ClusterTopology& topo,
                      const std::optional<EntityId>& service = std::nullopt) {
    std::map<EntityId, int> pod_sev, any_sev;
    for (const auto& a : alerts) {
        any_sev[a.entity] += a.severity;
        if (topo.class_of(a.entity) == EntityClass::pod &&
            (!service || topo.service_of_pod(a.entity) == *service))
            pod_sev[a.entity] += a.severity;
    }
    const auto& pick = pod_sev.empty() ? any_sev : pod_sev;
    EntityId best;
    int best_sev = -1;
    for (const auto& [e, sev] : pick) // map order gives the lexicographic tie-break
        if (sev > best_sev) {
            best = e;
            best_sev = sev;
        }
    return best;
}

EntityId service_for(const EntityId& e, const ClusterTopology& topo) {
    if (topo.class_of(e) == EntityClass::pod)
        return topo.service_of_pod(e);
    if (topo.class_of(e) == EntityClass::service)
        return e;
    return {};
}

} // namespace

std::vector<IncidentDescriptor> decompose(const IncidentDescriptor& task, const ClusterTopology& topo) {
    if (task.affected_entity.empty())
        throw Error("decompose: descriptor names no affected entity");
    std::set<EntityId> services;
    for (const auto& a : task.alerts)
        if (topo.class_of(a.entity) == EntityClass::pod)
            services.insert(topo.service_of_pod(a.entity));
    if (services.size() <= 1)
        return {task};

    std::vector<std::pair<std::size_t, EntityId>> order;
    for (const auto& s : services)
        order.emplace_back(topo.downstream_of(s).size(), s);
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first)
            return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<IncidentDescriptor> out;
    for (const auto& [size, svc] : order) {
        IncidentDescriptor d = task;
        d.affected_service = svc;
        d.affected_entity = focus_entity(task.alerts, topo, svc);
        out.push_back(std::move(d));
    }
    return out;
}

json to_json(const MaintenanceRecord& m) {
    return {{"tick", m.tick},
            {"node", m.node},
            {"triples_retracted", m.triples_retracted},
            {"episodes_forgotten", m.episodes_forgotten},
            {"rules_retired", m.rules_retired}};
}

Agent make_agent(const ClusterTopology& topo, const PolicySet& policies, const std::vector<Runbook>& runbooks,
                 std::shared_ptr<const Reasoner> reasoner, std::size_t buffer_capacity) {
    Agent a{ShortTermBuffer(buffer_capacity), EpisodicStore(), bootstrap_kg(topo, policies), RunbookStore(), policies,
            AceState(), std::move(reasoner)};
    for (const auto& rb : runbooks)
        a.runbooks.add(rb);
    if (!a.reasoner)
        a.reasoner = std::make_shared<GraphReasoner>();
    return a;
}

// ---------------------------------------------------------------------------
// Orchestrator

Orchestrator::Orchestrator(std::shared_ptr<const ClusterTopology> topo, OrchestratorConfig config, Agent agent,
                           Baselines baselines)
    : topo_(std::move(topo)), config_(std::move(config)), agent_(std::move(agent)), baselines_(std::move(baselines)),
      window_(config_.detector.window) {
    config_.ace.validate();
    if (!agent_.reasoner)
        throw Error("orchestrator: no reasoner");
}

std::vector<Alert> Orchestrator::observe_tick(ClusterSim& sim, BudgetLedger& ledger) {
    StepOutput out = sim.step();
    std::vector<UnifiedRecord> recs;
    recs.reserve(out.samples.size() + out.events.size());
    for (const auto& s : out.samples)
        recs.push_back(normalize(s));
    for (const auto& e : out.events)
        recs.push_back(normalize(e));
    window_.push_tick(std::move(recs));
    auto flat = window_.flatten();
    auto alerts = detect_anomalies(flat, baselines_, config_.detector);
    ledger.charge(Component::detector, tariff::detector_window);

    std::vector<Alert> incident;
    for (auto& a : alerts) {
        if (a.attribute == "node_decommissioned")
            handle_decommission(a.entity, a.tick);
        else
            incident.push_back(std::move(a));
    }
    return incident;
}

void Orchestrator::handle_decommission(const EntityId& node, Tick tick) {
    if (agent_.kg.is_decommissioned(node))
        return;
    MaintenanceRecord m;
    m.tick = tick;
    m.node = node;
    auto res = agent_.kg.assert_triple({node, "decommissioned", "true", true, Provenance::operator_input, tick});
    if (!res)
        throw Error("decommission: " + res.reason);
    std::set<EntityId> gone{node};
    m.triples_retracted += agent_.kg.retract({node, std::string("member_of"), std::nullopt});
    for (const auto& pod : topo_->pods_on_node(node)) {
        gone.insert(pod);
        m.triples_retracted += agent_.kg.retract({pod, std::nullopt, std::nullopt});
    }
    ForgetCriteria fc;
    fc.entities = gone;
    fc.now = tick;
    m.episodes_forgotten = agent_.episodic.forget(fc);
    RetireCriteria rc{true, config_.ill.confidence_floor, config_.ill.max_unconfirmed_episodes, agent_.episodes_closed};
    m.rules_retired = retire_rules(agent_.kg, rc, agent_.episodic);
    maintenance_.push_back(m);
}

void Orchestrator::idle(ClusterSim& sim, int ticks) {
    for (int i = 0; i < ticks && pending_.empty(); ++i)
        pending_ = observe_tick(sim, run_ledger_);
}

namespace {

// Merges alerts per (entity, attribute), keeping the strongest.
void merge_alerts(std::map<std::pair<EntityId, std::string>, Alert>& into, const std::vector<Alert>& alerts) {
    for (const auto& a : alerts) {
        auto key = std::make_pair(a.entity, a.attribute);
        auto it = into.find(key);
        if (it == into.end() || a.severity > it->second.severity)
            into[key] = a;
    }
}

json alert_payload(const Alert& a) {
    return {{"tick", a.tick}, {"entity", a.entity}, {"attribute", a.attribute}, {"severity", a.severity},
            {"evidence_count", a.evidence.size()}};
}

std::optional<Metric> metric_of_anomaly(const std::string& attribute, const Vocabulary& vocab) {
    for (Metric m : kAllMetrics)
        if (vocab.anomaly_for(m) == attribute)
            return m;
    return std::nullopt;
}

struct ComponentFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unwinds the phase loop once the machine has reached Escalated.
struct Stop {};

// Runs `f`, retrying once. A second failure becomes a ComponentFailure.
template <class F>
auto with_retry(const char* what, std::vector<std::string>& notes, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const std::exception& first) {
        notes.push_back(std::string(what) + " failed, retrying: " + first.what());
        try {
            return f();
        } catch (const std::exception& second) {
            throw ComponentFailure(std::string(what) + ": " + second.what());
        }
    }
}

} // namespace

EpisodeOutcome Orchestrator::run_episode(ClusterSim& sim) {
    const auto& vocab = Vocabulary::standard();
    EpisodeOutcome out;
    out.ledger = BudgetLedger(config_.limits);
    BudgetLedger& ledger = out.ledger;
    std::vector<std::string> notes;

    // Idle: wait for an incident.
    std::vector<Alert> first = std::move(pending_);
    pending_.clear();
    for (int i = 0; first.empty() && i < config_.max_idle_ticks; ++i)
        first = observe_tick(sim, run_ledger_);
    if (first.empty())
        throw Error("no incident within " + std::to_string(config_.max_idle_ticks) + " idle ticks");

    const std::int64_t seq = agent_.episodes_closed + 1;
    std::string id = "ep-";
    {
        std::string n = std::to_string(seq);
        id += std::string(n.size() < 4 ? 4 - n.size() : 0, '0') + n;
    }
    MachineState ms;
    ms.escalation_after = config_.reasoner.escalation_after;
    ms.incident = id;

    auto fire = [&](Event e, std::string note = {}, bool learning_due = false) {
        if (ledger.exceeded() && e != Event::budget_exceeded)
            throw Error("orchestrator: ledger over limit at " + std::string(to_string(e)));
        auto t = transition(ms, e, learning_due);
        if (!t.accepted)
            throw Error("orchestrator: " + t.diagnostic);
        out.transitions.push_back({id, sim.tick(), ms.phase, e, t.next.phase, t.next.attempt, learning_due,
                                   ledger.total_centi(), ledger.exceeded(), std::move(note)});
        ms = t.next;
    };
    // True when the ledger forced escalation.
    auto over_budget = [&] {
        if (!ledger.exceeded())
            return false;
        fire(Event::budget_exceeded, "compute " + std::to_string(ledger.total_centi()) + " centi-units, " +
                                         std::to_string(ledger.tool_calls()) + " tool calls");
        out.escalated = true;
        out.escalation_reason = "budget_exceeded";
        return true;
    };

    for (const auto& f : sim.effective_faults())
        if (f.kind != FaultKind::node_decommission) {
            out.ground_truth = f;
            break;
        }

    std::map<std::pair<EntityId, std::string>, Alert> merged;
    merge_alerts(merged, first);
    const Tick start_tick = first.front().tick;
    fire(Event::alert_raised, std::to_string(first.size()) + " alerts");
    // The episode ledger opens with the window that raised the alert.
    ledger.charge(Component::detector, tariff::detector_window);

    IncidentDescriptor task;
    std::vector<IncidentDescriptor> subtasks;
    ContextPack pack;
    ActionPlan plan;
    bool resolved = false;
    std::vector<ActionRecord> actions;
    std::optional<FaultKind> cleared_kind;
    json attempts = json::array();
    json plan_json = nullptr;

    auto cited_sections = [&]() {
        std::set<SectionKind> cited;
        if (!out.diagnosis.hypotheses.empty())
            for (const auto& ref : out.diagnosis.hypotheses.front().evidence)
                if (auto k = pack.find(ref))
                    cited.insert(*k);
        return cited;
    };

    try {
        // Detecting
        for (int i = 0; i < config_.detect_ticks; ++i)
            merge_alerts(merged, observe_tick(sim, ledger));
        if (over_budget())
            throw Stop{};
        fire(Event::alert_raised, "detect window closed");

        // Enriching
        task.incident = id;
        task.tick = sim.tick();
        for (const auto& [key, a] : merged) {
            task.alerts.push_back(a);
            task.symptoms.insert(a.attribute);
            task.max_severity = std::max(task.max_severity, a.severity);
        }
        task.affected_entity = focus_entity(task.alerts, *topo_);
        task.affected_service = service_for(task.affected_entity, *topo_);
        subtasks = decompose(task, *topo_);
        const IncidentDescriptor& lead = subtasks.front();

        agent_.buffer.set_current_incident(id);
        for (const auto& a : task.alerts) {
            agent_.buffer.push({"alert:" + a.entity + ":" + a.attribute, id, alert_payload(a)},
                               std::clamp(a.severity, 0, 3));
            ledger.charge(Component::memory, tariff::memory_item);
        }

        MemoryView mem{&agent_.buffer, &agent_.episodic, &agent_.kg, &agent_.runbooks, &agent_.policies};
        GatherStats gs;
        pack = with_retry("ace", notes, [&] {
            gs = {};
            return assemble(lead, mem, config_.ace, agent_.ace, &gs);
        });
        out.packs.push_back(pack);
        std::size_t included = 0;
        for (const auto& s : pack.sections)
            included += s.items.size();
        ledger.charge(Component::ace, tariff::ace_assembly + tariff::ace_item * static_cast<std::int64_t>(included));
        ledger.charge(Component::memory, tariff::memory_item * static_cast<std::int64_t>(gs.items_touched));
        ledger.tool_call(static_cast<int>(gs.queries));
        ledger.record_pack(pack.total_cost);
        if (over_budget())
            throw Stop{};
        fire(Event::pack_ready, "cost " + std::to_string(pack.total_cost) + "/" + std::to_string(pack.budget));

        // Diagnosing
        out.diagnosis = with_retry("reasoner", notes, [&] { return agent_.reasoner->diagnose(pack); });
        ledger.charge(Component::reasoner, tariff::reasoner_unit * out.diagnosis.compute_units);
        if (over_budget())
            throw Stop{};
        if (out.diagnosis.abstained()) {
            fire(Event::abstain, "no hypothesis");
            out.escalated = true;
            out.escalation_reason = "abstain";
            throw Stop{};
        }
        fire(Event::hypotheses_ready, std::string(to_string(out.diagnosis.hypotheses.front().fault_kind)) + "@" +
                                          out.diagnosis.hypotheses.front().suspect_entity +
                                          (out.diagnosis.shortcut ? " via rule" : " via propagation"));

        std::vector<Runbook> suggestions;
        for (const auto& it : pack.section(SectionKind::runbooks).items)
            suggestions.push_back(Runbook::from_json(it.payload));
        plan = with_retry("planner", notes, [&] {
            return agent_.reasoner->plan(out.diagnosis.hypotheses, suggestions, agent_.runbooks, agent_.policies,
                                         task.symptoms);
        });
        plan_json = to_json(plan);

        // Selecting -> Executing -> Verifying, at most escalation_after times.
        while (true) {
            const int attempt = ms.attempt;
            std::optional<PlanStep> step;
            if (!plan.steps.empty())
                step = plan.steps[std::min<std::size_t>(attempt - 1, plan.steps.size() - 1)];
            fire(Event::plan_ready, step ? (step->runbook.empty() ? "no runbook" : step->runbook) : "escalate-only");

            json acts = json::array();
            if (step) {
                for (ActionKind a : step->actions) {
                    ActionResult res = with_retry("actuator", notes, [&] {
                        return sim.apply_action({a, step->target});
                    });
                    ledger.tool_call();
                    if (res.cleared_fault && !cleared_kind)
                        cleared_kind = res.cleared_fault;
                    actions.push_back({a, step->target, res.effect, res.tick, step->runbook});
                    acts.push_back({{"action", to_string(a)}, {"target", step->target},
                                    {"result", to_string(res.effect)}, {"tick", res.tick}});
                }
            }
            if (over_budget())
                throw Stop{};
            fire(Event::action_done, std::to_string(acts.size()) + " actions");

            // Verify on raw data: the stop attribute must stay quiet on every
            // entity that raised it, for the whole verification window.
            std::set<EntityId> watched;
            for (const auto& a : task.alerts)
                if (a.attribute == plan.stop_attribute)
                    watched.insert(a.entity);
            const auto metric = metric_of_anomaly(plan.stop_attribute, vocab);
            bool clear = !plan.escalate_only();
            for (int t = 0; t < config_.verify_ticks; ++t) {
                StepOutput so = sim.step();
                ledger.charge(Component::detector, tariff::detector_window);
                if (metric) {
                    const std::string mname(to_string(*metric));
                    const double ceiling =
                        baselines_.level.at(mname) + config_.detector.k * baselines_.sigma_of(mname);
                    for (const auto& s : so.samples)
                        if (s.metric == mname && watched.contains(s.entity) && s.value > ceiling)
                            clear = false;
                } else {
                    for (const auto& e : so.events)
                        if (e.kind == plan.stop_attribute && watched.contains(e.entity))
                            clear = false;
                }
            }
            if (step && !step->runbook.empty() && agent_.runbooks.contains(step->runbook)) {
                agent_.runbooks.record_outcome(step->runbook, clear);
                ledger.charge(Component::memory, tariff::memory_item);
            }
            attempts.push_back({{"attempt", attempt},
                                {"runbook", step ? json(step->runbook) : json(nullptr)},
                                {"actions", acts},
                                {"stop_attribute", plan.stop_attribute},
                                {"cleared", clear}});
            if (over_budget())
                throw Stop{};
            if (clear) {
                fire(Event::symptoms_clear, plan.stop_attribute + " quiet");
                resolved = true;
                break;
            }
            fire(Event::symptoms_persist, plan.stop_attribute.empty() ? "no stop condition" : plan.stop_attribute + " persists");
            if (ms.phase == Phase::Escalated) {
                out.escalated = true;
                out.escalation_reason = "retries_exhausted";
                throw Stop{};
            }
        }
    } catch (const Stop&) {
    } catch (const ComponentFailure& f) {
        if (!over_budget()) {
            fire(Event::component_failure, f.what());
            out.escalated = true;
            out.escalation_reason = std::string("component_failure: ") + f.what();
        }
    }

    // Build the episode record; shared by the Logging and escalation paths.
    Episode& ep = out.episode;
    ep.id = id;
    ep.start_tick = start_tick;
    ep.end_tick = sim.tick();
    ep.affected_service = subtasks.empty() ? task.affected_service : subtasks.front().affected_service;
    if (task.alerts.empty())
        for (const auto& [key, a] : merged)
            task.alerts.push_back(a);
    for (const auto& a : task.alerts) {
        ep.symptom_attributes.insert(a.attribute);
        ep.max_severity = std::max(ep.max_severity, a.severity);
        ep.entities.insert(a.entity);
        if (topo_->class_of(a.entity) == EntityClass::pod)
            ep.entities.insert(topo_->node_of_pod(a.entity));
    }
    if (ep.affected_service.empty())
        ep.affected_service = service_for(focus_entity(task.alerts, *topo_), *topo_);
    ep.actions = actions;
    ep.resolved = resolved;
    if (resolved)
        ep.ticks_to_resolve = ep.end_tick - ep.start_tick;
    // Post-hoc ground truth: the fault an action cleared, else the operator's
    // record of what was injected.
    ep.root_cause_label = cleared_kind;
    if (!ep.root_cause_label && out.ground_truth)
        ep.root_cause_label = out.ground_truth->kind;
    ep.feature_vector = embed(ep);

    if (out.ground_truth && !out.diagnosis.hypotheses.empty()) {
        const auto& top = out.diagnosis.hypotheses.front();
        auto scope = sim.remedy_scope(*out.ground_truth);
        out.correct = top.fault_kind == out.ground_truth->kind &&
                      (scope.contains(top.suspect_entity) || top.suspect_entity == out.ground_truth->target);
    }

    auto close_episode = [&](bool success) {
        agent_.episodic.add(ep);
        ledger.charge(Component::memory, tariff::memory_item);
        agent_.buffer.evict_incident(id);
        agent_.buffer.set_current_incident(std::nullopt);
        agent_.ace = update_feedback(agent_.ace, success, cited_sections());
        ++agent_.episodes_closed;
        ++agent_.since_learning;
    };

    if (out.escalated) {
        close_episode(false);
        sim.operator_clear();
    } else {
        // Logging
        close_episode(true);
        const bool due = agent_.since_learning >= config_.ill.cadence;
        if (!over_budget())
            fire(Event::episode_logged, "stored " + id, due);
        if (due && ms.phase == Phase::Learning) {
            try {
                IllReport rep = with_retry("ill", notes, [&] {
                    return run_ill(agent_.episodic, agent_.kg, config_.ill, sim.tick(), agent_.episodes_closed);
                });
                ledger.charge(Component::ill, tariff::ill_closure * static_cast<std::int64_t>(rep.closures));
                agent_.since_learning = 0;
                ++agent_.learning_runs;
                out.learning = LearningSummary{rep.concepts, rep.closures, rep.mined, rep.injected, rep.retired,
                                               rep.rejected};
                if (on_learning)
                    on_learning(rep, agent_.learning_runs);
                if (!over_budget())
                    fire(Event::learning_done, std::to_string(rep.injected) + " rules injected");
            } catch (const ComponentFailure& f) {
                if (!over_budget()) {
                    fire(Event::component_failure, f.what());
                    out.escalated = true;
                    out.escalation_reason = std::string("component_failure: ") + f.what();
                }
            }
        }
    }
    window_.clear();
    out.rules_active = agent_.kg.rules_with_status(RuleStatus::validated).size();

    // Episode log
    json hyps = to_json(out.diagnosis);
    json packs = json::array();
    for (const auto& p : out.packs)
        packs.push_back(to_json(p));
    json trans = json::array();
    for (const auto& t : out.transitions)
        trans.push_back(to_json(t));
    json alerts = json::array();
    for (const auto& a : task.alerts)
        alerts.push_back(alert_payload(a));
    json subs = json::array();
    for (const auto& s : subtasks)
        subs.push_back({{"affected_service", s.affected_service}, {"affected_entity", s.affected_entity}});
    json gt = nullptr;
    if (out.ground_truth)
        gt = out.ground_truth->to_json();
    json learning = nullptr;
    if (out.learning) {
        json rejected = json::array();
        for (const auto& [rid, why] : out.learning->rejected)
            rejected.push_back({{"rule", rid}, {"reason", why}});
        learning = {{"concepts", out.learning->concepts}, {"closures", out.learning->closures},
                    {"mined", out.learning->mined},       {"injected", out.learning->injected},
                    {"retired", out.learning->retired},   {"rejected", rejected}};
    }
    out.log = {{"id", id},
               {"start_tick", ep.start_tick},
               {"end_tick", ep.end_tick},
               {"affected_entity", task.affected_entity},
               {"affected_service", ep.affected_service},
               {"subtasks", subs},
               {"symptoms", ep.symptom_attributes},
               {"alerts", alerts},
               {"packs", packs},
               {"diagnosis", hyps},
               {"plan", plan_json},
               {"attempts", attempts},
               {"transitions", trans},
               {"ledger", ledger.to_json()},
               {"outcome",
                {{"resolved", ep.resolved},
                 {"ticks_to_resolve", ep.ticks_to_resolve ? json(*ep.ticks_to_resolve) : json(nullptr)},
                 {"escalated", out.escalated},
                 {"reason", out.escalation_reason},
                 {"correct", out.correct}}},
               {"notes", notes},
               {"learning", learning},
               {"ground_truth", gt}};
    return out;
}

} // namespace life
