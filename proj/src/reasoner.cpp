#include "life/reasoner.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace life {

using nlohmann::json;

json to_json(const RootCauseHypothesis& h) {
    json j = {{"fault_kind", to_string(h.fault_kind)},
              {"suspect_entity", h.suspect_entity},
              {"score", h.score},
              {"evidence", h.evidence}};
    j["via_rule"] = h.via_rule ? json(*h.via_rule) : json(nullptr);
    return j;
}

json to_json(const Diagnosis& d) {
    json hyps = json::array();
    for (const auto& h : d.hypotheses)
        hyps.push_back(to_json(h));
    return {{"hypotheses", hyps}, {"compute_units", d.compute_units}, {"shortcut", d.shortcut},
            {"abstained", d.abstained()}};
}

json to_json(const ActionPlan& p) {
    json steps = json::array();
    for (const auto& s : p.steps) {
        json acts = json::array();
        for (ActionKind a : s.actions)
            acts.push_back(to_string(a));
        steps.push_back({{"runbook", s.runbook}, {"actions", acts}, {"target", s.target}});
    }
    return {{"steps", steps}, {"stop_attribute", p.stop_attribute}, {"escalation_after", p.escalation_after}};
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

std::string_view to_string(CandidateScope s) {
    switch (s) {
    case CandidateScope::service_callers: return "service_callers";
    case CandidateScope::service_pods: return "service_pods";
    case CandidateScope::rack_pods: return "rack_pods";
    case CandidateScope::node_local: return "node_local";
    }
    return "?";
}

CandidateScope parse_scope(const std::string& s) {
    for (auto c : {CandidateScope::service_callers, CandidateScope::service_pods, CandidateScope::rack_pods,
                   CandidateScope::node_local})
        if (to_string(c) == s)
            return c;
    throw Error("reasoner: unknown candidate scope '" + s + "'");
}

} // namespace

ReasonerParams ReasonerParams::defaults() {
    ReasonerParams p;
    p.signatures = {
        {FaultKind::dns_error_burst, {"dns_error"}, {}, {"dns_error", "latency_spike"}, "Service",
         CandidateScope::service_callers},
        {FaultKind::tor_packet_loss, {"packet_loss_high"}, {}, {"packet_loss_high", "latency_spike"}, "ToRSwitch",
         CandidateScope::rack_pods},
        {FaultKind::ingress_throttle, {"latency_spike"}, {"dns_error", "packet_loss_high"}, {"latency_spike"},
         "Service", CandidateScope::service_pods},
        {FaultKind::noisy_neighbor, {"cpu_high", "disk_high"}, {}, {"cpu_high", "disk_high"}, "Node",
         CandidateScope::node_local},
    };
    return p;
}

ReasonerParams ReasonerParams::from_json(const json& j) {
    ReasonerParams p = defaults();
    p.decay = j.value("decay", p.decay);
    p.rule_boost = j.value("rule_boost", p.rule_boost);
    p.escalation_after = j.value("escalation_after", p.escalation_after);
    if (!(p.decay > 0.0 && p.decay <= 1.0))
        throw Error("reasoner: decay must lie in (0, 1]");
    if (p.escalation_after < 1)
        throw Error("reasoner: escalation_after must be >= 1");
    if (j.contains("signatures")) {
        p.signatures.clear();
        for (const auto& s : j.at("signatures")) {
            Signature sig;
            auto kind = parse_fault_kind(s.at("kind").get<std::string>());
            if (!kind)
                throw Error("reasoner: unknown fault kind in signature");
            sig.kind = *kind;
            sig.required = s.at("required").get<std::set<std::string>>();
            sig.forbidden = s.value("forbidden", std::set<std::string>{});
            sig.scored = s.value("scored", sig.required);
            sig.candidate_class = s.at("candidate_class").get<std::string>();
            sig.scope = parse_scope(s.at("scope").get<std::string>());
            p.signatures.push_back(std::move(sig));
        }
    }
    return p;
}

GraphReasoner::GraphReasoner(ReasonerParams params) : params_(std::move(params)) {}

const Signature* GraphReasoner::signature_for(FaultKind k) const {
    for (const auto& s : params_.signatures)
        if (s.kind == k)
            return &s;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Diagnosis

namespace {

struct TaskView {
    EntityId affected_entity;
    EntityId affected_service;
    std::set<std::string> symptoms;
};

TaskView read_task(const ContextPack& pack) {
    const auto& items = pack.section(SectionKind::task).items;
    if (items.empty())
        throw Error("reasoner: pack has no task item");
    const json& p = items.front().payload;
    return {p.at("affected_entity").get<std::string>(), p.value("affected_service", std::string()),
            p.at("symptoms").get<std::set<std::string>>()};
}

struct PackAlert {
    std::string ref;
    EntityId entity;
    std::string attribute;
    int severity = 0;
};

std::vector<PackAlert> read_alerts(const ContextPack& pack) {
    std::vector<PackAlert> out;
    for (const auto& it : pack.section(SectionKind::short_term).items) {
        const json& p = it.payload;
        if (!p.is_object() || !p.contains("attribute") || !p.contains("entity") || !p.contains("severity"))
            continue;
        out.push_back({it.ref, p.at("entity").get<std::string>(), p.at("attribute").get<std::string>(),
                       p.at("severity").get<int>()});
    }
    return out;
}

struct Edge {
    std::string ref;
    EntityId subject;
    std::string predicate;
    EntityId object;
};

// Topology as seen through the pack's subgraph section only.
struct PackGraph {
    std::vector<Edge> edges;
    std::map<EntityId, std::vector<EntityId>> adjacency;
    std::map<EntityId, std::string> cls;

    explicit PackGraph(const ContextPack& pack) {
        for (const auto& it : pack.section(SectionKind::kg_subgraph).items) {
            const json& p = it.payload;
            if (p.value("literal", false))
                continue;
            Edge e{it.ref, p.at("subject").get<std::string>(), p.at("predicate").get<std::string>(),
                   p.at("object").get<std::string>()};
            adjacency[e.subject].push_back(e.object);
            adjacency[e.object].push_back(e.subject);
            if (e.predicate == "runs_on") {
                cls[e.subject] = "Pod";
                cls[e.object] = "Node";
            } else if (e.predicate == "member_of") {
                cls[e.subject] = "Node";
                cls[e.object] = "Rack";
            } else if (e.predicate == "uplink") {
                cls[e.subject] = "Rack";
                cls[e.object] = "ToRSwitch";
            } else if (e.predicate == "depends_on") {
                cls[e.subject] = "Service";
                cls[e.object] = "Service";
            } else if (e.predicate == "serves") {
                cls[e.subject] = "Pod";
                cls[e.object] = "Service";
            }
            edges.push_back(std::move(e));
        }
        for (auto& [k, v] : adjacency) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
    }

    std::map<EntityId, int> distances_from(const EntityId& start) const {
        std::map<EntityId, int> dist;
        if (!adjacency.contains(start))
            return dist;
        std::deque<EntityId> q{start};
        dist[start] = 0;
        while (!q.empty()) {
            EntityId cur = q.front();
            q.pop_front();
            for (const auto& n : adjacency.at(cur)) {
                if (dist.emplace(n, dist[cur] + 1).second)
                    q.push_back(n);
            }
        }
        return dist;
    }

    // Subjects s with (s, pred, object).
    std::vector<const Edge*> into(const EntityId& object, std::string_view pred) const {
        std::vector<const Edge*> out;
        for (const auto& e : edges)
            if (e.object == object && e.predicate == pred)
                out.push_back(&e);
        return out;
    }
};

// Entities the candidate would perturb, with the triples that establish it.
std::pair<std::set<EntityId>, std::vector<std::string>> blast_of(const PackGraph& g, const EntityId& cand,
                                                                   CandidateScope scope) {
    std::set<EntityId> blast;
    std::vector<std::string> used;
    auto pods_serving = [&](const EntityId& svc) {
        for (const Edge* e : g.into(svc, "serves")) {
            blast.insert(e->subject);
            used.push_back(e->ref);
        }
    };
    auto pods_on = [&](const EntityId& node) {
        for (const Edge* e : g.into(node, "runs_on")) {
            blast.insert(e->subject);
            used.push_back(e->ref);
        }
    };
    switch (scope) {
    case CandidateScope::service_callers:
        for (const Edge* dep : g.into(cand, "depends_on")) {
            used.push_back(dep->ref);
            pods_serving(dep->subject);
        }
        break;
    case CandidateScope::service_pods:
        pods_serving(cand);
        break;
    case CandidateScope::rack_pods:
        for (const Edge* up : g.into(cand, "uplink")) {
            used.push_back(up->ref);
            for (const Edge* m : g.into(up->subject, "member_of")) {
                used.push_back(m->ref);
                blast.insert(m->subject);
                pods_on(m->subject);
            }
        }
        break;
    case CandidateScope::node_local:
        blast.insert(cand);
        pods_on(cand);
        break;
    }
    return {blast, used};
}

bool signature_applies(const Signature& sig, const std::set<std::string>& symptoms) {
    return std::includes(symptoms.begin(), symptoms.end(), sig.required.begin(), sig.required.end()) &&
           std::none_of(sig.forbidden.begin(), sig.forbidden.end(),
                        [&](const std::string& f) { return symptoms.contains(f); });
}

void rank(std::vector<RootCauseHypothesis>& hyps) {
    // Keep the best-scoring hypothesis per (kind, suspect).
    std::map<std::pair<FaultKind, EntityId>, RootCauseHypothesis> best;
    for (auto& h : hyps) {
        auto key = std::make_pair(h.fault_kind, h.suspect_entity);
        auto it = best.find(key);
        if (it == best.end() || h.score > it->second.score)
            best[key] = std::move(h);
    }
    hyps.clear();
    for (auto& [k, h] : best)
        hyps.push_back(std::move(h));
    std::stable_sort(hyps.begin(), hyps.end(), [](const RootCauseHypothesis& a, const RootCauseHypothesis& b) {
        if (a.score != b.score)
            return a.score > b.score;
        if (a.suspect_entity != b.suspect_entity)
            return a.suspect_entity < b.suspect_entity;
        return a.fault_kind < b.fault_kind;
    });
}

} // namespace

Diagnosis GraphReasoner::diagnose_by_rules(const ContextPack& pack) const {
    const TaskView task = read_task(pack);
    const EntityId fallback = task.affected_service.empty() ? task.affected_entity : task.affected_service;
    Diagnosis d;
    std::map<FaultKind, std::pair<double, std::string>> kinds; // best confidence and its rule
    for (const auto& it : pack.section(SectionKind::rules).items) {
        const json& p = it.payload;
        if (p.value("status", std::string("validated")) != "validated")
            continue;
        auto ante = p.at("antecedent").get<std::set<std::string>>();
        if (ante.empty() || !std::includes(task.symptoms.begin(), task.symptoms.end(), ante.begin(), ante.end()))
            continue;
        ++d.compute_units;
        const double conf = p.at("confidence").get<double>();
        for (const auto& c : p.at("consequent").get<std::set<std::string>>()) {
            if (!c.starts_with(kCausePrefix))
                continue;
            auto kind = parse_fault_kind(c.substr(kCausePrefix.size()));
            if (!kind)
                continue;
            // A rule cannot assert a kind whose defining symptoms are absent.
            if (const Signature* sig = signature_for(*kind); sig && !signature_applies(*sig, task.symptoms))
                continue;
            auto [pos, fresh] = kinds.try_emplace(*kind, conf, it.ref);
            if (!fresh && conf > pos->second.first)
                pos->second = {conf, it.ref};
        }
    }
    if (kinds.empty())
        return d;

    // The rule fixes the kind; localising it only needs that kind's candidates,
    // scored by the alert severity inside their blast set.
    const PackGraph g(pack);
    const auto alerts = read_alerts(pack);
    for (const auto& [kind, best] : kinds) {
        const auto& [conf, rule_ref] = best;
        RootCauseHypothesis h{kind, fallback, conf * params_.rule_boost, {rule_ref}, rule_ref};
        if (const Signature* sig = signature_for(kind)) {
            double top = 0.0;
            std::vector<std::string> top_evidence;
            for (const auto& [entity, cls] : g.cls) {
                if (cls != sig->candidate_class)
                    continue;
                ++d.compute_units;
                auto [blast, used] = blast_of(g, entity, sig->scope);
                double mass = 0.0;
                std::vector<std::string> ev;
                for (const auto& a : alerts)
                    if (sig->scored.contains(a.attribute) && blast.contains(a.entity)) {
                        mass += a.severity;
                        ev.push_back(a.ref);
                    }
                if (mass > top) {
                    top = mass;
                    h.suspect_entity = entity;
                    std::sort(used.begin(), used.end());
                    used.erase(std::unique(used.begin(), used.end()), used.end());
                    ev.insert(ev.end(), used.begin(), used.end());
                    top_evidence = std::move(ev);
                }
            }
            h.evidence.insert(h.evidence.end(), top_evidence.begin(), top_evidence.end());
        }
        d.hypotheses.push_back(std::move(h));
    }
    rank(d.hypotheses);
    d.shortcut = true;
    return d;
}

Diagnosis GraphReasoner::diagnose_by_propagation(const ContextPack& pack) const {
    const TaskView task = read_task(pack);
    const PackGraph g(pack);
    const auto dist = g.distances_from(task.affected_entity);
    Diagnosis d;
    d.compute_units = static_cast<int>(dist.size());
    if (dist.empty())
        return d;

    const auto alerts = read_alerts(pack);
    for (const auto& sig : params_.signatures) {
        if (!signature_applies(sig, task.symptoms))
            continue;
        for (const auto& [entity, hops] : dist) {
            auto c = g.cls.find(entity);
            if (c == g.cls.end() || c->second != sig.candidate_class)
                continue;
            auto [blast, used] = blast_of(g, entity, sig.scope);
            RootCauseHypothesis h{sig.kind, entity, 0.0, {}, std::nullopt};
            for (const auto& a : alerts) {
                if (!sig.scored.contains(a.attribute) || !blast.contains(a.entity))
                    continue;
                auto da = dist.find(a.entity);
                if (da == dist.end())
                    continue;
                h.score += a.severity * std::pow(params_.decay, da->second);
                h.evidence.push_back(a.ref);
            }
            if (h.score <= 0.0)
                continue;
            std::sort(used.begin(), used.end());
            used.erase(std::unique(used.begin(), used.end()), used.end());
            h.evidence.insert(h.evidence.end(), used.begin(), used.end());
            d.hypotheses.push_back(std::move(h));
        }
    }
    rank(d.hypotheses);
    return d;
}

Diagnosis GraphReasoner::diagnose(const ContextPack& pack) const {
    Diagnosis by_rules = diagnose_by_rules(pack);
    if (by_rules.shortcut)
        return by_rules;
    Diagnosis d = diagnose_by_propagation(pack);
    d.compute_units += by_rules.compute_units;
    return d;
}

// ---------------------------------------------------------------------------
// Planning

ActionPlan GraphReasoner::plan(const std::vector<RootCauseHypothesis>& hypotheses,
                               const std::vector<Runbook>& suggestions, const RunbookStore& procedural,
                               const PolicySet& policies, const std::set<std::string>& symptoms) const {
    ActionPlan plan;
    plan.escalation_after = params_.escalation_after;
    const auto& vocab = Vocabulary::standard();
    for (const auto& s : vocab.symptoms())
        if (symptoms.contains(s)) {
            plan.stop_attribute = s;
            break;
        }
    if (hypotheses.empty())
        return plan;

    const auto& top = hypotheses.front();
    const Signature* sig = signature_for(top.fault_kind);
    if (sig) {
        for (const auto& s : vocab.symptoms())
            if (sig->required.contains(s) && symptoms.contains(s)) {
                plan.stop_attribute = s;
                break;
            }
    }

    std::set<std::string> added;
    if (sig) {
        for (const auto& rb : suggestions) {
            bool matches = std::any_of(rb.trigger.begin(), rb.trigger.end(),
                                       [&](const std::string& t) { return sig->required.contains(t); });
            if (matches && policies.allows(rb.policy_tags) && added.insert(rb.id).second)
                plan.steps.push_back({rb.id, rb.steps, top.suspect_entity});
        }
    }
    // The seed runbook closes the plan as the last resort.
    if (auto seed = procedural.seed_for(top.fault_kind); seed && policies.allows(seed->policy_tags) &&
                                                         added.insert(seed->id).second)
        plan.steps.push_back({seed->id, seed->steps, top.suspect_entity});
    return plan;
}

} // namespace life
