#include "life/ace.hpp"

#include <algorithm>
#include <cmath>

namespace life {

using nlohmann::json;

std::string_view to_string(SectionKind k) {
    switch (k) {
    case SectionKind::task: return "task";
    case SectionKind::policies: return "policies";
    case SectionKind::short_term: return "short_term";
    case SectionKind::episodic: return "episodic";
    case SectionKind::kg_subgraph: return "kg_subgraph";
    case SectionKind::rules: return "rules";
    case SectionKind::runbooks: return "runbooks";
    }
    return "?";
}

std::optional<SectionKind> parse_section_kind(std::string_view s) {
    for (SectionKind k : kSectionOrder)
        if (to_string(k) == s)
            return k;
    return std::nullopt;
}

std::optional<SectionKind> ContextPack::find(const std::string& ref) const {
    for (const auto& sec : sections)
        for (const auto& it : sec.items)
            if (it.ref == ref)
                return sec.kind;
    return std::nullopt;
}

json to_json(const ContextPack& p) {
    json sections = json::array();
    for (const auto& s : p.sections) {
        json items = json::array();
        for (const auto& it : s.items)
            items.push_back({{"ref", it.ref}, {"priority", it.priority}, {"cost", it.cost}, {"payload", it.payload}});
        sections.push_back({{"kind", to_string(s.kind)}, {"cost", s.cost}, {"items", items}});
    }
    json trace = json::array();
    for (const auto& t : p.trace) {
        json e = {{"section", to_string(t.section)},
                  {"ref", t.ref},
                  {"cost", t.cost},
                  {"decision", t.decision == TraceDecision::included ? "included" : "excluded_budget"}};
        if (!t.limit.empty())
            e["limit"] = t.limit;
        trace.push_back(e);
    }
    return {{"budget", p.budget}, {"total_cost", p.total_cost}, {"sections", sections}, {"trace", trace}};
}

// ---------------------------------------------------------------------------
// Budget policy and weights

void BudgetPolicy::validate() const {
    if (pack_budget <= 0)
        throw Error("ace: pack_budget must be positive");
    for (SectionKind k : kSectionOrder) {
        auto it = section_caps.find(k);
        if (it == section_caps.end())
            throw Error("ace: no cap for section " + std::string(to_string(k)));
        if (it->second <= 0)
            throw Error("ace: cap for section " + std::string(to_string(k)) + " must be positive");
    }
    if (episodic_k == 0)
        throw Error("ace: episodic_k must be >= 1");
    if (subgraph_radius < 0)
        throw Error("ace: subgraph_radius must be >= 0");
}

BudgetPolicy BudgetPolicy::from_json(const json& j) {
    BudgetPolicy p;
    p.pack_budget = j.value("pack_budget", p.pack_budget);
    if (j.contains("section_caps")) {
        for (const auto& [name, cap] : j.at("section_caps").items()) {
            auto k = parse_section_kind(name);
            if (!k)
                throw Error("ace: unknown section '" + name + "'");
            p.section_caps[*k] = cap.get<int>();
        }
    }
    p.episodic_k = j.value("episodic_k", p.episodic_k);
    p.subgraph_radius = j.value("subgraph_radius", p.subgraph_radius);
    p.validate();
    return p;
}

json BudgetPolicy::to_json() const {
    json caps = json::object();
    for (const auto& [k, v] : section_caps)
        caps[std::string(life::to_string(k))] = v;
    return {{"pack_budget", pack_budget},
            {"section_caps", caps},
            {"episodic_k", episodic_k},
            {"subgraph_radius", subgraph_radius}};
}

AceState::AceState() {
    for (SectionKind k : kSectionOrder)
        weights[k] = 1.0;
}

AceState update_feedback(AceState state, bool success, const std::set<SectionKind>& cited) {
    for (SectionKind k : cited) {
        double& w = state.weights.at(k);
        // Round to the step grid so repeated updates don't drift.
        w = std::round((w + (success ? AceState::kStep : -AceState::kStep)) * 10.0) / 10.0;
        w = std::clamp(w, AceState::kMin, AceState::kMax);
    }
    return state;
}

int effective_cap(const BudgetPolicy& policy, const AceState& state, SectionKind k) {
    // The task section is mandatory and never scaled.
    if (k == SectionKind::task)
        return policy.section_caps.at(k);
    return static_cast<int>(std::floor(policy.section_caps.at(k) * state.weight(k) + 1e-9));
}

// ---------------------------------------------------------------------------
// Candidate gathering

std::vector<double> incident_embedding(const IncidentDescriptor& query) {
    Episode probe;
    probe.symptom_attributes = query.symptoms;
    probe.max_severity = query.max_severity;
    return embed(probe);
}

namespace {

std::string triple_ref(const Triple& t) { return "triple:" + t.subject + "|" + t.predicate + "|" + t.object; }

json episode_payload(const Episode& e, double similarity) {
    json j = to_json(e);
    // Ground truth and raw vectors stay out of the pack.
    j.erase("root_cause_label");
    j.erase("feature_vector");
    j["similarity"] = similarity;
    return j;
}

} // namespace

Candidates gather_candidates(const IncidentDescriptor& query, const MemoryView& mem, const BudgetPolicy& policy,
                             GatherStats* stats) {
    if (query.affected_entity.empty() || query.symptoms.empty())
        throw Error("ace: incident descriptor needs an affected entity and symptoms");
    GatherStats local;
    GatherStats& st = stats ? *stats : local;
    Candidates c;
    for (SectionKind k : kSectionOrder)
        c[k];

    c[SectionKind::task].push_back({"task:" + query.incident,
                                    0,
                                    1 + static_cast<int>(query.symptoms.size()),
                                    {{"incident", query.incident},
                                     {"tick", query.tick},
                                     {"affected_entity", query.affected_entity},
                                     {"affected_service", query.affected_service},
                                     {"symptoms", query.symptoms},
                                     {"max_severity", query.max_severity}}});

    if (mem.kg) {
        ++st.queries;
        for (const auto& t : mem.kg->query({std::nullopt, std::string("constrained_by"), std::nullopt})) {
            ++st.items_touched;
            c[SectionKind::policies].push_back({triple_ref(t), 0, 1, to_json(t)});
        }
    }
    if (mem.policies) {
        for (const auto& tag : mem.policies->blocked_tags) {
            ++st.items_touched;
            c[SectionKind::policies].push_back({"policy:blocked:" + tag, 0, 1, {{"blocked_tag", tag}}});
        }
    }

    if (mem.short_term) {
        ++st.queries;
        for (const auto& e : mem.short_term->snapshot(query.incident)) {
            ++st.items_touched;
            c[SectionKind::short_term].push_back({e.item.ref, e.priority, 1, e.item.payload});
        }
    }

    if (mem.episodic && mem.episodic->live() > 0) {
        ++st.queries;
        st.items_touched += mem.episodic->live();
        for (const auto& se : mem.episodic->search(incident_embedding(query), policy.episodic_k))
            c[SectionKind::episodic].push_back({"episode:" + se.episode.id, 0,
                                                1 + static_cast<int>(se.episode.actions.size()),
                                                episode_payload(se.episode, se.similarity)});
    }

    if (mem.kg) {
        ++st.queries;
        for (const auto& t : mem.kg->subgraph(query.affected_entity, policy.subgraph_radius)) {
            ++st.items_touched;
            c[SectionKind::kg_subgraph].push_back({triple_ref(t), 0, 1, to_json(t)});
        }

        ++st.queries;
        std::vector<Rule> rules;
        for (const auto& r : mem.kg->rules_with_status(RuleStatus::validated)) {
            ++st.items_touched;
            bool hits = std::any_of(r.antecedent.begin(), r.antecedent.end(),
                                    [&](const std::string& a) { return query.symptoms.contains(a); });
            if (hits)
                rules.push_back(r);
        }
        std::stable_sort(rules.begin(), rules.end(), [](const Rule& a, const Rule& b) {
            if (a.confidence != b.confidence)
                return a.confidence > b.confidence;
            return a.id < b.id;
        });
        for (const auto& r : rules) {
            json p = to_json(r);
            p.erase("provenance");
            c[SectionKind::rules].push_back({r.id, 0, 1, p});
        }
    }

    if (mem.runbooks && mem.policies) {
        ++st.queries;
        st.items_touched += mem.runbooks->all().size();
        for (const auto& rb : mem.runbooks->suggest(query.symptoms, *mem.policies)) {
            json p = rb.to_json();
            p["smoothed_rate"] = rb.smoothed_rate();
            c[SectionKind::runbooks].push_back({"runbook:" + rb.id, 0, 1, p});
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// Packing

ContextPack pack_candidates(const Candidates& candidates, const BudgetPolicy& policy, const AceState& state) {
    policy.validate();
    ContextPack pack;
    pack.budget = policy.pack_budget;
    bool pack_full = false;

    for (SectionKind k : kSectionOrder) {
        PackSection sec;
        sec.kind = k;
        std::vector<PackItem> items;
        if (auto it = candidates.find(k); it != candidates.end())
            items = it->second;
        std::stable_sort(items.begin(), items.end(),
                         [](const PackItem& a, const PackItem& b) { return a.priority > b.priority; });

        const int cap = effective_cap(policy, state, k);
        bool section_full = false;
        for (auto& item : items) {
            if (item.cost < 0)
                throw Error("ace: negative item cost for " + item.ref);
            TraceEntry te{k, item.ref, item.cost, TraceDecision::included, {}};
            if (!pack_full && !section_full && sec.cost + item.cost > cap)
                section_full = true;
            else if (!pack_full && !section_full && pack.total_cost + item.cost > pack.budget)
                pack_full = true;

            if (pack_full || section_full) {
                if (k == SectionKind::task)
                    throw Error("ace: budget too small for the task section");
                te.decision = TraceDecision::excluded_budget;
                te.limit = pack_full ? "pack" : "section";
            } else {
                sec.cost += item.cost;
                pack.total_cost += item.cost;
                sec.items.push_back(std::move(item));
            }
            pack.trace.push_back(std::move(te));
        }
        pack.sections.push_back(std::move(sec));
    }
    return pack;
}

ContextPack assemble(const IncidentDescriptor& query, const MemoryView& memories, const BudgetPolicy& policy,
                     const AceState& state, GatherStats* stats) {
    return pack_candidates(gather_candidates(query, memories, policy, stats), policy, state);
}

} // namespace life
