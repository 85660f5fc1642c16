#pragma once

#include "life/episodic.hpp"
#include "life/knowledge_graph.hpp"
#include "life/runbooks.hpp"
#include "life/short_term.hpp"

#include <array>

namespace life {

enum class SectionKind { task, policies, short_term, episodic, kg_subgraph, rules, runbooks };

inline constexpr std::array<SectionKind, 7> kSectionOrder = {
    SectionKind::task,        SectionKind::policies, SectionKind::short_term, SectionKind::episodic,
    SectionKind::kg_subgraph, SectionKind::rules,    SectionKind::runbooks};

std::string_view to_string(SectionKind k);
std::optional<SectionKind> parse_section_kind(std::string_view s);

struct PackItem {
    std::string ref;
    int priority = 0;
    int cost = 1;
    nlohmann::json payload;
    bool operator==(const PackItem&) const = default;
};

struct PackSection {
    SectionKind kind = SectionKind::task;
    std::vector<PackItem> items;
    int cost = 0;
    bool operator==(const PackSection&) const = default;
};

enum class TraceDecision { included, excluded_budget };

struct TraceEntry {
    SectionKind section = SectionKind::task;
    std::string ref;
    int cost = 0;
    TraceDecision decision = TraceDecision::included;
    // For exclusions: "pack" when the overall budget ran out, "section" when the
    // section's cap did.
    std::string limit;
    bool operator==(const TraceEntry&) const = default;
};

struct ContextPack {
    std::vector<PackSection> sections; // always all seven, in kSectionOrder
    int total_cost = 0;
    int budget = 0;
    std::vector<TraceEntry> trace;

    const PackSection& section(SectionKind k) const { return sections.at(static_cast<std::size_t>(k)); }
    // Section holding the item with this ref, if any.
    std::optional<SectionKind> find(const std::string& ref) const;
    bool operator==(const ContextPack&) const = default;
};

nlohmann::json to_json(const ContextPack& p);

struct BudgetPolicy {
    int pack_budget = 200;
    std::map<SectionKind, int> section_caps{
        {SectionKind::task, 20},        {SectionKind::policies, 10}, {SectionKind::short_term, 20},
        {SectionKind::episodic, 30},    {SectionKind::kg_subgraph, 100}, {SectionKind::rules, 20},
        {SectionKind::runbooks, 10}};
    std::size_t episodic_k = 5;
    int subgraph_radius = 3;

    // Throws on nonpositive budget or caps, or a missing section.
    void validate() const;

    static BudgetPolicy from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Section weights scale the caps. Feedback moves them by a fixed step.
struct AceState {
    static constexpr double kStep = 0.1;
    static constexpr double kMin = 0.5;
    static constexpr double kMax = 2.0;

    std::map<SectionKind, double> weights;

    AceState();
    double weight(SectionKind k) const { return weights.at(k); }
    bool operator==(const AceState&) const = default;
};

// Success raises the weight of every cited section; failure lowers it. Clamped.
AceState update_feedback(AceState state, bool success, const std::set<SectionKind>& cited);

int effective_cap(const BudgetPolicy& policy, const AceState& state, SectionKind k);

struct IncidentDescriptor {
    std::string incident;
    Tick tick = 0;
    EntityId affected_entity;
    EntityId affected_service;
    std::set<std::string> symptoms;
    int max_severity = 0;
    std::vector<Alert> alerts;
};

// Read-only handles onto the memory tiers.
struct MemoryView {
    const ShortTermBuffer* short_term = nullptr;
    const EpisodicStore* episodic = nullptr;
    const KnowledgeGraph* kg = nullptr;
    const RunbookStore* runbooks = nullptr;
    const PolicySet* policies = nullptr;
};

// Ordered candidate items per section, before any budgeting.
using Candidates = std::map<SectionKind, std::vector<PackItem>>;

struct GatherStats {
    std::size_t items_touched = 0;
    std::size_t queries = 0;
};

// Embedding of an open incident, used as the episodic query.
std::vector<double> incident_embedding(const IncidentDescriptor& query);

Candidates gather_candidates(const IncidentDescriptor& query, const MemoryView& memories, const BudgetPolicy& policy,
                             GatherStats* stats = nullptr);

// Greedy fixed-order packing. Within a section items go by priority
// (descending), then candidate order. The first item that would overflow its
// section cap closes the section; the first that would overflow the pack budget
// closes the pack.
ContextPack pack_candidates(const Candidates& candidates, const BudgetPolicy& policy, const AceState& state);

ContextPack assemble(const IncidentDescriptor& query, const MemoryView& memories, const BudgetPolicy& policy,
                     const AceState& state, GatherStats* stats = nullptr);

} // namespace life
