#pragma once

#include "life/ace.hpp"

namespace life {

struct RootCauseHypothesis {
    FaultKind fault_kind = FaultKind::dns_error_burst;
    EntityId suspect_entity;
    double score = 0.0;
    std::vector<std::string> evidence; // refs of pack items
    std::optional<std::string> via_rule;
    bool operator==(const RootCauseHypothesis&) const = default;
};

nlohmann::json to_json(const RootCauseHypothesis& h);

struct Diagnosis {
    std::vector<RootCauseHypothesis> hypotheses; // empty means abstain
    // Work done, in whole compute units: rules applied plus candidates scored on
    // the shortcut path, entities visited on the propagation path.
    int compute_units = 0;
    bool shortcut = false;
    bool abstained() const { return hypotheses.empty(); }
};

nlohmann::json to_json(const Diagnosis& d);

struct PlanStep {
    std::string runbook; // empty for an escalate-only step
    std::vector<ActionKind> actions;
    EntityId target;
    bool operator==(const PlanStep&) const = default;
};

struct ActionPlan {
    std::vector<PlanStep> steps;
    // Symptom whose clearing ends the incident; empty for escalate-only plans.
    std::string stop_attribute;
    int escalation_after = 3;
    bool escalate_only() const { return steps.empty(); }
};

nlohmann::json to_json(const ActionPlan& p);

// Which entity class a signature's candidates belong to, and what they perturb.
enum class CandidateScope {
    service_callers, // pods of services that call the candidate
    service_pods,    // the candidate service's own pods
    rack_pods,       // pods and nodes under a ToR switch's rack
    node_local,      // the node and its pods
};

// Symptom pattern that maps alerts onto a fault kind.
struct Signature {
    FaultKind kind = FaultKind::dns_error_burst;
    std::set<std::string> required;  // all must be among the incident symptoms
    std::set<std::string> forbidden; // none may be
    std::set<std::string> scored;    // attributes whose alerts contribute to the score
    std::string candidate_class;     // ontology class of suspects
    CandidateScope scope = CandidateScope::service_pods;
};

struct ReasonerParams {
    double decay = 0.7;
    double rule_boost = 2.0;
    int escalation_after = 3;
    std::vector<Signature> signatures;

    static ReasonerParams defaults();
    static ReasonerParams from_json(const nlohmann::json& j);
};

// The pluggable model slot.
class Reasoner {
public:
    virtual ~Reasoner() = default;
    virtual std::string name() const = 0;
    virtual Diagnosis diagnose(const ContextPack& pack) const = 0;
    virtual ActionPlan plan(const std::vector<RootCauseHypothesis>& hypotheses, const std::vector<Runbook>& suggestions,
                            const RunbookStore& procedural, const PolicySet& policies,
                            const std::set<std::string>& symptoms) const = 0;
};

// Rule shortcut first, dependency-graph propagation otherwise.
class GraphReasoner : public Reasoner {
public:
    explicit GraphReasoner(ReasonerParams params = ReasonerParams::defaults());

    std::string name() const override { return "graph"; }
    Diagnosis diagnose(const ContextPack& pack) const override;
    ActionPlan plan(const std::vector<RootCauseHypothesis>& hypotheses, const std::vector<Runbook>& suggestions,
                    const RunbookStore& procedural, const PolicySet& policies,
                    const std::set<std::string>& symptoms) const override;

    // Exposed for testing: each path on its own.
    Diagnosis diagnose_by_rules(const ContextPack& pack) const;
    Diagnosis diagnose_by_propagation(const ContextPack& pack) const;

    const ReasonerParams& params() const { return params_; }

private:
    const Signature* signature_for(FaultKind k) const;
    ReasonerParams params_;
};

} // namespace life
