#pragma once

#include "life/core.hpp"

#include <json.hpp>

#include <set>
#include <vector>

namespace life {

enum class RuleStatus { candidate, validated, retired };

std::string_view to_string(RuleStatus s);

// An implication antecedent -> consequent mined from a formal context.
struct Rule {
    std::string id;
    std::set<std::string> antecedent;
    std::set<std::string> consequent;
    double support = 0.0;
    double confidence = 0.0;
    RuleStatus status = RuleStatus::candidate;
    std::vector<std::string> provenance; // contributing episode ids, sorted
    Tick asserted_tick = 0;
    Tick last_confirmed_tick = 0;
    std::int64_t last_confirmed_episode = 0;
    // Set only by a passing consistency check; injection refuses rules without it.
    bool consistent = false;
    std::string retire_reason;

    // Fault kinds named by cause_ labels in the consequent.
    std::vector<FaultKind> causes() const;
    // Actions named by resolved_by_ labels in the consequent.
    std::vector<ActionKind> remedies() const;

    bool operator==(const Rule&) const = default;
};

// Stable id derived from the rule's shape.
std::string rule_id(const std::set<std::string>& antecedent, const std::set<std::string>& consequent);

nlohmann::json to_json(const Rule& r);
Rule rule_from_json(const nlohmann::json& j);

} // namespace life
