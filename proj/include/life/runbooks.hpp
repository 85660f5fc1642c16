#pragma once

#include "life/policy.hpp"

#include <map>
#include <set>
#include <vector>

namespace life {

struct Runbook {
    std::string id;
    std::set<std::string> trigger;
    std::vector<ActionKind> steps;
    int success_count = 0;
    int attempt_count = 0;
    std::set<std::string> policy_tags;
    // Seed runbooks are the default remedy for one fault kind.
    std::optional<FaultKind> seed_for;

    // Laplace-smoothed success rate (success + 1) / (attempts + 2).
    double smoothed_rate() const {
        return (success_count + 1.0) / (attempt_count + 2.0);
    }

    bool operator==(const Runbook&) const = default;

    static Runbook from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Strict weak order used for suggestions: smoothed rate descending (compared
// exactly by cross-multiplication), then more attempts, then id.
bool ranks_before(const Runbook& a, const Runbook& b);

class RunbookStore {
public:
    void add(Runbook rb);

    // Runbooks whose trigger is a subset of `symptoms` and whose tags the policy allows.
    std::vector<Runbook> suggest(const std::set<std::string>& symptoms, const PolicySet& policies) const;

    // Returns the updated (success, attempt) counts.
    std::pair<int, int> record_outcome(const std::string& id, bool success);

    const Runbook& get(const std::string& id) const;
    bool contains(const std::string& id) const { return books_.contains(id); }
    std::optional<Runbook> seed_for(FaultKind kind) const;
    const std::map<std::string, Runbook>& all() const { return books_; }
    bool empty() const { return books_.empty(); }

private:
    std::map<std::string, Runbook> books_;
};

} // namespace life
