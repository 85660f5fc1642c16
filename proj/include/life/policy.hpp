#pragma once

#include "life/core.hpp"

#include <json.hpp>

#include <set>
#include <vector>

namespace life {

// Active operating policy: runbooks carrying a blocked tag are never suggested,
// and each constraint binds an action to a named policy in the knowledge graph.
struct PolicySet {
    std::set<std::string> blocked_tags;
    std::vector<std::pair<ActionKind, std::string>> constraints;

    bool allows(const std::set<std::string>& tags) const;

    static PolicySet from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

} // namespace life
