#include "life/policy.hpp"

#include <algorithm>

namespace life {

bool PolicySet::allows(const std::set<std::string>& tags) const {
    return std::none_of(tags.begin(), tags.end(), [&](const std::string& t) { return blocked_tags.contains(t); });
}

PolicySet PolicySet::from_json(const nlohmann::json& j) {
    PolicySet p;
    p.blocked_tags = j.value("blocked_tags", std::set<std::string>{});
    for (const auto& c : j.value("constraints", nlohmann::json::array())) {
        auto a = parse_action_kind(c.at("action").get<std::string>());
        if (!a)
            throw Error("policy: unknown action '" + c.at("action").get<std::string>() + "'");
        p.constraints.emplace_back(*a, c.at("policy").get<std::string>());
    }
    return p;
}

nlohmann::json PolicySet::to_json() const {
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& [a, pol] : constraints)
        cs.push_back({{"action", life::to_string(a)}, {"policy", pol}});
    return {{"blocked_tags", blocked_tags}, {"constraints", cs}};
}

} // namespace life
