#include "life/rule.hpp"

namespace life {

using nlohmann::json;

std::string_view to_string(RuleStatus s) {
    switch (s) {
    case RuleStatus::candidate:
        return "candidate";
    case RuleStatus::validated:
        return "validated";
    case RuleStatus::retired:
        return "retired";
    }
    return "unknown";
}

std::vector<FaultKind> Rule::causes() const {
    std::vector<FaultKind> out;
    for (const auto& c : consequent)
        if (c.starts_with(kCausePrefix))
            if (auto k = parse_fault_kind(std::string_view(c).substr(kCausePrefix.size())))
                out.push_back(*k);
    return out;
}

std::vector<ActionKind> Rule::remedies() const {
    std::vector<ActionKind> out;
    for (const auto& c : consequent)
        if (c.starts_with(kResolvedPrefix))
            if (auto a = parse_action_kind(std::string_view(c).substr(kResolvedPrefix.size())))
                out.push_back(*a);
    return out;
}

std::string rule_id(const std::set<std::string>& antecedent, const std::set<std::string>& consequent) {
    std::string id = "rule:";
    bool first = true;
    for (const auto& a : antecedent) {
        id += (first ? "" : "+") + a;
        first = false;
    }
    id += "->";
    first = true;
    for (const auto& c : consequent) {
        id += (first ? "" : "+") + c;
        first = false;
    }
    return id;
}

json to_json(const Rule& r) {
    return {{"id", r.id},
            {"antecedent", r.antecedent},
            {"consequent", r.consequent},
            {"support", r.support},
            {"confidence", r.confidence},
            {"status", to_string(r.status)},
            {"provenance", r.provenance},
            {"asserted_tick", r.asserted_tick},
            {"last_confirmed_tick", r.last_confirmed_tick},
            {"last_confirmed_episode", r.last_confirmed_episode},
            {"retire_reason", r.retire_reason}};
}

Rule rule_from_json(const json& j) {
    Rule r;
    r.id = j.at("id").get<std::string>();
    r.antecedent = j.at("antecedent").get<std::set<std::string>>();
    r.consequent = j.at("consequent").get<std::set<std::string>>();
    r.support = j.at("support").get<double>();
    r.confidence = j.at("confidence").get<double>();
    std::string st = j.at("status").get<std::string>();
    r.status = st == "validated" ? RuleStatus::validated
               : st == "retired" ? RuleStatus::retired
                                 : RuleStatus::candidate;
    r.provenance = j.at("provenance").get<std::vector<std::string>>();
    r.asserted_tick = j.value("asserted_tick", Tick{0});
    r.last_confirmed_tick = j.value("last_confirmed_tick", Tick{0});
    r.last_confirmed_episode = j.value("last_confirmed_episode", std::int64_t{0});
    r.retire_reason = j.value("retire_reason", std::string{});
    return r;
}

} // namespace life
