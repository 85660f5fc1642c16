#include "life/runbooks.hpp"

#include <algorithm>
#include <tuple>

namespace life {

Runbook Runbook::from_json(const nlohmann::json& j) {
    Runbook rb;
    rb.id = j.at("id").get<std::string>();
    rb.trigger = j.at("trigger").get<std::set<std::string>>();
    for (const auto& s : j.at("steps")) {
        auto a = parse_action_kind(s.get<std::string>());
        if (!a)
            throw Error("runbook '" + rb.id + "': unknown action '" + s.get<std::string>() + "'");
        rb.steps.push_back(*a);
    }
    rb.success_count = j.value("success_count", 0);
    rb.attempt_count = j.value("attempt_count", 0);
    rb.policy_tags = j.value("policy_tags", std::set<std::string>{});
    if (j.contains("seed_for") && !j.at("seed_for").is_null()) {
        auto k = parse_fault_kind(j.at("seed_for").get<std::string>());
        if (!k)
            throw Error("runbook '" + rb.id + "': unknown fault kind in seed_for");
        rb.seed_for = *k;
    }
    return rb;
}

nlohmann::json Runbook::to_json() const {
    std::vector<std::string> st;
    for (auto a : steps)
        st.emplace_back(life::to_string(a));
    nlohmann::json j = {{"id", id},
                        {"trigger", trigger},
                        {"steps", st},
                        {"success_count", success_count},
                        {"attempt_count", attempt_count},
                        {"policy_tags", policy_tags}};
    j["seed_for"] = seed_for ? nlohmann::json(life::to_string(*seed_for)) : nlohmann::json(nullptr);
    return j;
}

bool ranks_before(const Runbook& a, const Runbook& b) {
    const long long lhs = static_cast<long long>(a.success_count + 1) * (b.attempt_count + 2);
    const long long rhs = static_cast<long long>(b.success_count + 1) * (a.attempt_count + 2);
    if (lhs != rhs)
        return lhs > rhs;
    if (a.attempt_count != b.attempt_count)
        return a.attempt_count > b.attempt_count;
    return a.id < b.id;
}

void RunbookStore::add(Runbook rb) {
    if (rb.id.empty())
        throw Error("runbook: empty id");
    if (rb.steps.empty())
        throw Error("runbook '" + rb.id + "': steps must be nonempty");
    if (rb.success_count < 0 || rb.attempt_count < rb.success_count)
        throw Error("runbook '" + rb.id + "': need 0 <= success_count <= attempt_count");
    if (books_.contains(rb.id))
        throw Error("runbook: duplicate id '" + rb.id + "'");
    std::string id = rb.id;
    books_.emplace(std::move(id), std::move(rb));
}

std::vector<Runbook> RunbookStore::suggest(const std::set<std::string>& symptoms, const PolicySet& policies) const {
    std::vector<Runbook> out;
    for (const auto& [id, rb] : books_) {
        bool triggered = std::includes(symptoms.begin(), symptoms.end(), rb.trigger.begin(), rb.trigger.end());
        if (triggered && policies.allows(rb.policy_tags))
            out.push_back(rb);
    }
    std::sort(out.begin(), out.end(), ranks_before);
    return out;
}

std::pair<int, int> RunbookStore::record_outcome(const std::string& id, bool success) {
    auto it = books_.find(id);
    if (it == books_.end())
        throw Error("runbook: unknown id '" + id + "'");
    Runbook& rb = it->second;
    ++rb.attempt_count;
    if (success)
        ++rb.success_count;
    return {rb.success_count, rb.attempt_count};
}

const Runbook& RunbookStore::get(const std::string& id) const {
    auto it = books_.find(id);
    if (it == books_.end())
        throw Error("runbook: unknown id '" + id + "'");
    return it->second;
}

std::optional<Runbook> RunbookStore::seed_for(FaultKind kind) const {
    for (const auto& [id, rb] : books_)
        if (rb.seed_for == kind)
            return rb;
    return std::nullopt;
}

} // namespace life
