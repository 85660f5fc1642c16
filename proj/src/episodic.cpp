#include "life/episodic.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace life {

using nlohmann::json;

namespace {
constexpr const char* kFormat = "life-episodic";
constexpr int kVersion = 1;
} // namespace

json to_json(const Episode& e) {
    json actions = json::array();
    for (const auto& a : e.actions)
        actions.push_back({{"action", to_string(a.action)},
                           {"target", a.target},
                           {"result", to_string(a.result)},
                           {"tick", a.tick},
                           {"runbook", a.runbook}});
    json j = {{"id", e.id},
              {"start_tick", e.start_tick},
              {"end_tick", e.end_tick},
              {"affected_service", e.affected_service},
              {"symptom_attributes", e.symptom_attributes},
              {"actions", actions},
              {"resolved", e.resolved},
              {"max_severity", e.max_severity},
              {"entities", e.entities},
              {"feature_vector", e.feature_vector}};
    j["root_cause_label"] = e.root_cause_label ? json(to_string(*e.root_cause_label)) : json(nullptr);
    j["ticks_to_resolve"] = e.ticks_to_resolve ? json(*e.ticks_to_resolve) : json(nullptr);
    return j;
}

Episode episode_from_json(const json& j) {
    Episode e;
    e.id = j.at("id").get<std::string>();
    e.start_tick = j.at("start_tick").get<Tick>();
    e.end_tick = j.at("end_tick").get<Tick>();
    e.affected_service = j.at("affected_service").get<std::string>();
    e.symptom_attributes = j.at("symptom_attributes").get<std::set<std::string>>();
    if (!j.at("root_cause_label").is_null()) {
        auto k = parse_fault_kind(j.at("root_cause_label").get<std::string>());
        if (!k)
            throw Error("episode: bad root_cause_label");
        e.root_cause_label = *k;
    }
    for (const auto& a : j.at("actions")) {
        ActionRecord r;
        auto kind = parse_action_kind(a.at("action").get<std::string>());
        if (!kind)
            throw Error("episode: bad action");
        r.action = *kind;
        r.target = a.at("target").get<std::string>();
        std::string res = a.at("result").get<std::string>();
        r.result = res == "cleared" ? ActionEffect::cleared
                   : res == "acknowledged" ? ActionEffect::acknowledged
                                           : ActionEffect::no_effect;
        r.tick = a.at("tick").get<Tick>();
        r.runbook = a.value("runbook", std::string{});
        e.actions.push_back(std::move(r));
    }
    e.resolved = j.at("resolved").get<bool>();
    if (!j.at("ticks_to_resolve").is_null())
        e.ticks_to_resolve = j.at("ticks_to_resolve").get<Tick>();
    e.max_severity = j.at("max_severity").get<int>();
    e.entities = j.at("entities").get<std::set<std::string>>();
    e.feature_vector = j.at("feature_vector").get<std::vector<double>>();
    return e;
}

std::size_t embedding_dimension(const Vocabulary& vocab) {
    return vocab.symptoms().size() + 2 + std::size(kAllCategories);
}

std::vector<double> embed(const Episode& ep, const Vocabulary& vocab) {
    for (const auto& a : ep.symptom_attributes)
        if (!vocab.is_symptom(a))
            throw Error("embed: attribute '" + a + "' is not in the symptom vocabulary");

    std::vector<double> v;
    v.reserve(embedding_dimension(vocab));
    for (const auto& s : vocab.symptoms())
        v.push_back(ep.symptom_attributes.contains(s) ? 1.0 : 0.0);
    const double span = static_cast<double>(std::max<Tick>(0, ep.end_tick - ep.start_tick));
    v.push_back(std::min(1.0, span / kDurationScale));
    v.push_back(std::clamp(ep.max_severity, 0, 3) / 3.0);
    for (Category c : kAllCategories) {
        bool present = std::any_of(ep.symptom_attributes.begin(), ep.symptom_attributes.end(),
                                   [&](const std::string& a) { return vocab.category_of(a) == c; });
        v.push_back(present ? 1.0 : 0.0);
    }
    return v;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw Error("cosine: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0)
        return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

void EpisodicStore::add(Episode ep) {
    if (ep.end_tick < ep.start_tick)
        throw Error("episodic: episode '" + ep.id + "' ends before it starts");
    if (ep.symptom_attributes.empty())
        throw Error("episodic: episode '" + ep.id + "' has no symptoms");
    if (ep.feature_vector.size() != dim_)
        throw Error("episodic: episode '" + ep.id + "' has feature dimension " +
                    std::to_string(ep.feature_vector.size()) + ", expected " + std::to_string(dim_));
    if (index_.contains(ep.id))
        throw Error("episodic: duplicate episode id '" + ep.id + "'");
    index_[ep.id] = episodes_.size();
    episodes_.push_back(std::move(ep));
    forgotten_.push_back(false);
}

std::vector<ScoredEpisode> EpisodicStore::search(std::span<const double> query, std::size_t k) const {
    if (k == 0)
        throw Error("episodic: k must be >= 1");
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < episodes_.size(); ++i)
        if (!forgotten_[i])
            scored.emplace_back(cosine_similarity(query, episodes_[i].feature_vector), i);

    auto before = [&](const auto& x, const auto& y) {
        if (x.first != y.first)
            return x.first > y.first;
        const Episode& a = episodes_[x.second];
        const Episode& b = episodes_[y.second];
        if (a.end_tick != b.end_tick)
            return a.end_tick > b.end_tick;
        return a.id < b.id;
    };
    const std::size_t n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), before);

    std::vector<ScoredEpisode> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back({episodes_[scored[i].second], scored[i].first});
    return out;
}

std::size_t EpisodicStore::forget(const ForgetCriteria& c) {
    if (!c.ttl_ticks && c.entities.empty() && !c.incident)
        throw Error("episodic: forget criteria are empty");
    std::size_t removed = 0;
    for (std::size_t i = 0; i < episodes_.size(); ++i) {
        if (forgotten_[i])
            continue;
        const Episode& e = episodes_[i];
        bool hit = (c.ttl_ticks && c.now - e.end_tick > *c.ttl_ticks) || (c.incident && e.id == *c.incident) ||
                   std::any_of(c.entities.begin(), c.entities.end(),
                               [&](const EntityId& id) { return e.entities.contains(id); });
        if (hit) {
            forgotten_[i] = true;
            ++removed;
        }
    }
    return removed;
}

bool EpisodicStore::contains(const std::string& id) const { return index_.contains(id); }

bool EpisodicStore::is_forgotten(const std::string& id) const {
    auto it = index_.find(id);
    return it != index_.end() && forgotten_[it->second];
}

const Episode& EpisodicStore::get(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end())
        throw Error("episodic: unknown episode '" + id + "'");
    return episodes_[it->second];
}

std::size_t EpisodicStore::live() const {
    return static_cast<std::size_t>(std::count(forgotten_.begin(), forgotten_.end(), false));
}

std::vector<Episode> EpisodicStore::live_episodes() const {
    std::vector<Episode> out;
    for (std::size_t i = 0; i < episodes_.size(); ++i)
        if (!forgotten_[i])
            out.push_back(episodes_[i]);
    return out;
}

void EpisodicStore::export_jsonl(std::ostream& out) const {
    out << json{{"format", kFormat}, {"version", kVersion}, {"dimension", dim_}}.dump() << '\n';
    for (std::size_t i = 0; i < episodes_.size(); ++i) {
        json j = to_json(episodes_[i]);
        j["forgotten"] = static_cast<bool>(forgotten_[i]);
        out << j.dump() << '\n';
    }
}

EpisodicStore EpisodicStore::import_jsonl(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw Error("episodic import: missing header");
    json header = json::parse(line);
    if (header.value("format", "") != kFormat || header.value("version", 0) != kVersion)
        throw Error("episodic import: unsupported header");
    EpisodicStore store(header.at("dimension").get<std::size_t>());
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        json j = json::parse(line);
        bool forgotten = j.value("forgotten", false);
        store.add(episode_from_json(j));
        store.forgotten_.back() = forgotten;
    }
    return store;
}

} // namespace life
