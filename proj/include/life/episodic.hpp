#pragma once

#include "life/cluster_sim.hpp"
#include "life/ingest.hpp"

#include <iosfwd>
#include <set>

namespace life {

struct ActionRecord {
    ActionKind action = ActionKind::restart_pod;
    EntityId target;
    ActionEffect result = ActionEffect::no_effect;
    Tick tick = 0;
    std::string runbook;
    bool operator==(const ActionRecord&) const = default;
};

struct Episode {
    std::string id;
    Tick start_tick = 0;
    Tick end_tick = 0;
    EntityId affected_service;
    std::set<std::string> symptom_attributes;
    // Ground truth, attached after the fact for scoring and lattice learning.
    // Never placed in a context pack.
    std::optional<FaultKind> root_cause_label;
    std::vector<ActionRecord> actions;
    bool resolved = false;
    std::optional<Tick> ticks_to_resolve;
    int max_severity = 0;
    // Alerting entities plus the nodes hosting alerting pods.
    std::set<EntityId> entities;
    std::vector<double> feature_vector;

    bool operator==(const Episode&) const = default;
};

nlohmann::json to_json(const Episode& e);
Episode episode_from_json(const nlohmann::json& j);

// Span of ticks that maps to a duration scalar of 1.0.
inline constexpr double kDurationScale = 50.0;

// Symptom one-hots, then duration, max severity, and category one-hots.
std::size_t embedding_dimension(const Vocabulary& vocab = Vocabulary::standard());
std::vector<double> embed(const Episode& ep, const Vocabulary& vocab = Vocabulary::standard());

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct ScoredEpisode {
    Episode episode;
    double similarity = 0.0;
};

// Any populated criterion matches (logical or).
struct ForgetCriteria {
    std::optional<Tick> ttl_ticks;
    Tick now = 0;
    std::set<EntityId> entities;
    std::optional<std::string> incident;
};

// Exact (brute-force) cosine store. Forgotten episodes stay on record for audit
// but never surface in search.
class EpisodicStore {
public:
    explicit EpisodicStore(std::size_t dimension = embedding_dimension()) : dim_(dimension) {}

    void add(Episode ep);

    // Top-k by cosine, descending; ties go to the newer end_tick, then smaller id.
    std::vector<ScoredEpisode> search(std::span<const double> query, std::size_t k) const;

    std::size_t forget(const ForgetCriteria& criteria);

    bool contains(const std::string& id) const;
    bool is_forgotten(const std::string& id) const;
    const Episode& get(const std::string& id) const;

    std::size_t total() const { return episodes_.size(); }
    std::size_t live() const;
    std::vector<Episode> live_episodes() const;
    const std::vector<Episode>& history() const { return episodes_; }
    std::size_t dimension() const { return dim_; }

    void export_jsonl(std::ostream& out) const;
    static EpisodicStore import_jsonl(std::istream& in);

private:
    std::size_t dim_;
    std::vector<Episode> episodes_;
    std::vector<bool> forgotten_;
    std::map<std::string, std::size_t> index_;
};

} // namespace life
