#pragma once

#include "life/episodic.hpp"
#include "life/knowledge_graph.hpp"
#include "life/rule.hpp"

#include <boost/dynamic_bitset.hpp>

#include <iosfwd>

namespace life {

// Attribute sets are bitmasks over a context's attribute indices; desk-scale
// contexts are limited to 64 attributes.
using AttrMask = std::uint64_t;
using ObjectSet = boost::dynamic_bitset<>;

inline constexpr std::size_t kMaxAttributes = 64;

class FormalContext {
public:
    FormalContext() = default;
    FormalContext(std::vector<std::string> objects, std::vector<std::string> attributes, std::vector<AttrMask> rows);

    std::size_t object_count() const { return objects_.size(); }
    std::size_t attribute_count() const { return attributes_.size(); }
    const std::vector<std::string>& objects() const { return objects_; }
    const std::vector<std::string>& attributes() const { return attributes_; }
    AttrMask row(std::size_t object) const { return rows_[object]; }
    bool incidence(std::size_t object, std::size_t attribute) const { return (rows_[object] >> attribute) & 1U; }
    AttrMask all_attributes() const;
    ObjectSet all_objects() const { return ObjectSet(objects_.size()).set(); }

    std::optional<std::size_t> attribute_index(std::string_view name) const;
    // Throws when a name is not an attribute of this context.
    AttrMask mask_of(const std::set<std::string>& names) const;
    std::set<std::string> names_of(AttrMask mask) const;
    std::vector<std::string> object_names(const ObjectSet& objs) const;

    // Header: "object,<attr>,..." then one 0/1 row per object.
    void export_csv(std::ostream& out) const;
    static FormalContext import_csv(std::istream& in);

private:
    std::vector<std::string> objects_;
    std::vector<std::string> attributes_;
    std::vector<AttrMask> rows_;
};

// Prime operators.
ObjectSet derive(const FormalContext& ctx, AttrMask attrs);
AttrMask derive(const FormalContext& ctx, const ObjectSet& objs);
AttrMask closure(const FormalContext& ctx, AttrMask attrs);

struct FormalConcept {
    ObjectSet extent;
    AttrMask intent = 0;
    bool operator==(const FormalConcept&) const = default;
};

struct EnumerationStats {
    std::size_t closures = 0;
};

// All concepts in lectic order of their intents (NextClosure).
std::vector<FormalConcept> enumerate_concepts(const FormalContext& ctx, EnumerationStats* stats = nullptr);

bool lattice_leq(const FormalConcept& a, const FormalConcept& b);
FormalConcept concept_meet(const FormalContext& ctx, const FormalConcept& a, const FormalConcept& b);
FormalConcept concept_join(const FormalContext& ctx, const FormalConcept& a, const FormalConcept& b);

// One object per episode; attributes are the symptoms, cause_ and resolved_by_
// labels that actually occur, in vocabulary order.
FormalContext build_context(const std::vector<Episode>& episodes, const Vocabulary& vocab = Vocabulary::standard());

struct RuleMeasure {
    double support = 0.0;
    double confidence = 0.0;
    ObjectSet supporting;
};

// Exact counts of antecedent -> consequent over the context. Empty when the
// antecedent has no objects or names an attribute absent from the context.
std::optional<RuleMeasure> measure_rule(const FormalContext& ctx, const std::set<std::string>& antecedent,
                                        const std::set<std::string>& consequent);

struct MiningStats {
    std::size_t concepts = 0;
    std::size_t closures = 0;
};

// Symptom -> outcome rules read off the concept intents. For every intent I
// that carries outcome labels O and every nonempty A within I's symptom part,
// A -> O is kept when its exact support and confidence clear the thresholds.
std::vector<Rule> mine_rules(const FormalContext& ctx, double min_support, double min_confidence, Tick now = 0,
                             MiningStats* stats = nullptr);

struct ConsistencyResult {
    bool pass = false;
    std::string reason;
    explicit operator bool() const { return pass; }
};

ConsistencyResult check_consistency(const Rule& rule, const KnowledgeGraph& kg, const EpisodicStore& episodes,
                                    const Vocabulary& vocab = Vocabulary::standard());

// True when every provenance episode touches an entity the graph marks decommissioned.
bool provenance_decommissioned(const Rule& rule, const KnowledgeGraph& kg, const EpisodicStore& episodes);

// Upserts validated rules as Rule nodes. Throws, before changing anything, if
// any rule has not passed check_consistency.
std::size_t inject_rules(std::span<const Rule> rules, KnowledgeGraph& kg, Tick now, std::int64_t episode_counter);

struct RetireCriteria {
    bool decommissioned_provenance = false;
    std::optional<double> confidence_floor;
    std::optional<std::int64_t> max_unconfirmed_episodes;
    std::int64_t current_episode = 0;
};

std::size_t retire_rules(KnowledgeGraph& kg, const RetireCriteria& criteria, const EpisodicStore& episodes);

struct IllParams {
    double min_support = 0.2;
    double min_confidence = 0.8;
    double confidence_floor = 0.5;
    std::int64_t max_unconfirmed_episodes = 50;
    int cadence = 5;

    static IllParams from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct IllReport {
    FormalContext context;
    std::size_t concepts = 0;
    std::size_t closures = 0;
    std::size_t mined = 0;
    std::size_t injected = 0;
    std::size_t retired = 0;
    std::vector<std::pair<std::string, std::string>> rejected; // rule id, reason
};

// build_context -> enumerate -> mine -> check -> inject -> re-measure -> retire,
// over the live episodes in the store.
IllReport run_ill(const EpisodicStore& episodes, KnowledgeGraph& kg, const IllParams& params, Tick now,
                  std::int64_t episode_counter);

} // namespace life
