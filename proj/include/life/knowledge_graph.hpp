#pragma once

#include "life/cluster_sim.hpp"
#include "life/policy.hpp"
#include "life/rule.hpp"

#include <iosfwd>

namespace life {

enum class Provenance { bootstrap, ill, operator_input };

std::string_view to_string(Provenance p);

struct Triple {
    std::string subject;
    std::string predicate;
    std::string object;
    bool literal = false; // object is a literal value rather than an entity
    Provenance provenance = Provenance::bootstrap;
    Tick asserted_tick = 0;

    bool same_fact(const Triple& o) const {
        return subject == o.subject && predicate == o.predicate && object == o.object && literal == o.literal;
    }
    bool operator==(const Triple&) const = default;
};

nlohmann::json to_json(const Triple& t);

struct TriplePattern {
    std::optional<std::string> subject;
    std::optional<std::string> predicate;
    std::optional<std::string> object;

    bool matches(const Triple& t) const;
};

struct RelationSignature {
    std::string domain;
    std::string range; // kLiteralClass for literal-valued relations
};

inline constexpr std::string_view kLiteralClass = "Literal";

// Class hierarchy (single parent) plus relation signatures.
class Ontology {
public:
    static Ontology standard();

    void add_class(const std::string& name, std::optional<std::string> parent = std::nullopt);
    void add_relation(const std::string& id, RelationSignature sig);

    bool has_class(const std::string& name) const { return classes_.contains(name); }
    bool is_subclass(const std::string& cls, const std::string& ancestor) const;
    const RelationSignature* relation(const std::string& id) const;
    const std::map<std::string, RelationSignature>& relations() const { return relations_; }
    const std::map<std::string, std::optional<std::string>>& classes() const { return classes_; }

private:
    std::map<std::string, std::optional<std::string>> classes_;
    std::map<std::string, RelationSignature> relations_;
};

struct AssertResult {
    bool accepted = false;
    bool inserted = false; // false for rejections and duplicate no-ops
    std::string reason;
    explicit operator bool() const { return accepted; }
};

// In-memory triple store validated against an ontology. Retracted triples are
// tombstoned, not erased, so the assertion history stays auditable. Rule nodes
// keep their numeric fields in a side table keyed by rule id.
class KnowledgeGraph {
public:
    explicit KnowledgeGraph(Ontology ontology = Ontology::standard());

    const Ontology& ontology() const { return ontology_; }

    void declare(const EntityId& entity, const std::string& cls);
    std::optional<std::string> class_of(const EntityId& entity) const;
    const std::map<EntityId, std::string>& entities() const { return classes_; }

    // Explains why the triple would be rejected; empty when it would be accepted.
    std::string check(const Triple& t) const;
    AssertResult assert_triple(Triple t);

    // At least one position must be bound. Results sorted by (subject, predicate, object).
    std::vector<Triple> query(const TriplePattern& pattern) const;
    // Live triples within `radius` hops of the entity, treating triples as
    // undirected edges. Radius 0 yields the triples that mention the entity.
    std::vector<Triple> subgraph(const EntityId& entity, int radius) const;
    std::size_t retract(const TriplePattern& pattern);

    // Full scan; one message per live triple that fails its signature.
    std::vector<std::string> validate_all() const;

    bool is_decommissioned(const EntityId& entity) const;

    std::size_t live_count() const;
    std::size_t total_count() const { return triples_.size(); }
    std::vector<Triple> live_triples() const;

    const std::map<std::string, Rule>& rules() const { return rules_; }
    const Rule* find_rule(const std::string& id) const;
    Rule& rule_mut(const std::string& id);
    void put_rule(Rule r);
    // Drops a rule record and retracts its triples. Normal operation retires
    // rules instead; this exists for counterfactual comparisons.
    bool erase_rule(const std::string& id);
    std::vector<Rule> rules_with_status(RuleStatus s) const;

    // Header line, then `is_a` declarations, then live triples; tab-separated
    // subject/predicate/object/provenance. Literal objects are double-quoted.
    void export_tsv(std::ostream& out) const;
    static KnowledgeGraph import_tsv(std::istream& in, Ontology ontology = Ontology::standard());

private:
    Ontology ontology_;
    std::map<EntityId, std::string> classes_;
    std::vector<Triple> triples_;
    std::vector<bool> tombstoned_;
    std::map<std::string, Rule> rules_;
};

// Topology, fault kinds, actions, attribute vocabulary and policy constraints.
KnowledgeGraph bootstrap_kg(const ClusterTopology& topo, const PolicySet& policies);

} // namespace life
