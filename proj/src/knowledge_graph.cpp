#include "life/knowledge_graph.hpp"

#include "life/ingest.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>

namespace life {

using nlohmann::json;

std::string_view to_string(Provenance p) {
    switch (p) {
    case Provenance::bootstrap:
        return "bootstrap";
    case Provenance::ill:
        return "ill";
    case Provenance::operator_input:
        return "operator";
    }
    return "unknown";
}

namespace {

std::optional<Provenance> parse_provenance(std::string_view s) {
    for (Provenance p : {Provenance::bootstrap, Provenance::ill, Provenance::operator_input})
        if (to_string(p) == s)
            return p;
    return std::nullopt;
}

bool triple_less(const Triple& a, const Triple& b) {
    return std::tie(a.subject, a.predicate, a.object, a.literal) < std::tie(b.subject, b.predicate, b.object, b.literal);
}

std::string describe(const std::string& rel, const RelationSignature& sig) {
    return rel + "(" + sig.domain + "," + sig.range + ")";
}

} // namespace

json to_json(const Triple& t) {
    return {{"subject", t.subject},       {"predicate", t.predicate},         {"object", t.object},
            {"literal", t.literal},       {"provenance", to_string(t.provenance)}, {"asserted_tick", t.asserted_tick}};
}

bool TriplePattern::matches(const Triple& t) const {
    return (!subject || *subject == t.subject) && (!predicate || *predicate == t.predicate) &&
           (!object || *object == t.object);
}

// ---------------------------------------------------------------------------
// Ontology

Ontology Ontology::standard() {
    Ontology o;
    for (const char* c : {"Node", "Rack", "ToRSwitch", "Pod", "Service", "FaultKind", "Action", "Policy",
                          "AttributeSet", "Attribute"})
        o.add_class(c);
    o.add_class("Rule", "AttributeSet");

    o.add_relation("runs_on", {"Pod", "Node"});
    o.add_relation("member_of", {"Node", "Rack"});
    o.add_relation("uplink", {"Rack", "ToRSwitch"});
    o.add_relation("depends_on", {"Service", "Service"});
    o.add_relation("serves", {"Pod", "Service"});
    o.add_relation("indicates", {"AttributeSet", "FaultKind"});
    o.add_relation("remedied_by", {"FaultKind", "Action"});
    o.add_relation("constrained_by", {"Action", "Policy"});
    o.add_relation("decommissioned", {"Node", std::string(kLiteralClass)});
    o.add_relation("has_attribute", {"AttributeSet", "Attribute"});
    o.add_relation("recommends", {"Rule", "Action"});
    return o;
}

void Ontology::add_class(const std::string& name, std::optional<std::string> parent) {
    if (name == kLiteralClass)
        throw Error("ontology: '" + name + "' is reserved");
    if (parent && !classes_.contains(*parent))
        throw Error("ontology: unknown parent class '" + *parent + "'");
    if (!classes_.emplace(name, std::move(parent)).second)
        throw Error("ontology: duplicate class '" + name + "'");
}

void Ontology::add_relation(const std::string& id, RelationSignature sig) {
    if (relations_.contains(id))
        throw Error("ontology: duplicate relation '" + id + "'");
    if (!classes_.contains(sig.domain))
        throw Error("ontology: relation '" + id + "' has unknown domain '" + sig.domain + "'");
    if (sig.range != kLiteralClass && !classes_.contains(sig.range))
        throw Error("ontology: relation '" + id + "' has unknown range '" + sig.range + "'");
    relations_.emplace(id, std::move(sig));
}

bool Ontology::is_subclass(const std::string& cls, const std::string& ancestor) const {
    std::optional<std::string> cur = cls;
    while (cur) {
        if (*cur == ancestor)
            return true;
        auto it = classes_.find(*cur);
        if (it == classes_.end())
            return false;
        cur = it->second;
    }
    return false;
}

const RelationSignature* Ontology::relation(const std::string& id) const {
    auto it = relations_.find(id);
    return it == relations_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// Knowledge graph

KnowledgeGraph::KnowledgeGraph(Ontology ontology) : ontology_(std::move(ontology)) {}

void KnowledgeGraph::declare(const EntityId& entity, const std::string& cls) {
    if (!ontology_.has_class(cls))
        throw Error("kg: unknown class '" + cls + "'");
    auto [it, inserted] = classes_.emplace(entity, cls);
    if (!inserted && it->second != cls)
        throw Error("kg: '" + entity + "' already declared as " + it->second);
}

std::optional<std::string> KnowledgeGraph::class_of(const EntityId& entity) const {
    auto it = classes_.find(entity);
    if (it == classes_.end())
        return std::nullopt;
    return it->second;
}

std::string KnowledgeGraph::check(const Triple& t) const {
    const RelationSignature* sig = ontology_.relation(t.predicate);
    if (!sig)
        return "unknown predicate '" + t.predicate + "'";
    const std::string where = describe(t.predicate, *sig);

    auto subj = class_of(t.subject);
    if (!subj)
        return where + ": domain violation, subject '" + t.subject + "' is undeclared";
    if (!ontology_.is_subclass(*subj, sig->domain))
        return where + ": domain violation, subject '" + t.subject + "' is " + *subj;

    if (sig->range == kLiteralClass) {
        if (!t.literal)
            return where + ": range violation, object '" + t.object + "' must be a literal";
        return {};
    }
    if (t.literal)
        return where + ": range violation, literal '" + t.object + "' where " + sig->range + " expected";
    auto obj = class_of(t.object);
    if (!obj)
        return where + ": range violation, object '" + t.object + "' is undeclared";
    if (!ontology_.is_subclass(*obj, sig->range))
        return where + ": range violation, object '" + t.object + "' is " + *obj;
    return {};
}

AssertResult KnowledgeGraph::assert_triple(Triple t) {
    if (std::string why = check(t); !why.empty())
        return {false, false, std::move(why)};
    for (std::size_t i = 0; i < triples_.size(); ++i)
        if (!tombstoned_[i] && triples_[i].same_fact(t))
            return {true, false, {}};
    triples_.push_back(std::move(t));
    tombstoned_.push_back(false);
    return {true, true, {}};
}

std::vector<Triple> KnowledgeGraph::query(const TriplePattern& p) const {
    if (!p.subject && !p.predicate && !p.object)
        throw Error("kg: query pattern needs at least one bound position");
    std::vector<Triple> out;
    for (std::size_t i = 0; i < triples_.size(); ++i)
        if (!tombstoned_[i] && p.matches(triples_[i]))
            out.push_back(triples_[i]);
    std::sort(out.begin(), out.end(), triple_less);
    return out;
}

std::vector<Triple> KnowledgeGraph::subgraph(const EntityId& entity, int radius) const {
    if (radius < 0)
        throw Error("kg: radius must be >= 0");
    std::map<std::string, std::vector<std::string>> adj;
    for (std::size_t i = 0; i < triples_.size(); ++i) {
        if (tombstoned_[i] || triples_[i].literal)
            continue;
        adj[triples_[i].subject].push_back(triples_[i].object);
        adj[triples_[i].object].push_back(triples_[i].subject);
    }

    // Ball of max(radius, 1) hops; a triple is in the subgraph when both of its
    // endpoints are inside the ball and at least one is within `radius`.
    const int reach = std::max(radius, 1);
    std::map<std::string, int> dist{{entity, 0}};
    std::queue<std::string> frontier;
    frontier.push(entity);
    while (!frontier.empty()) {
        std::string cur = frontier.front();
        frontier.pop();
        int d = dist[cur];
        if (d == reach)
            continue;
        auto it = adj.find(cur);
        if (it == adj.end())
            continue;
        for (const auto& nb : it->second)
            if (dist.emplace(nb, d + 1).second)
                frontier.push(nb);
    }

    auto within = [&](const std::string& e, int limit) {
        auto it = dist.find(e);
        return it != dist.end() && it->second <= limit;
    };
    std::vector<Triple> out;
    for (std::size_t i = 0; i < triples_.size(); ++i) {
        if (tombstoned_[i])
            continue;
        const Triple& t = triples_[i];
        bool in = t.literal ? within(t.subject, radius)
                            : within(t.subject, reach) && within(t.object, reach) &&
                                  (within(t.subject, radius) || within(t.object, radius));
        if (in)
            out.push_back(t);
    }
    std::sort(out.begin(), out.end(), triple_less);
    return out;
}

std::size_t KnowledgeGraph::retract(const TriplePattern& p) {
    if (!p.subject && !p.predicate && !p.object)
        throw Error("kg: retract pattern needs at least one bound position");
    std::size_t n = 0;
    for (std::size_t i = 0; i < triples_.size(); ++i) {
        if (!tombstoned_[i] && p.matches(triples_[i])) {
            tombstoned_[i] = true;
            ++n;
        }
    }
    return n;
}

std::vector<std::string> KnowledgeGraph::validate_all() const {
    std::vector<std::string> problems;
    for (std::size_t i = 0; i < triples_.size(); ++i)
        if (!tombstoned_[i])
            if (std::string why = check(triples_[i]); !why.empty())
                problems.push_back(triples_[i].subject + " " + triples_[i].predicate + " " + triples_[i].object +
                                   ": " + why);
    return problems;
}

bool KnowledgeGraph::is_decommissioned(const EntityId& entity) const {
    for (std::size_t i = 0; i < triples_.size(); ++i) {
        const Triple& t = triples_[i];
        if (!tombstoned_[i] && t.predicate == "decommissioned" && t.subject == entity && t.object == "true")
            return true;
    }
    return false;
}

std::size_t KnowledgeGraph::live_count() const {
    return static_cast<std::size_t>(std::count(tombstoned_.begin(), tombstoned_.end(), false));
}

std::vector<Triple> KnowledgeGraph::live_triples() const {
    std::vector<Triple> out;
    for (std::size_t i = 0; i < triples_.size(); ++i)
        if (!tombstoned_[i])
            out.push_back(triples_[i]);
    std::sort(out.begin(), out.end(), triple_less);
    return out;
}

const Rule* KnowledgeGraph::find_rule(const std::string& id) const {
    auto it = rules_.find(id);
    return it == rules_.end() ? nullptr : &it->second;
}

Rule& KnowledgeGraph::rule_mut(const std::string& id) {
    auto it = rules_.find(id);
    if (it == rules_.end())
        throw Error("kg: unknown rule '" + id + "'");
    return it->second;
}

void KnowledgeGraph::put_rule(Rule r) {
    std::string id = r.id;
    rules_.insert_or_assign(std::move(id), std::move(r));
}

bool KnowledgeGraph::erase_rule(const std::string& id) {
    if (!rules_.erase(id))
        return false;
    retract({id, std::nullopt, std::nullopt});
    return true;
}

std::vector<Rule> KnowledgeGraph::rules_with_status(RuleStatus s) const {
    std::vector<Rule> out;
    for (const auto& [id, r] : rules_)
        if (r.status == s)
            out.push_back(r);
    return out;
}

void KnowledgeGraph::export_tsv(std::ostream& out) const {
    out << "# life-kg v1\n";
    for (const auto& [entity, cls] : classes_)
        out << entity << "\tis_a\t" << cls << "\tbootstrap\n";
    for (const auto& t : live_triples()) {
        out << t.subject << '\t' << t.predicate << '\t' << (t.literal ? "\"" + t.object + "\"" : t.object) << '\t'
            << to_string(t.provenance) << '\n';
    }
}

KnowledgeGraph KnowledgeGraph::import_tsv(std::istream& in, Ontology ontology) {
    KnowledgeGraph kg(std::move(ontology));
    std::string line;
    if (!std::getline(in, line) || line != "# life-kg v1")
        throw Error("kg import: missing or unsupported header");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, '\t'))
            cols.push_back(col);
        if (cols.size() != 4)
            throw Error("kg import: line " + std::to_string(lineno) + " does not have 4 columns");
        if (cols[1] == "is_a") {
            kg.declare(cols[0], cols[2]);
            continue;
        }
        auto prov = parse_provenance(cols[3]);
        if (!prov)
            throw Error("kg import: line " + std::to_string(lineno) + " has bad provenance");
        Triple t{cols[0], cols[1], cols[2], false, *prov, 0};
        if (t.object.size() >= 2 && t.object.front() == '"' && t.object.back() == '"') {
            t.object = t.object.substr(1, t.object.size() - 2);
            t.literal = true;
        }
        if (auto r = kg.assert_triple(t); !r)
            throw Error("kg import: line " + std::to_string(lineno) + ": " + r.reason);
    }
    return kg;
}

KnowledgeGraph bootstrap_kg(const ClusterTopology& topo, const PolicySet& policies) {
    KnowledgeGraph kg;
    for (const auto& rack : topo.racks()) {
        kg.declare(rack, "Rack");
        kg.declare(topo.switch_of_rack(rack), "ToRSwitch");
    }
    for (const auto& [id, info] : topo.nodes())
        kg.declare(id, "Node");
    for (const auto& [svc, pods] : topo.services())
        kg.declare(svc, "Service");
    for (const auto& [pod, node] : topo.pods())
        kg.declare(pod, "Pod");
    for (FaultKind k : kAllFaultKinds)
        kg.declare(std::string(to_string(k)), "FaultKind");
    for (ActionKind a : kAllActionKinds)
        kg.declare(std::string(to_string(a)), "Action");
    for (const auto& s : Vocabulary::standard().symptoms())
        kg.declare(s, "Attribute");

    auto must = [&](Triple t) {
        if (auto r = kg.assert_triple(std::move(t)); !r)
            throw Error("kg bootstrap: " + r.reason);
    };
    for (const auto& rack : topo.racks())
        must({rack, "uplink", topo.switch_of_rack(rack)});
    for (const auto& [id, info] : topo.nodes())
        must({id, "member_of", info.rack});
    for (const auto& [pod, node] : topo.pods()) {
        must({pod, "runs_on", node});
        must({pod, "serves", topo.service_of_pod(pod)});
    }
    for (const auto& [caller, callee] : topo.dependencies())
        must({caller, "depends_on", callee});
    for (const auto& [action, policy] : policies.constraints) {
        kg.declare(policy, "Policy");
        must({std::string(to_string(action)), "constrained_by", policy});
    }
    return kg;
}

} // namespace life
