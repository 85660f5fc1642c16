#include "life/ill.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <sstream>

using namespace life;

namespace {

FormalContext tiny() {
    // g0 {a,b}  g1 {b,c}  g2 {a,b,c}  g3 {c}
    return FormalContext({"g0", "g1", "g2", "g3"}, {"a", "b", "c"}, {0b011, 0b110, 0b111, 0b100});
}

std::set<std::pair<std::vector<bool>, AttrMask>> as_set(const std::vector<FormalConcept>& cs) {
    std::set<std::pair<std::vector<bool>, AttrMask>> out;
    for (const auto& c : cs) {
        std::vector<bool> ext(c.extent.size());
        for (std::size_t i = 0; i < c.extent.size(); ++i)
            ext[i] = c.extent[i];
        out.emplace(std::move(ext), c.intent);
    }
    return out;
}

bool subset(const ObjectSet& a, const ObjectSet& b) { return a.is_subset_of(b); }

Episode episode(const std::string& id, std::set<std::string> symptoms, std::optional<FaultKind> cause,
                std::optional<ActionKind> fix, std::set<EntityId> entities = {}) {
    Episode e;
    e.id = id;
    e.start_tick = 0;
    e.end_tick = 5;
    e.affected_service = "svc";
    e.symptom_attributes = std::move(symptoms);
    e.root_cause_label = cause;
    if (fix)
        e.actions.push_back({*fix, "svc", ActionEffect::cleared, 3, "rb"});
    e.entities = std::move(entities);
    e.feature_vector = embed(e);
    return e;
}

KnowledgeGraph fresh_kg() { return bootstrap_kg(ClusterTopology::build(oracle::small_topology()), {}); }

} // namespace

TEST_CASE("context construction validates its input") {
    CHECK_THROWS_AS(FormalContext({"g"}, {"a", "a"}, {0}), Error);
    CHECK_THROWS_AS(FormalContext({"g", "g"}, {"a"}, {0, 0}), Error);
    CHECK_THROWS_AS(FormalContext({"g"}, {"a"}, {0, 1}), Error);
    CHECK_THROWS_AS(FormalContext({"g"}, {"a"}, {0b10}), Error);
    std::vector<std::string> many;
    for (int i = 0; i < 65; ++i)
        many.push_back("m" + std::to_string(i));
    CHECK_THROWS_AS(FormalContext({}, many, {}), Error);
}

TEST_CASE("csv round trip") {
    auto ctx = tiny();
    std::stringstream io;
    ctx.export_csv(io);
    CHECK(io.str() == "object,a,b,c\ng0,1,1,0\ng1,0,1,1\ng2,1,1,1\ng3,0,0,1\n");
    auto back = FormalContext::import_csv(io);
    CHECK(back.objects() == ctx.objects());
    CHECK(back.attributes() == ctx.attributes());
    for (std::size_t g = 0; g < 4; ++g)
        CHECK(back.row(g) == ctx.row(g));
    std::stringstream bad("object,a\ng0,2\n");
    CHECK_THROWS_AS(FormalContext::import_csv(bad), Error);
}

TEST_CASE("prime operators on a small context") {
    auto ctx = tiny();
    CHECK(ctx.object_names(derive(ctx, ctx.mask_of({"a"}))) == std::vector<std::string>{"g0", "g2"});
    CHECK(closure(ctx, ctx.mask_of({"a"})) == ctx.mask_of({"a", "b"}));
    CHECK(closure(ctx, ctx.mask_of({"a", "c"})) == ctx.all_attributes());
    CHECK(derive(ctx, ObjectSet(4)) == ctx.all_attributes());
    CHECK(derive(ctx, 0).count() == 4);
    CHECK_THROWS_AS(ctx.mask_of({"zz"}), Error);
}

TEST_CASE("a small context has six concepts") {
    auto ctx = tiny();
    EnumerationStats st;
    auto cs = enumerate_concepts(ctx, &st);
    CHECK(cs.size() == 6);
    CHECK(st.closures >= cs.size());
    CHECK(as_set(cs) == oracle::concepts(ctx));
}

TEST_CASE("property: NextClosure matches the power-set oracle") {
    Rng gen(1001);
    for (int trial = 0; trial < 60; ++trial) {
        auto ctx = oracle::random_context(gen);
        auto cs = enumerate_concepts(ctx);
        CHECK(as_set(cs) == oracle::concepts(ctx));
        // Lectic order means intents never repeat.
        std::set<AttrMask> intents;
        for (const auto& c : cs)
            CHECK(intents.insert(c.intent).second);
    }
}

TEST_CASE("property: closure and Galois laws") {
    Rng gen(2002);
    for (int trial = 0; trial < 300; ++trial) {
        auto ctx = oracle::random_context(gen);
        const std::size_t m = ctx.attribute_count(), n = ctx.object_count();
        AttrMask a = oracle::random_mask(gen, m), b = a | oracle::random_mask(gen, m);
        CHECK((closure(ctx, a) & a) == a);
        CHECK((closure(ctx, b) & closure(ctx, a)) == closure(ctx, a));
        CHECK(closure(ctx, closure(ctx, a)) == closure(ctx, a));
        ObjectSet objs = oracle::random_objects(gen, n);
        CHECK(subset(objs, derive(ctx, a)) == ((a & derive(ctx, objs)) == a));
    }
}

TEST_CASE("property: meet and join are the lattice bounds") {
    Rng gen(3003);
    for (int trial = 0; trial < 30; ++trial) {
        auto ctx = oracle::random_context(gen, 8, 7);
        auto cs = enumerate_concepts(ctx);
        for (const auto& x : cs)
            for (const auto& y : cs) {
                auto meet = concept_meet(ctx, x, y);
                auto join = concept_join(ctx, x, y);
                CHECK(lattice_leq(meet, x));
                CHECK(lattice_leq(meet, y));
                CHECK(lattice_leq(x, join));
                CHECK(lattice_leq(y, join));
                CHECK(lattice_leq(x, y) == ((y.intent & x.intent) == y.intent));
                for (const auto& z : cs) {
                    if (lattice_leq(z, x) && lattice_leq(z, y))
                        CHECK(lattice_leq(z, meet));
                    if (lattice_leq(x, z) && lattice_leq(y, z))
                        CHECK(lattice_leq(join, z));
                }
            }
    }
}

TEST_CASE("property: mined rules match brute-force counting") {
    Rng gen(4004);
    for (int trial = 0; trial < 100; ++trial) {
        auto ctx = oracle::random_labelled_context(gen);
        const double s = 0.05 + gen.uniform(0.0, 0.5), c = 0.3 + gen.uniform(0.0, 0.7);
        std::set<oracle::MinedRule> got;
        const double n = static_cast<double>(ctx.object_count());
        for (const auto& r : mine_rules(ctx, s, c)) {
            auto k = oracle::count_rule(ctx, ctx.mask_of(r.antecedent), ctx.mask_of(r.consequent));
            CHECK(r.support == static_cast<double>(k.both) / n);
            CHECK(r.confidence == static_cast<double>(k.both) / static_cast<double>(k.antecedent));
            CHECK(r.provenance.size() == k.both);
            CHECK(r.id == rule_id(r.antecedent, r.consequent));
            got.insert({r.antecedent, r.consequent, k.both, k.antecedent});
        }
        CHECK(got == oracle::mine(ctx, s, c));
    }
}

TEST_CASE("mining thresholds are validated") {
    CHECK_THROWS_AS(mine_rules(tiny(), 0.0, 0.5), Error);
    CHECK_THROWS_AS(mine_rules(tiny(), 0.5, 1.5), Error);
}

TEST_CASE("measure_rule") {
    auto ctx = tiny();
    auto m = measure_rule(ctx, {"a"}, {"b"});
    REQUIRE(m);
    CHECK(m->support == 0.5);
    CHECK(m->confidence == 1.0);
    CHECK_FALSE(measure_rule(ctx, {"zz"}, {"b"}));
    auto empty = FormalContext({"g"}, {"a", "b"}, {0b10});
    CHECK_FALSE(measure_rule(empty, {"a"}, {"b"}));
}

TEST_CASE("context from episodes uses vocabulary order and occurring labels") {
    std::vector<Episode> eps = {
        episode("e1", {"latency_spike", "dns_error"}, FaultKind::dns_error_burst, ActionKind::flush_dns_cache),
        episode("e2", {"cpu_high"}, std::nullopt, std::nullopt),
    };
    auto ctx = build_context(eps);
    CHECK(ctx.attributes() == std::vector<std::string>{"cpu_high", "latency_spike", "dns_error",
                                                      "cause_dns_error_burst", "resolved_by_flush_dns_cache"});
    CHECK(ctx.row(0) == 0b11110);
    CHECK(ctx.row(1) == 0b00001);
    CHECK_THROWS_AS(build_context({}), Error);
    CHECK_THROWS_AS(build_context({episode("x", {"cpu_util"}, std::nullopt, std::nullopt)}), Error);
}

TEST_CASE("consistency check reasons") {
    auto kg = fresh_kg();
    EpisodicStore store;
    Rule r;
    r.antecedent = {"dns_error"};
    r.consequent = {"cause_dns_error_burst"};
    r.id = rule_id(r.antecedent, r.consequent);
    r.confidence = 0.9;
    CHECK(check_consistency(r, kg, store));

    Rule bad = r;
    bad.antecedent = {};
    CHECK(check_consistency(bad, kg, store).reason.starts_with("malformed"));
    bad = r;
    bad.antecedent = {"sparkles"};
    CHECK(check_consistency(bad, kg, store).reason.starts_with("unknown_term"));
    bad = r;
    bad.consequent = {"cause_meteor"};
    CHECK(check_consistency(bad, kg, store).reason.starts_with("unknown_term"));

    KnowledgeGraph missing_kind;
    for (const auto& s : Vocabulary::standard().symptoms())
        missing_kind.declare(s, "Attribute");
    CHECK(check_consistency(r, missing_kind, store).reason.starts_with("not_a_fault_kind"));

    Rule other = r;
    other.consequent = {"cause_ingress_throttle"};
    other.id = rule_id(other.antecedent, other.consequent);
    other.confidence = 0.95;
    other.status = RuleStatus::validated;
    kg.put_rule(other);
    CHECK(check_consistency(r, kg, store).reason.starts_with("contradiction"));
    r.confidence = 0.97;
    CHECK(check_consistency(r, kg, store));
}

TEST_CASE("decommissioned provenance fails the check") {
    auto kg = fresh_kg();
    EpisodicStore store;
    store.add(episode("e1", {"cpu_high"}, FaultKind::noisy_neighbor, ActionKind::throttle_tenant, {"n3", "p3"}));
    store.add(episode("e2", {"cpu_high"}, FaultKind::noisy_neighbor, ActionKind::throttle_tenant, {"n1"}));
    Rule r;
    r.antecedent = {"cpu_high"};
    r.consequent = {"cause_noisy_neighbor"};
    r.id = rule_id(r.antecedent, r.consequent);
    r.provenance = {"e1"};
    CHECK(check_consistency(r, kg, store));
    kg.assert_triple({"n3", "decommissioned", "true", true, Provenance::operator_input});
    CHECK(provenance_decommissioned(r, kg, store));
    CHECK(check_consistency(r, kg, store).reason == "decommissioned");
    r.provenance = {"e1", "e2"};
    CHECK_FALSE(provenance_decommissioned(r, kg, store));
}

TEST_CASE("injection requires a passing check and writes rule triples") {
    auto kg = fresh_kg();
    Rule r;
    r.antecedent = {"dns_error"};
    r.consequent = {"cause_dns_error_burst", "resolved_by_flush_dns_cache"};
    r.id = rule_id(r.antecedent, r.consequent);
    std::vector<Rule> batch{r};
    CHECK_THROWS_AS(inject_rules(batch, kg, 10, 1), Error);
    CHECK(kg.rules().empty());
    batch[0].consistent = true;
    CHECK(inject_rules(batch, kg, 10, 1) == 1);
    const Rule* in = kg.find_rule(r.id);
    REQUIRE(in);
    CHECK(in->status == RuleStatus::validated);
    CHECK(kg.class_of(r.id) == "Rule");
    CHECK(kg.query({r.id, "indicates", std::nullopt}).size() == 1);
    CHECK(kg.query({r.id, "recommends", std::nullopt}).size() == 1);
    CHECK(kg.query({"dns_error_burst", "remedied_by", "flush_dns_cache"}).size() == 1);
    CHECK(kg.validate_all().empty());

    // Retire, then learn the same shape again.
    EpisodicStore store;
    RetireCriteria rc;
    rc.confidence_floor = 0.5;
    CHECK(retire_rules(kg, rc, store) == 1);
    CHECK(kg.find_rule(r.id)->retire_reason == "confidence_decay");
    CHECK(kg.query({r.id, std::nullopt, std::nullopt}).empty());
    inject_rules(batch, kg, 20, 2);
    CHECK(kg.find_rule(r.id)->status == RuleStatus::retired);
    REQUIRE(kg.find_rule(r.id + "@2"));
    CHECK(kg.find_rule(r.id + "@2")->status == RuleStatus::validated);
}

TEST_CASE("retirement by staleness") {
    auto kg = fresh_kg();
    Rule r;
    r.antecedent = {"cpu_high"};
    r.consequent = {"cause_noisy_neighbor"};
    r.id = rule_id(r.antecedent, r.consequent);
    r.confidence = 1.0;
    r.consistent = true;
    std::vector<Rule> batch{r};
    inject_rules(batch, kg, 0, 3);
    EpisodicStore store;
    RetireCriteria rc;
    rc.max_unconfirmed_episodes = 10;
    rc.current_episode = 13;
    CHECK(retire_rules(kg, rc, store) == 0);
    rc.current_episode = 14;
    CHECK(retire_rules(kg, rc, store) == 1);
    CHECK(kg.find_rule(r.id)->retire_reason == "unconfirmed");
}

TEST_CASE("learning pipeline end to end") {
    auto kg = fresh_kg();
    EpisodicStore store;
    for (int i = 0; i < 4; ++i)
        store.add(episode("d" + std::to_string(i), {"dns_error", "latency_spike"}, FaultKind::dns_error_burst,
                          ActionKind::flush_dns_cache, {"p3"}));
    store.add(episode("n0", {"cpu_high", "disk_high"}, FaultKind::noisy_neighbor, ActionKind::throttle_tenant,
                      {"n3"}));
    IllParams p;
    auto rep = run_ill(store, kg, p, 100, 5);
    CHECK(rep.context.object_count() == 5);
    CHECK(rep.mined > 0);
    CHECK(rep.injected == rep.mined - rep.rejected.size());
    CHECK(kg.find_rule("rule:dns_error->cause_dns_error_burst+resolved_by_flush_dns_cache"));
    // One noisy episode in five sits exactly on min_support.
    CHECK(kg.find_rule("rule:cpu_high+disk_high->cause_noisy_neighbor+resolved_by_throttle_tenant"));

    kg.assert_triple({"n3", "decommissioned", "true", true, Provenance::operator_input});
    ForgetCriteria by_node;
    by_node.entities = {"n3"};
    store.forget(by_node);
    auto again = run_ill(store, kg, p, 200, 6);
    CHECK(again.retired >= 1);
    const Rule* noisy = kg.find_rule("rule:cpu_high+disk_high->cause_noisy_neighbor+resolved_by_throttle_tenant");
    REQUIRE(noisy);
    CHECK(noisy->status == RuleStatus::retired);
    CHECK(noisy->retire_reason == "decommissioned");
    CHECK(kg.find_rule("rule:dns_error->cause_dns_error_burst+resolved_by_flush_dns_cache")->status ==
          RuleStatus::validated);
}

TEST_CASE("ill params json") {
    CHECK_THROWS_AS(IllParams::from_json({{"cadence", 0}}), Error);
    auto p = IllParams::from_json({{"min_support", 0.3}});
    CHECK(IllParams::from_json(p.to_json()).min_support == 0.3);
}
