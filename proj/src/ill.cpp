#include "life/ill.hpp"

#include <algorithm>
#include <bit>
#include <istream>
#include <ostream>
#include <sstream>

namespace life {

using nlohmann::json;

namespace {

AttrMask bit(std::size_t i) { return AttrMask{1} << i; }

AttrMask lower_than(std::size_t i) { return i == 0 ? 0 : (i >= 64 ? ~AttrMask{0} : bit(i) - 1); }

} // namespace

// ---------------------------------------------------------------------------
// Formal context

FormalContext::FormalContext(std::vector<std::string> objects, std::vector<std::string> attributes,
                             std::vector<AttrMask> rows)
    : objects_(std::move(objects)), attributes_(std::move(attributes)), rows_(std::move(rows)) {
    if (attributes_.size() > kMaxAttributes)
        throw Error("context: more than 64 attributes");
    if (rows_.size() != objects_.size())
        throw Error("context: incidence has " + std::to_string(rows_.size()) + " rows for " +
                    std::to_string(objects_.size()) + " objects");
    auto no_dups = [](std::vector<std::string> v, const char* what) {
        std::sort(v.begin(), v.end());
        if (std::adjacent_find(v.begin(), v.end()) != v.end())
            throw Error(std::string("context: duplicate ") + what + " id");
    };
    no_dups(objects_, "object");
    no_dups(attributes_, "attribute");
    const AttrMask all = all_attributes();
    for (AttrMask r : rows_)
        if (r & ~all)
            throw Error("context: incidence row wider than the attribute list");
}

AttrMask FormalContext::all_attributes() const { return lower_than(attributes_.size()); }

std::optional<std::size_t> FormalContext::attribute_index(std::string_view name) const {
    for (std::size_t i = 0; i < attributes_.size(); ++i)
        if (attributes_[i] == name)
            return i;
    return std::nullopt;
}

AttrMask FormalContext::mask_of(const std::set<std::string>& names) const {
    AttrMask m = 0;
    for (const auto& n : names) {
        auto i = attribute_index(n);
        if (!i)
            throw Error("context: unknown attribute '" + n + "'");
        m |= bit(*i);
    }
    return m;
}

std::set<std::string> FormalContext::names_of(AttrMask mask) const {
    std::set<std::string> out;
    for (std::size_t i = 0; i < attributes_.size(); ++i)
        if (mask & bit(i))
            out.insert(attributes_[i]);
    return out;
}

std::vector<std::string> FormalContext::object_names(const ObjectSet& objs) const {
    std::vector<std::string> out;
    for (auto i = objs.find_first(); i != ObjectSet::npos; i = objs.find_next(i))
        out.push_back(objects_[i]);
    return out;
}

void FormalContext::export_csv(std::ostream& out) const {
    out << "object";
    for (const auto& a : attributes_)
        out << ',' << a;
    out << '\n';
    for (std::size_t o = 0; o < objects_.size(); ++o) {
        out << objects_[o];
        for (std::size_t a = 0; a < attributes_.size(); ++a)
            out << ',' << (incidence(o, a) ? '1' : '0');
        out << '\n';
    }
}

FormalContext FormalContext::import_csv(std::istream& in) {
    auto split = [](const std::string& line) {
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ','))
            cols.push_back(c);
        if (!line.empty() && line.back() == ',')
            cols.emplace_back();
        return cols;
    };
    std::string line;
    if (!std::getline(in, line))
        throw Error("context csv: missing header");
    auto header = split(line);
    if (header.empty() || header[0] != "object")
        throw Error("context csv: header must start with 'object'");
    std::vector<std::string> attrs(header.begin() + 1, header.end());
    std::vector<std::string> objects;
    std::vector<AttrMask> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        auto cols = split(line);
        if (cols.size() != header.size())
            throw Error("context csv: row '" + cols.front() + "' has the wrong number of cells");
        AttrMask r = 0;
        for (std::size_t a = 0; a < attrs.size(); ++a) {
            if (cols[a + 1] == "1")
                r |= bit(a);
            else if (cols[a + 1] != "0")
                throw Error("context csv: cells must be 0 or 1");
        }
        objects.push_back(cols[0]);
        rows.push_back(r);
    }
    return FormalContext(std::move(objects), std::move(attrs), std::move(rows));
}

// ---------------------------------------------------------------------------
// Derivation and closure

ObjectSet derive(const FormalContext& ctx, AttrMask attrs) {
    ObjectSet out(ctx.object_count());
    for (std::size_t o = 0; o < ctx.object_count(); ++o)
        if ((ctx.row(o) & attrs) == attrs)
            out.set(o);
    return out;
}

AttrMask derive(const FormalContext& ctx, const ObjectSet& objs) {
    if (objs.size() != ctx.object_count())
        throw Error("derive: object set sized for a different context");
    AttrMask out = ctx.all_attributes();
    for (auto i = objs.find_first(); i != ObjectSet::npos; i = objs.find_next(i))
        out &= ctx.row(i);
    return out;
}

AttrMask closure(const FormalContext& ctx, AttrMask attrs) { return derive(ctx, derive(ctx, attrs)); }

std::vector<FormalConcept> enumerate_concepts(const FormalContext& ctx, EnumerationStats* stats) {
    std::vector<FormalConcept> out;
    const std::size_t m = ctx.attribute_count();
    const AttrMask all = ctx.all_attributes();
    std::size_t closures = 1;

    AttrMask current = closure(ctx, 0);
    out.push_back({derive(ctx, current), current});
    while (current != all) {
        bool advanced = false;
        for (std::size_t i = m; i-- > 0;) {
            if (current & bit(i))
                continue;
            const AttrMask prefix = current & lower_than(i);
            const AttrMask candidate = closure(ctx, prefix | bit(i));
            ++closures;
            if ((candidate & lower_than(i)) == prefix) {
                current = candidate;
                advanced = true;
                break;
            }
        }
        if (!advanced)
            break; // unreachable: the full attribute set is always closed
        out.push_back({derive(ctx, current), current});
    }
    if (stats)
        stats->closures += closures;
    return out;
}

bool lattice_leq(const FormalConcept& a, const FormalConcept& b) { return a.extent.is_subset_of(b.extent); }

FormalConcept concept_meet(const FormalContext& ctx, const FormalConcept& a, const FormalConcept& b) {
    ObjectSet ext = a.extent & b.extent;
    return {ext, derive(ctx, ext)};
}

FormalConcept concept_join(const FormalContext& ctx, const FormalConcept& a, const FormalConcept& b) {
    AttrMask in = a.intent & b.intent;
    return {derive(ctx, in), in};
}

// ---------------------------------------------------------------------------
// Context construction and rule mining

FormalContext build_context(const std::vector<Episode>& episodes, const Vocabulary& vocab) {
    if (episodes.empty())
        throw Error("build_context: no episodes");

    std::vector<std::set<std::string>> labels;
    std::set<std::string> seen;
    for (const auto& ep : episodes) {
        std::set<std::string> row;
        for (const auto& a : ep.symptom_attributes) {
            if (!vocab.is_symptom(a))
                throw Error("build_context: attribute '" + a + "' is outside the vocabulary");
            row.insert(a);
        }
        if (ep.root_cause_label)
            row.insert(cause_label(*ep.root_cause_label));
        for (const auto& act : ep.actions)
            if (act.result == ActionEffect::cleared)
                row.insert(resolved_label(act.action));
        seen.insert(row.begin(), row.end());
        labels.push_back(std::move(row));
    }

    std::vector<std::string> attrs;
    for (const auto& s : vocab.symptoms())
        if (seen.contains(s))
            attrs.push_back(s);
    for (FaultKind k : kAllFaultKinds)
        if (seen.contains(cause_label(k)))
            attrs.push_back(cause_label(k));
    for (ActionKind a : kAllActionKinds)
        if (seen.contains(resolved_label(a)))
            attrs.push_back(resolved_label(a));

    std::vector<std::string> objects;
    std::vector<AttrMask> rows;
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        AttrMask r = 0;
        for (std::size_t a = 0; a < attrs.size(); ++a)
            if (labels[i].contains(attrs[a]))
                r |= bit(a);
        objects.push_back(episodes[i].id);
        rows.push_back(r);
    }
    return FormalContext(std::move(objects), std::move(attrs), std::move(rows));
}

std::optional<RuleMeasure> measure_rule(const FormalContext& ctx, const std::set<std::string>& antecedent,
                                        const std::set<std::string>& consequent) {
    AttrMask a = 0, c = 0;
    for (const auto& n : antecedent) {
        auto i = ctx.attribute_index(n);
        if (!i)
            return std::nullopt;
        a |= bit(*i);
    }
    for (const auto& n : consequent) {
        auto i = ctx.attribute_index(n);
        if (!i)
            c = ~AttrMask{0}; // never satisfied
        else if (c != ~AttrMask{0})
            c |= bit(*i);
    }
    const std::size_t ante = derive(ctx, a).count();
    if (ante == 0 || ctx.object_count() == 0)
        return std::nullopt;
    RuleMeasure m;
    m.supporting = c == ~AttrMask{0} ? ObjectSet(ctx.object_count()) : derive(ctx, a | c);
    const std::size_t both = m.supporting.count();
    m.support = static_cast<double>(both) / static_cast<double>(ctx.object_count());
    m.confidence = static_cast<double>(both) / static_cast<double>(ante);
    return m;
}

std::vector<Rule> mine_rules(const FormalContext& ctx, double min_support, double min_confidence, Tick now,
                             MiningStats* stats) {
    if (!(min_support > 0.0 && min_support <= 1.0) || !(min_confidence > 0.0 && min_confidence <= 1.0))
        throw Error("mine_rules: thresholds must lie in (0, 1]");

    AttrMask symptom_mask = 0, outcome_mask = 0;
    for (std::size_t i = 0; i < ctx.attribute_count(); ++i)
        (is_outcome_label(ctx.attributes()[i]) ? outcome_mask : symptom_mask) |= bit(i);

    EnumerationStats es;
    const auto concepts = enumerate_concepts(ctx, &es);
    if (stats) {
        stats->concepts += concepts.size();
        stats->closures += es.closures;
    }

    std::vector<Rule> out;
    std::set<std::pair<AttrMask, AttrMask>> emitted;
    const double n = static_cast<double>(ctx.object_count());
    for (const auto& c : concepts) {
        const AttrMask outcomes = c.intent & outcome_mask;
        const AttrMask symptoms = c.intent & symptom_mask;
        if (outcomes == 0 || symptoms == 0)
            continue;
        // Every nonempty submask of the symptom part.
        for (AttrMask a = symptoms; a != 0; a = (a - 1) & symptoms) {
            if (!emitted.emplace(a, outcomes).second)
                continue;
            const ObjectSet both = derive(ctx, a | outcomes);
            const std::size_t ante = derive(ctx, a).count();
            if (ante == 0)
                continue;
            const double support = static_cast<double>(both.count()) / n;
            const double confidence = static_cast<double>(both.count()) / static_cast<double>(ante);
            if (support < min_support || confidence < min_confidence)
                continue;
            Rule r;
            r.antecedent = ctx.names_of(a);
            r.consequent = ctx.names_of(outcomes);
            r.id = rule_id(r.antecedent, r.consequent);
            r.support = support;
            r.confidence = confidence;
            r.provenance = ctx.object_names(both);
            std::sort(r.provenance.begin(), r.provenance.end());
            r.asserted_tick = now;
            r.last_confirmed_tick = now;
            out.push_back(std::move(r));
        }
    }
    std::sort(out.begin(), out.end(), [](const Rule& a, const Rule& b) { return a.id < b.id; });
    return out;
}

// ---------------------------------------------------------------------------
// Validation, injection, retirement

bool provenance_decommissioned(const Rule& rule, const KnowledgeGraph& kg, const EpisodicStore& episodes) {
    if (rule.provenance.empty())
        return false;
    return std::all_of(rule.provenance.begin(), rule.provenance.end(), [&](const std::string& id) {
        if (!episodes.contains(id))
            return false;
        const auto& ents = episodes.get(id).entities;
        return std::any_of(ents.begin(), ents.end(), [&](const EntityId& e) { return kg.is_decommissioned(e); });
    });
}

ConsistencyResult check_consistency(const Rule& rule, const KnowledgeGraph& kg, const EpisodicStore& episodes,
                                    const Vocabulary& vocab) {
    if (rule.antecedent.empty())
        return {false, "malformed: empty antecedent"};
    for (const auto& a : rule.antecedent)
        if (rule.consequent.contains(a))
            return {false, "malformed: '" + a + "' on both sides"};

    for (const auto& a : rule.antecedent)
        if (!vocab.is_symptom(a) || kg.class_of(a) != "Attribute")
            return {false, "unknown_term: " + a};
    for (const auto& c : rule.consequent) {
        if (c.starts_with(kCausePrefix)) {
            std::string kind = c.substr(kCausePrefix.size());
            if (!parse_fault_kind(kind))
                return {false, "unknown_term: " + c};
            if (kg.class_of(kind) != "FaultKind")
                return {false, "not_a_fault_kind: " + kind};
        } else if (c.starts_with(kResolvedPrefix)) {
            std::string action = c.substr(kResolvedPrefix.size());
            if (!parse_action_kind(action) || kg.class_of(action) != "Action")
                return {false, "unknown_term: " + c};
        } else {
            return {false, "unknown_term: " + c};
        }
    }

    if (provenance_decommissioned(rule, kg, episodes))
        return {false, "decommissioned"};

    const auto mine = rule.causes();
    if (!mine.empty()) {
        for (const auto& [id, other] : kg.rules()) {
            if (id == rule.id || other.status != RuleStatus::validated || other.antecedent != rule.antecedent)
                continue;
            const auto theirs = other.causes();
            if (theirs.empty() || theirs == mine)
                continue;
            if (other.confidence > rule.confidence)
                return {false, "contradiction: " + id};
        }
    }
    return {true, {}};
}

std::size_t inject_rules(std::span<const Rule> rules, KnowledgeGraph& kg, Tick now, std::int64_t episode_counter) {
    for (const auto& r : rules)
        if (!r.consistent)
            throw Error("inject_rules: rule '" + r.id + "' has not passed the consistency check");

    for (const auto& incoming : rules) {
        Rule r = incoming;
        // A retired rule keeps its record; the same shape learned again from
        // fresh evidence becomes a new generation of that id.
        for (int gen = 2; kg.find_rule(r.id) && kg.find_rule(r.id)->status == RuleStatus::retired; ++gen)
            r.id = incoming.id + "@" + std::to_string(gen);
        if (const Rule* existing = kg.find_rule(r.id))
            r.asserted_tick = existing->asserted_tick;
        else
            r.asserted_tick = now;
        r.status = RuleStatus::validated;
        r.retire_reason.clear();
        r.last_confirmed_tick = now;
        r.last_confirmed_episode = episode_counter;

        kg.declare(r.id, "Rule");
        auto must = [&](std::string s, std::string p, std::string o) {
            if (auto res = kg.assert_triple({std::move(s), std::move(p), std::move(o), false, Provenance::ill, now}); !res)
                throw Error("inject_rules: " + res.reason);
        };
        for (const auto& a : r.antecedent)
            must(r.id, "has_attribute", a);
        const auto causes = r.causes();
        const auto remedies = r.remedies();
        for (FaultKind k : causes)
            must(r.id, "indicates", std::string(to_string(k)));
        for (ActionKind a : remedies)
            must(r.id, "recommends", std::string(to_string(a)));
        for (FaultKind k : causes)
            for (ActionKind a : remedies)
                must(std::string(to_string(k)), "remedied_by", std::string(to_string(a)));
        kg.put_rule(std::move(r));
    }
    return rules.size();
}

std::size_t retire_rules(KnowledgeGraph& kg, const RetireCriteria& c, const EpisodicStore& episodes) {
    std::vector<std::pair<std::string, std::string>> retiring;
    for (const auto& [id, r] : kg.rules()) {
        if (r.status != RuleStatus::validated)
            continue;
        if (c.decommissioned_provenance && provenance_decommissioned(r, kg, episodes))
            retiring.emplace_back(id, "decommissioned");
        else if (c.confidence_floor && r.confidence < *c.confidence_floor)
            retiring.emplace_back(id, "confidence_decay");
        else if (c.max_unconfirmed_episodes && c.current_episode - r.last_confirmed_episode > *c.max_unconfirmed_episodes)
            retiring.emplace_back(id, "unconfirmed");
    }
    for (const auto& [id, reason] : retiring) {
        Rule& r = kg.rule_mut(id);
        r.status = RuleStatus::retired;
        r.retire_reason = reason;
        kg.retract({id, std::nullopt, std::nullopt});
    }
    return retiring.size();
}

// ---------------------------------------------------------------------------
// Pipeline

IllParams IllParams::from_json(const json& j) {
    IllParams p;
    p.min_support = j.value("min_support", p.min_support);
    p.min_confidence = j.value("min_confidence", p.min_confidence);
    p.confidence_floor = j.value("confidence_floor", p.confidence_floor);
    p.max_unconfirmed_episodes = j.value("max_unconfirmed_episodes", p.max_unconfirmed_episodes);
    p.cadence = j.value("cadence", p.cadence);
    if (p.cadence < 1)
        throw Error("ill: cadence must be >= 1");
    return p;
}

json IllParams::to_json() const {
    return {{"min_support", min_support},
            {"min_confidence", min_confidence},
            {"confidence_floor", confidence_floor},
            {"max_unconfirmed_episodes", max_unconfirmed_episodes},
            {"cadence", cadence}};
}

IllReport run_ill(const EpisodicStore& episodes, KnowledgeGraph& kg, const IllParams& params, Tick now,
                  std::int64_t episode_counter) {
    IllReport report;
    const auto live = episodes.live_episodes();
    if (!live.empty()) {
        report.context = build_context(live);
        MiningStats ms;
        auto candidates = mine_rules(report.context, params.min_support, params.min_confidence, now, &ms);
        report.concepts = ms.concepts;
        report.closures = ms.closures;
        report.mined = candidates.size();

        std::vector<Rule> accepted;
        for (auto& r : candidates) {
            if (auto res = check_consistency(r, kg, episodes); res) {
                r.consistent = true;
                accepted.push_back(std::move(r));
            } else {
                report.rejected.emplace_back(r.id, res.reason);
            }
        }
        report.injected = inject_rules(accepted, kg, now, episode_counter);

        // Validated rules that were not re-mined get their numbers refreshed
        // against the current context so decay can be detected.
        for (const auto& v : kg.rules_with_status(RuleStatus::validated)) {
            if (v.last_confirmed_episode == episode_counter && v.last_confirmed_tick == now)
                continue;
            if (auto m = measure_rule(report.context, v.antecedent, v.consequent)) {
                Rule& r = kg.rule_mut(v.id);
                r.support = m->support;
                r.confidence = m->confidence;
            }
        }
    }
    RetireCriteria rc{true, params.confidence_floor, params.max_unconfirmed_episodes, episode_counter};
    report.retired = retire_rules(kg, rc, episodes);
    return report;
}

} // namespace life
