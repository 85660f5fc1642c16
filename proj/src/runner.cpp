#include "life/runner.hpp"

#include <fstream>
#include <sstream>

namespace life {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

namespace {

json read_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in)
        throw ConfigError("cannot open " + p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(p.string() + ": " + e.what());
    }
}

// Either an inline value or a path (string) to a JSON file.
json inline_or_file(const json& v, const fs::path& base_dir) {
    if (v.is_string())
        return read_json_file(base_dir / v.get<std::string>());
    return v;
}

} // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
    try {
        RunConfig c;
        if (!j.contains("seed"))
            throw ConfigError("config: seed is mandatory");
        c.seed = j.at("seed").get<std::uint64_t>();
        c.episodes = j.value("episodes", 0);
        if (c.episodes < 0)
            throw ConfigError("config: episodes must be >= 0");
        if (!j.contains("topology"))
            throw ConfigError("config: topology is required");
        c.topology = TopologySpec::from_json(inline_or_file(j.at("topology"), base_dir));
        if (j.contains("sim"))
            c.sim = SimParams::from_json(j.at("sim"));
        if (j.contains("orchestrator"))
            c.orchestrator = OrchestratorConfig::from_json(j.at("orchestrator"));
        if (j.contains("policies"))
            c.policies = PolicySet::from_json(j.at("policies"));
        if (j.contains("runbooks"))
            for (const auto& rb : inline_or_file(j.at("runbooks"), base_dir))
                c.runbooks.push_back(Runbook::from_json(rb));
        c.output = j.value("output", c.output);

        auto topo = ClusterTopology::build(c.topology);
        for (const auto& s : j.value("script", json::array())) {
            ScriptStep step;
            step.fault = FaultScenario::from_json(s);
            step.gap = s.value("gap", step.gap);
            if (step.gap < 1)
                throw ConfigError("config: script gap must be >= 1");
            step.fault.validate(topo);
            c.script.push_back(std::move(step));
        }
        if (c.episodes > 0 && c.script.empty())
            throw ConfigError("config: episodes requested but the script is empty");
        return c;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

RunConfig RunConfig::load(const fs::path& path) {
    return from_json(read_json_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// Report rows and aggregates

std::int64_t ReportRow::total_centi() const {
    std::int64_t t = 0;
    for (const auto& [c, v] : compute_centi)
        t += v;
    return t;
}

json to_json(const ReportRow& r) {
    json cu = json::object();
    for (Component c : kAllComponents) {
        auto it = r.compute_centi.find(c);
        cu[std::string(to_string(c))] = static_cast<double>(it == r.compute_centi.end() ? 0 : it->second) / 100.0;
    }
    cu["total"] = static_cast<double>(r.total_centi()) / 100.0;
    return {{"type", "episode"},
            {"episode", r.episode},
            {"fault_kind", r.fault_kind ? json(to_string(*r.fault_kind)) : json(nullptr)},
            {"fault_target", r.fault_target},
            {"top1_kind", r.top1_kind ? json(to_string(*r.top1_kind)) : json(nullptr)},
            {"top1_suspect", r.top1_suspect},
            {"correct", r.correct},
            {"resolved", r.resolved},
            {"escalated", r.escalated},
            {"ticks_to_resolve", r.ticks_to_resolve ? json(*r.ticks_to_resolve) : json(nullptr)},
            {"compute_units", cu},
            {"shortcut", r.shortcut},
            {"rules_active", r.rules_active},
            {"rules_mined", r.rules_mined},
            {"rules_injected", r.rules_injected},
            {"rules_retired", r.rules_retired}};
}

ReportRow row_from_json(const json& j) {
    ReportRow r;
    r.episode = j.at("episode").get<std::string>();
    if (!j.at("fault_kind").is_null())
        r.fault_kind = parse_fault_kind(j.at("fault_kind").get<std::string>());
    r.fault_target = j.at("fault_target").get<std::string>();
    if (!j.at("top1_kind").is_null())
        r.top1_kind = parse_fault_kind(j.at("top1_kind").get<std::string>());
    r.top1_suspect = j.at("top1_suspect").get<std::string>();
    r.correct = j.at("correct").get<bool>();
    r.resolved = j.at("resolved").get<bool>();
    r.escalated = j.at("escalated").get<bool>();
    if (!j.at("ticks_to_resolve").is_null())
        r.ticks_to_resolve = j.at("ticks_to_resolve").get<Tick>();
    for (Component c : kAllComponents)
        r.compute_centi[c] = std::llround(j.at("compute_units").at(std::string(to_string(c))).get<double>() * 100.0);
    r.shortcut = j.at("shortcut").get<bool>();
    r.rules_active = j.at("rules_active").get<std::size_t>();
    r.rules_mined = j.at("rules_mined").get<std::size_t>();
    r.rules_injected = j.at("rules_injected").get<std::size_t>();
    r.rules_retired = j.at("rules_retired").get<std::size_t>();
    return r;
}

Aggregates aggregate(const std::vector<ReportRow>& rows) {
    Aggregates a;
    a.episodes = rows.size();
    if (rows.empty())
        return a;
    std::size_t correct = 0;
    std::array<std::int64_t, 3> sum{};
    std::array<std::size_t, 3> count{};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        correct += r.correct ? 1 : 0;
        if (r.ticks_to_resolve) {
            const std::size_t third = i * 3 / rows.size();
            sum[third] += *r.ticks_to_resolve;
            ++count[third];
        }
        a.rules_mined += r.rules_mined;
        a.rules_validated += r.rules_injected;
        a.rules_retired += r.rules_retired;
        a.total_compute_centi += r.total_centi();
    }
    a.top1_accuracy = static_cast<double>(correct) / static_cast<double>(rows.size());
    for (std::size_t t = 0; t < 3; ++t)
        if (count[t])
            a.mean_ticks_to_resolve[t] = static_cast<double>(sum[t]) / static_cast<double>(count[t]);
    return a;
}

json to_json(const Aggregates& a) {
    json mt = json::object();
    const char* names[] = {"early", "middle", "late"};
    for (std::size_t t = 0; t < 3; ++t)
        mt[names[t]] = a.mean_ticks_to_resolve[t] ? json(*a.mean_ticks_to_resolve[t]) : json(nullptr);
    return {{"type", "aggregates"},
            {"episodes", a.episodes},
            {"top1_accuracy", a.top1_accuracy},
            {"mean_ticks_to_resolve", mt},
            {"rules_mined", a.rules_mined},
            {"rules_validated", a.rules_validated},
            {"rules_retired", a.rules_retired},
            {"total_compute_units", static_cast<double>(a.total_compute_centi) / 100.0}};
}

Aggregates aggregates_from_json(const json& j) {
    Aggregates a;
    a.episodes = j.at("episodes").get<std::size_t>();
    a.top1_accuracy = j.at("top1_accuracy").get<double>();
    const char* names[] = {"early", "middle", "late"};
    for (std::size_t t = 0; t < 3; ++t) {
        const auto& v = j.at("mean_ticks_to_resolve").at(names[t]);
        if (!v.is_null())
            a.mean_ticks_to_resolve[t] = v.get<double>();
    }
    a.rules_mined = j.at("rules_mined").get<std::size_t>();
    a.rules_validated = j.at("rules_validated").get<std::size_t>();
    a.rules_retired = j.at("rules_retired").get<std::size_t>();
    a.total_compute_centi = std::llround(j.at("total_compute_units").get<double>() * 100.0);
    return a;
}

std::string report_jsonl(const RunReport& report) {
    std::ostringstream out;
    json maint = json::array();
    for (const auto& m : report.maintenance)
        maint.push_back(to_json(m));
    out << json{{"type", "run"},
                {"seed", report.seed},
                {"episodes", report.rows.size()},
                {"idle_detector_units", static_cast<double>(report.idle_detector_centi) / 100.0},
                {"maintenance", maint}}
               .dump()
        << '\n';
    for (const auto& r : report.rows)
        out << to_json(r).dump() << '\n';
    out << to_json(report.aggregates).dump() << '\n';
    return out.str();
}

RunReport read_report(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open report " + path.string());
    RunReport r;
    bool have_agg = false;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        json j = json::parse(line);
        const std::string type = j.at("type").get<std::string>();
        if (type == "run") {
            r.seed = j.at("seed").get<std::uint64_t>();
            r.idle_detector_centi = std::llround(j.at("idle_detector_units").get<double>() * 100.0);
            for (const auto& m : j.at("maintenance"))
                r.maintenance.push_back({m.at("tick").get<Tick>(), m.at("node").get<std::string>(),
                                         m.at("triples_retracted").get<std::size_t>(),
                                         m.at("episodes_forgotten").get<std::size_t>(),
                                         m.at("rules_retired").get<std::size_t>()});
        } else if (type == "episode") {
            r.rows.push_back(row_from_json(j));
        } else if (type == "aggregates") {
            r.aggregates = aggregates_from_json(j);
            have_agg = true;
        }
    }
    if (!have_agg)
        throw Error("report " + path.string() + " has no aggregates line");
    return r;
}

// ---------------------------------------------------------------------------
// Execution

RunArtifacts execute(const RunConfig& config, const RunHooks& hooks) {
    auto topo = std::make_shared<const ClusterTopology>(ClusterTopology::build(config.topology));
    ClusterSim sim(topo, config.sim, derive_seed(config.seed, "sim"));
    Agent agent = make_agent(*topo, config.policies, config.runbooks,
                             std::make_shared<GraphReasoner>(config.orchestrator.reasoner),
                             config.orchestrator.buffer_capacity);
    Orchestrator orch(topo, config.orchestrator, std::move(agent), Baselines::from_sim(config.sim));

    RunArtifacts art;
    art.report.seed = config.seed;
    orch.on_learning = [&](const IllReport& rep, std::int64_t run) {
        std::ostringstream csv;
        rep.context.export_csv(csv);
        std::string n = std::to_string(run);
        art.contexts.emplace_back("ill_" + std::string(n.size() < 3 ? 3 - n.size() : 0, '0') + n + ".csv", csv.str());
    };

    std::size_t cursor = 0;
    std::size_t maintenance_seen = 0;
    std::ostringstream episodes, transitions;
    for (int e = 0; e < config.episodes; ++e) {
        // Advance to the next runnable fault, performing maintenance on the way.
        std::optional<FaultScenario> fault;
        for (std::size_t tries = 0; tries < config.script.size() && !fault; ++tries) {
            const ScriptStep& step = config.script[cursor++ % config.script.size()];
            if (!sim.is_live(step.fault.target))
                continue;
            FaultScenario f = step.fault;
            f.start_tick = sim.tick() + step.gap;
            if (f.kind == FaultKind::node_decommission) {
                sim.inject_fault(f);
                orch.idle(sim, static_cast<int>(step.gap) + 1);
                tries = 0; // maintenance does not count against finding a fault
                continue;
            }
            fault = f;
        }
        if (!fault)
            throw Error("script has no runnable fault step left at episode " + std::to_string(e + 1));
        sim.inject_fault(*fault);
        if (hooks.before_episode)
            hooks.before_episode(static_cast<std::size_t>(e), orch, sim);

        EpisodeOutcome out = orch.run_episode(sim);

        ReportRow row;
        row.episode = out.episode.id;
        row.fault_kind = fault->kind;
        row.fault_target = fault->target;
        if (!out.diagnosis.hypotheses.empty()) {
            row.top1_kind = out.diagnosis.hypotheses.front().fault_kind;
            row.top1_suspect = out.diagnosis.hypotheses.front().suspect_entity;
        }
        row.correct = out.correct;
        row.resolved = out.episode.resolved;
        row.escalated = out.escalated;
        row.ticks_to_resolve = out.episode.ticks_to_resolve;
        for (Component c : kAllComponents)
            row.compute_centi[c] = out.ledger.centi(c);
        row.shortcut = out.diagnosis.shortcut;
        row.rules_active = out.rules_active;
        if (out.learning) {
            row.rules_mined = out.learning->mined;
            row.rules_injected = out.learning->injected;
            row.rules_retired = out.learning->retired;
        }
        for (; maintenance_seen < orch.maintenance().size(); ++maintenance_seen)
            row.rules_retired += orch.maintenance()[maintenance_seen].rules_retired;
        art.report.rows.push_back(row);

        episodes << out.log.dump() << '\n';
        for (const auto& t : out.transitions)
            transitions << format_transition(t) << '\n';
        art.outcomes.push_back(std::move(out));
    }

    art.report.aggregates = aggregate(art.report.rows);
    art.report.idle_detector_centi = orch.run_ledger().centi(Component::detector);
    art.report.maintenance = orch.maintenance();
    art.report_jsonl = report_jsonl(art.report);
    art.episodes_jsonl = episodes.str();
    art.transitions_log = transitions.str();

    std::ostringstream kg, epi, rules;
    orch.agent().kg.export_tsv(kg);
    orch.agent().episodic.export_jsonl(epi);
    for (const auto& [id, r] : orch.agent().kg.rules())
        rules << to_json(r).dump() << '\n';
    art.kg_tsv = kg.str();
    art.episodic_jsonl = epi.str();
    art.rules_jsonl = rules.str();
    return art;
}

void write_artifacts(const RunArtifacts& art, const fs::path& dir) {
    fs::create_directories(dir / "contexts");
    auto write = [&](const fs::path& p, const std::string& body) {
        std::ofstream out(p, std::ios::binary);
        if (!out)
            throw Error("cannot write " + p.string());
        out << body;
    };
    write(dir / "report.jsonl", art.report_jsonl);
    write(dir / "episodes.jsonl", art.episodes_jsonl);
    write(dir / "transitions.log", art.transitions_log);
    write(dir / "kg.tsv", art.kg_tsv);
    write(dir / "episodic.jsonl", art.episodic_jsonl);
    write(dir / "rules.jsonl", art.rules_jsonl);
    for (const auto& [name, csv] : art.contexts)
        write(dir / "contexts" / name, csv);
}

// ---------------------------------------------------------------------------
// Replay

std::string format_transcript(const json& ep) {
    std::ostringstream out;
    out << "episode " << ep.at("id").get<std::string>() << "  ticks " << ep.at("start_tick") << ".."
        << ep.at("end_tick") << "  service " << ep.at("affected_service").get<std::string>() << "  entity "
        << ep.at("affected_entity").get<std::string>() << '\n';
    out << "symptoms:";
    for (const auto& s : ep.at("symptoms"))
        out << ' ' << s.get<std::string>();
    out << '\n';
    if (!ep.at("ground_truth").is_null())
        out << "ground truth: " << ep.at("ground_truth").at("kind").get<std::string>() << " @ "
            << ep.at("ground_truth").at("target").get<std::string>() << '\n';
    out << "alerts:\n";
    for (const auto& a : ep.at("alerts"))
        out << "  t" << a.at("tick") << ' ' << a.at("entity").get<std::string>() << ' '
            << a.at("attribute").get<std::string>() << " sev " << a.at("severity") << '\n';

    out << "transitions:\n";
    for (const auto& t : ep.at("transitions")) {
        out << "  t" << t.at("tick") << ' ' << t.at("from").get<std::string>() << " --"
            << t.at("event").get<std::string>() << "--> " << t.at("to").get<std::string>();
        if (t.at("attempt").get<int>() > 0)
            out << " [attempt " << t.at("attempt") << ']';
        if (!t.at("note").get<std::string>().empty())
            out << "  (" << t.at("note").get<std::string>() << ')';
        out << '\n';
    }

    for (const auto& p : ep.at("packs")) {
        out << "context pack: cost " << p.at("total_cost") << '/' << p.at("budget");
        for (const auto& s : p.at("sections"))
            out << "  " << s.at("kind").get<std::string>() << '=' << s.at("items").size();
        out << '\n';
    }

    const json& d = ep.at("diagnosis");
    out << "diagnosis: " << (d.at("shortcut").get<bool>() ? "rule shortcut" : "graph propagation") << ", "
        << d.at("compute_units") << " units\n";
    int rank = 1;
    for (const auto& h : d.at("hypotheses")) {
        out << "  " << rank++ << ". " << h.at("fault_kind").get<std::string>() << " @ "
            << h.at("suspect_entity").get<std::string>() << "  score " << h.at("score");
        if (!h.at("via_rule").is_null())
            out << "  via " << h.at("via_rule").get<std::string>();
        out << '\n';
        out << "     evidence:";
        for (const auto& e : h.at("evidence"))
            out << ' ' << e.get<std::string>();
        out << '\n';
    }
    if (d.at("hypotheses").empty())
        out << "  (abstained)\n";

    for (const auto& a : ep.at("attempts")) {
        out << "attempt " << a.at("attempt") << ": "
            << (a.at("runbook").is_null() ? std::string("no runbook") : a.at("runbook").get<std::string>());
        for (const auto& act : a.at("actions"))
            out << "  " << act.at("action").get<std::string>() << '(' << act.at("target").get<std::string>()
                << ")=" << act.at("result").get<std::string>();
        out << "  -> " << (a.at("cleared").get<bool>() ? "cleared" : "persists") << '\n';
    }
    for (const auto& n : ep.at("notes"))
        out << "note: " << n.get<std::string>() << '\n';

    const json& o = ep.at("outcome");
    if (o.at("escalated").get<bool>())
        out << "outcome: Escalated (" << o.at("reason").get<std::string>() << ")\n";
    else
        out << "outcome: resolved in " << o.at("ticks_to_resolve") << " ticks\n";
    const json& l = ep.at("ledger");
    out << "ledger: total " << l.at("total_compute_units") << " units";
    for (const auto& [k, v] : l.at("compute_units").items())
        out << "  " << k << '=' << v;
    out << "  tool_calls=" << l.at("tool_calls") << '\n';
    return out.str();
}

std::string replay(const fs::path& report_path, const std::string& episode_id) {
    if (!fs::exists(report_path))
        throw Error("no report at " + report_path.string());
    const fs::path log = report_path.parent_path() / "episodes.jsonl";
    std::ifstream in(log);
    if (!in)
        throw Error("cannot open " + log.string());
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        json j = json::parse(line);
        if (j.at("id").get<std::string>() == episode_id)
            return format_transcript(j);
    }
    throw Error("unknown episode id '" + episode_id + "'");
}

} // namespace life
