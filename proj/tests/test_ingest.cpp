#include "life/ingest.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace life;

namespace {

UnifiedRecord tele(Tick t, const EntityId& e, const std::string& metric, double v) {
    return normalize(TelemetrySample{t, e, metric, v});
}

// Reference EWMA over the last `w` values, seeded at the baseline.
double ewma(const std::vector<double>& xs, double base, double alpha, int w) {
    double s = base;
    for (std::size_t i = xs.size() - static_cast<std::size_t>(w); i < xs.size(); ++i)
        s = alpha * xs[i] + (1 - alpha) * s;
    return s;
}

} // namespace

TEST_CASE("vocabulary classifies metrics, anomalies and events") {
    const auto& v = Vocabulary::standard();
    CHECK(v.is_metric("cpu_util"));
    CHECK_FALSE(v.is_symptom("cpu_util"));
    CHECK(v.is_symptom("cpu_high"));
    CHECK(v.is_symptom("dns_error"));
    CHECK(v.is_event("node_decommissioned"));
    CHECK(v.category_of("auth_failure") == Category::security);
    CHECK(v.category_of("config_change") == Category::configuration);
    CHECK(v.category_of("cpu_high") == Category::capacity);
    CHECK(v.anomaly_for(Metric::net_latency_ms) == "latency_spike");
    CHECK(v.event_severity("dns_error") == 2);
    CHECK_FALSE(v.contains("bogus"));
    CHECK(v.symptoms().front() == "cpu_high");
}

TEST_CASE("normalize maps raw inputs onto the unified schema") {
    auto r = tele(4, "p1", "disk_io", 0.5);
    CHECK(r.source == Source::telemetry);
    CHECK(r.category == Category::performance);
    CHECK(r.value == 0.5);
    CHECK(r.severity == 0);

    RawEvent ev{7, "p2", "dns_error", EventSource::alert, {}};
    auto e = normalize(ev);
    CHECK(e.source == Source::alert);
    CHECK(e.attribute == "dns_error");
    CHECK_FALSE(e.value);
    CHECK(e.severity == 2);

    CHECK_THROWS_AS(normalize(TelemetrySample{0, "p1", "bogus", 1.0}), Error);
    CHECK_THROWS_AS(normalize(TelemetrySample{0, "", "cpu_util", 1.0}), Error);
    CHECK_THROWS_AS(normalize(RawEvent{0, "p1", "bogus", EventSource::event, {}}), Error);
    CHECK_THROWS_AS(normalize(r), Error);
    CHECK(record_from_json(to_json(e)) == e);
    CHECK(record_from_json(to_json(r)) == r);
}

TEST_CASE("severity thresholds") {
    DetectorParams p;
    CHECK(severity_for(2.0, p) == 0);
    CHECK(severity_for(4.0, p) == 1);
    CHECK(severity_for(6.0, p) == 2);
    CHECK(severity_for(100.0, p) == 3);
}

TEST_CASE("a flat series raises nothing; a spike raises one alert with evidence") {
    SimParams sp;
    auto b = Baselines::from_sim(sp);
    DetectorParams p;
    std::vector<UnifiedRecord> w;
    for (Tick t = 0; t < 5; ++t)
        w.push_back(tele(t, "p1", "net_latency_ms", 20.0));
    CHECK(detect_anomalies(w, b, p).empty());

    w.clear();
    std::vector<double> xs = {20, 20, 20, 220, 220};
    for (Tick t = 0; t < 5; ++t)
        w.push_back(tele(t, "p1", "net_latency_ms", xs[static_cast<std::size_t>(t)]));
    auto alerts = detect_anomalies(w, b, p);
    REQUIRE(alerts.size() == 1);
    CHECK(alerts[0].attribute == "latency_spike");
    CHECK(alerts[0].tick == 4);
    CHECK(alerts[0].severity == 3);
    CHECK(alerts[0].evidence.size() == 2);
    CHECK(alert_from_json(to_json(alerts[0])) == alerts[0]);
}

TEST_CASE("short series are not scored; events at the last tick pass through") {
    auto b = Baselines::from_sim({});
    DetectorParams p;
    std::vector<UnifiedRecord> w;
    for (Tick t = 0; t < 3; ++t)
        w.push_back(tele(t, "p1", "cpu_util", 1.0));
    w.push_back(normalize(RawEvent{1, "p2", "dns_error", EventSource::event, {}}));
    w.push_back(normalize(RawEvent{2, "p3", "dns_error", EventSource::event, {}}));
    auto alerts = detect_anomalies(w, b, p);
    REQUIRE(alerts.size() == 1);
    CHECK(alerts[0].entity == "p3");
    CHECK(alerts[0].severity == 2);
}

TEST_CASE("property: detector agrees with a reference EWMA on random series") {
    Rng gen(77);
    SimParams sp;
    auto b = Baselines::from_sim(sp);
    const char* metrics[] = {"cpu_util", "net_latency_ms", "packet_loss_rate", "disk_io"};
    for (int trial = 0; trial < 500; ++trial) {
        DetectorParams p;
        p.alpha = gen.uniform(0.1, 1.0);
        p.window = 1 + static_cast<int>(gen.below(6));
        p.k = gen.uniform(1.0, 5.0);
        const std::string metric = metrics[gen.below(4)];
        const double base = b.level.at(metric);
        const int len = 1 + static_cast<int>(gen.below(8));
        const double bump = gen.chance(0.5) ? gen.uniform(0.0, 0.3) * base : 0.0;
        std::vector<double> xs;
        std::vector<UnifiedRecord> w;
        for (int t = 0; t < len; ++t) {
            double x = base + gen.uniform(-0.03, 0.03) * base + (t >= len / 2 ? bump : 0.0);
            xs.push_back(x);
            w.push_back(tele(t, "e", metric, x));
        }
        auto alerts = detect_anomalies(w, b, p);
        bool expect = false;
        if (len >= p.window) {
            double dev = ewma(xs, base, p.alpha, p.window) - base;
            expect = dev > p.k * b.sigma_of(metric);
        }
        CHECK(alerts.size() == (expect ? 1u : 0u));
        for (const auto& a : alerts) {
            CHECK(a.tick == len - 1);
            CHECK(a.severity >= 1);
            CHECK(a.severity <= 3);
        }
    }
}

TEST_CASE("detector window keeps the last W ticks") {
    DetectorWindow w(3);
    for (Tick t = 0; t < 5; ++t)
        w.push_tick({tele(t, "n1", "cpu_util", 0.3)});
    CHECK(w.size() == 3);
    auto flat = w.flatten();
    REQUIRE(flat.size() == 3);
    CHECK(flat.front().tick == 2);
    w.clear();
    CHECK(w.size() == 0);
}

TEST_CASE("detector params validate") {
    CHECK_THROWS_AS(DetectorParams::from_json({{"alpha", 0.0}}), Error);
    CHECK_THROWS_AS(DetectorParams::from_json({{"window", 0}}), Error);
    CHECK_THROWS_AS(DetectorParams::from_json({{"severity_sigmas", {1, 2}}}), Error);
    auto p = DetectorParams::from_json({{"k", 2.5}});
    CHECK(DetectorParams::from_json(p.to_json()).k == 2.5);
}
