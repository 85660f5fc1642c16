#include "life/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace life {

using nlohmann::json;

std::string_view to_string(Source s) {
    switch (s) {
    case Source::telemetry:
        return "telemetry";
    case Source::event:
        return "event";
    case Source::alert:
        return "alert";
    case Source::ticket:
        return "ticket";
    }
    return "unknown";
}

std::string_view to_string(Category c) {
    switch (c) {
    case Category::performance:
        return "performance";
    case Category::capacity:
        return "capacity";
    case Category::configuration:
        return "configuration";
    case Category::security:
        return "security";
    }
    return "unknown";
}

namespace {

std::optional<Source> parse_source(std::string_view s) {
    for (Source v : {Source::telemetry, Source::event, Source::alert, Source::ticket})
        if (to_string(v) == s)
            return v;
    return std::nullopt;
}

std::optional<Category> parse_category(std::string_view s) {
    for (Category c : kAllCategories)
        if (to_string(c) == s)
            return c;
    return std::nullopt;
}

} // namespace

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() : version_("life-vocab-1") {
    using enum Category;
    // Raw metrics.
    category_["cpu_util"] = capacity;
    category_["mem_util"] = capacity;
    category_["disk_io"] = performance;
    category_["net_latency_ms"] = performance;
    category_["packet_loss_rate"] = performance;
    category_["pod_restarts"] = performance;

    // Anomaly attribute per metric; inherits the metric's category.
    anomaly_ = {{Metric::cpu_util, "cpu_high"},
                {Metric::mem_util, "mem_high"},
                {Metric::disk_io, "disk_high"},
                {Metric::net_latency_ms, "latency_spike"},
                {Metric::packet_loss_rate, "packet_loss_high"},
                {Metric::pod_restarts, "restarts_high"}};
    for (Metric m : kAllMetrics) {
        category_[anomaly_.at(m)] = category_.at(std::string(to_string(m)));
        symptoms_.push_back(anomaly_.at(m));
    }

    // Event kinds.
    const std::tuple<const char*, Category, int> events[] = {
        {"dns_error", performance, 2},
        {"config_change", configuration, 1},
        {"node_decommissioned", configuration, 1},
        {"auth_failure", security, 3}, // reserved: nothing in the simulator emits it
    };
    for (const auto& [kind, cat, sev] : events) {
        category_[kind] = cat;
        event_severity_[kind] = sev;
        symptoms_.emplace_back(kind);
    }
}

const Vocabulary& Vocabulary::standard() {
    static const Vocabulary v;
    return v;
}

bool Vocabulary::contains(std::string_view a) const { return category_.find(a) != category_.end(); }
bool Vocabulary::is_metric(std::string_view a) const { return parse_metric(a).has_value(); }
bool Vocabulary::is_event(std::string_view a) const { return event_severity_.find(a) != event_severity_.end(); }
bool Vocabulary::is_symptom(std::string_view a) const { return contains(a) && !is_metric(a); }

Category Vocabulary::category_of(std::string_view a) const {
    auto it = category_.find(a);
    if (it == category_.end())
        throw Error("vocabulary: unknown attribute '" + std::string(a) + "'");
    return it->second;
}

const std::string& Vocabulary::anomaly_for(Metric m) const { return anomaly_.at(m); }

int Vocabulary::event_severity(std::string_view kind) const {
    auto it = event_severity_.find(kind);
    if (it == event_severity_.end())
        throw Error("vocabulary: unknown event kind '" + std::string(kind) + "'");
    return it->second;
}

// ---------------------------------------------------------------------------
// Normalization

UnifiedRecord normalize(const TelemetrySample& raw, const Vocabulary& vocab) {
    if (raw.entity.empty())
        throw Error("normalize: sample without entity");
    if (!vocab.is_metric(raw.metric))
        throw Error("normalize: unknown metric '" + raw.metric + "'");
    return {raw.tick, raw.entity, Source::telemetry, vocab.category_of(raw.metric), raw.metric, raw.value, 0};
}

UnifiedRecord normalize(const RawEvent& raw, const Vocabulary& vocab) {
    if (raw.entity.empty())
        throw Error("normalize: event without entity");
    if (!vocab.is_event(raw.kind))
        throw Error("normalize: unknown event kind '" + raw.kind + "'");
    Source src = raw.source == EventSource::alert    ? Source::alert
                 : raw.source == EventSource::ticket ? Source::ticket
                                                     : Source::event;
    return {raw.tick, raw.entity, src, vocab.category_of(raw.kind), raw.kind, std::nullopt,
            vocab.event_severity(raw.kind)};
}

UnifiedRecord normalize(const UnifiedRecord& already, const Vocabulary&) {
    throw Error("normalize: record for '" + already.entity + "' at tick " + std::to_string(already.tick) +
                " is already normalized");
}

// ---------------------------------------------------------------------------
// Detection

DetectorParams DetectorParams::from_json(const json& j) {
    DetectorParams p;
    p.alpha = j.value("alpha", p.alpha);
    p.window = j.value("window", p.window);
    p.k = j.value("k", p.k);
    if (j.contains("severity_sigmas")) {
        auto s = j.at("severity_sigmas").get<std::vector<double>>();
        if (s.size() != 3)
            throw Error("detector: severity_sigmas needs 3 entries");
        std::copy(s.begin(), s.end(), p.severity_sigmas);
    }
    if (!(p.alpha > 0.0 && p.alpha <= 1.0) || p.window < 1 || p.k <= 0.0)
        throw Error("detector: alpha in (0,1], window >= 1, k > 0 required");
    return p;
}

json DetectorParams::to_json() const {
    return {{"alpha", alpha},
            {"window", window},
            {"k", k},
            {"severity_sigmas", {severity_sigmas[0], severity_sigmas[1], severity_sigmas[2]}}};
}

Baselines Baselines::from_sim(const SimParams& params) {
    Baselines b;
    for (const auto& [m, v] : params.baseline) {
        std::string name(to_string(m));
        b.level[name] = v;
        b.sigma[name] = params.noise_frac * std::abs(v) / std::sqrt(3.0);
    }
    return b;
}

double Baselines::sigma_of(std::string_view metric) const {
    auto it = sigma.find(metric);
    return it == sigma.end() ? 0.0 : it->second;
}

int severity_for(double dev_sigmas, const DetectorParams& p) {
    int sev = 0;
    for (int i = 0; i < 3; ++i)
        if (dev_sigmas > p.severity_sigmas[i])
            sev = i + 1;
    return sev;
}

std::vector<Alert> detect_anomalies(std::span<const UnifiedRecord> window, const Baselines& baselines,
                                    const DetectorParams& params, const Vocabulary& vocab) {
    std::vector<Alert> alerts;
    if (window.empty())
        return alerts;

    Tick last_tick = window.front().tick;
    std::map<std::pair<EntityId, std::string>, std::vector<const UnifiedRecord*>> series;
    for (const auto& r : window) {
        last_tick = std::max(last_tick, r.tick);
        if (r.source == Source::telemetry)
            series[{r.entity, r.attribute}].push_back(&r);
    }

    for (auto& [key, recs] : series) {
        std::stable_sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->tick < b->tick; });
        if (static_cast<int>(recs.size()) < params.window)
            continue;
        auto level_it = baselines.level.find(key.second);
        if (level_it == baselines.level.end())
            continue;
        const double base = level_it->second;
        const double sigma = baselines.sigma_of(key.second);
        const double floor = params.k * sigma;

        std::span<const UnifiedRecord* const> scored(recs.data() + recs.size() - params.window, params.window);
        double ewma = base;
        for (const auto* r : scored)
            ewma = params.alpha * r->value.value_or(base) + (1.0 - params.alpha) * ewma;
        const double dev = ewma - base;
        if (!(dev > floor))
            continue;
        const double dev_sigmas = sigma > 0.0 ? dev / sigma : std::numeric_limits<double>::infinity();

        Alert a;
        a.tick = scored.back()->tick;
        a.entity = key.first;
        a.attribute = vocab.anomaly_for(*parse_metric(key.second));
        a.severity = std::max(1, severity_for(dev_sigmas, params));
        for (const auto* r : scored) {
            double v = r->value.value_or(base);
            if (v - base > floor)
                a.evidence.push_back({r->tick, r->entity, r->attribute, v});
        }
        alerts.push_back(std::move(a));
    }

    for (const auto& r : window) {
        if (r.source == Source::telemetry || r.tick != last_tick || r.severity < 1)
            continue;
        bool dup = std::any_of(alerts.begin(), alerts.end(), [&](const Alert& a) {
            return a.tick == r.tick && a.entity == r.entity && a.attribute == r.attribute;
        });
        if (dup)
            continue;
        alerts.push_back({r.tick, r.entity, r.attribute, r.severity, {{r.tick, r.entity, r.attribute, r.value.value_or(1.0)}}});
    }

    std::sort(alerts.begin(), alerts.end(), [](const Alert& a, const Alert& b) {
        return std::tie(a.tick, a.entity, a.attribute) < std::tie(b.tick, b.entity, b.attribute);
    });
    return alerts;
}

void DetectorWindow::push_tick(std::vector<UnifiedRecord> records) {
    ticks_buf_.push_back(std::move(records));
    while (static_cast<int>(ticks_buf_.size()) > ticks_)
        ticks_buf_.pop_front();
}

std::vector<UnifiedRecord> DetectorWindow::flatten() const {
    std::vector<UnifiedRecord> out;
    for (const auto& t : ticks_buf_)
        out.insert(out.end(), t.begin(), t.end());
    return out;
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const UnifiedRecord& r) {
    json j = {{"tick", r.tick},
              {"entity", r.entity},
              {"source", to_string(r.source)},
              {"category", to_string(r.category)},
              {"attribute", r.attribute},
              {"severity", r.severity}};
    j["value"] = r.value ? json(*r.value) : json(nullptr);
    return j;
}

UnifiedRecord record_from_json(const json& j) {
    UnifiedRecord r;
    r.tick = j.at("tick").get<Tick>();
    r.entity = j.at("entity").get<std::string>();
    auto src = parse_source(j.at("source").get<std::string>());
    auto cat = parse_category(j.at("category").get<std::string>());
    if (!src || !cat)
        throw Error("record: bad source or category");
    r.source = *src;
    r.category = *cat;
    r.attribute = j.at("attribute").get<std::string>();
    if (j.contains("value") && !j.at("value").is_null())
        r.value = j.at("value").get<double>();
    r.severity = j.value("severity", 0);
    return r;
}

json to_json(const Alert& a) {
    json ev = json::array();
    for (const auto& s : a.evidence)
        ev.push_back({{"tick", s.tick}, {"entity", s.entity}, {"attribute", s.attribute}, {"value", s.value}});
    return {{"tick", a.tick}, {"entity", a.entity}, {"attribute", a.attribute}, {"severity", a.severity}, {"evidence", ev}};
}

Alert alert_from_json(const json& j) {
    Alert a;
    a.tick = j.at("tick").get<Tick>();
    a.entity = j.at("entity").get<std::string>();
    a.attribute = j.at("attribute").get<std::string>();
    a.severity = j.at("severity").get<int>();
    for (const auto& s : j.value("evidence", json::array()))
        a.evidence.push_back({s.at("tick").get<Tick>(), s.at("entity").get<std::string>(),
                              s.at("attribute").get<std::string>(), s.at("value").get<double>()});
    return a;
}

} // namespace life
