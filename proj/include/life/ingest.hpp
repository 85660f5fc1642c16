#pragma once

#include "life/cluster_sim.hpp"

#include <deque>
#include <span>

namespace life {

enum class Source { telemetry, event, alert, ticket };
enum class Category { performance, capacity, configuration, security };

std::string_view to_string(Source s);
std::string_view to_string(Category c);
inline constexpr Category kAllCategories[] = {Category::performance, Category::capacity, Category::configuration,
                                              Category::security};

// Closed, versioned attribute vocabulary shared by ingest, the memory tiers and
// lattice learning. Telemetry metric names, anomaly attributes derived from
// them, and event kinds all live here with their classification.
class Vocabulary {
public:
    static const Vocabulary& standard();

    const std::string& version() const { return version_; }

    bool contains(std::string_view attribute) const;
    bool is_metric(std::string_view attribute) const;
    bool is_event(std::string_view attribute) const;
    // Symptom attributes are what alerts carry: anomaly names and event kinds.
    bool is_symptom(std::string_view attribute) const;

    Category category_of(std::string_view attribute) const;
    // "net_latency_ms" -> "latency_spike" etc.
    const std::string& anomaly_for(Metric m) const;
    // Default severity carried by an event kind.
    int event_severity(std::string_view kind) const;

    // Symptom attributes in canonical order; this is the embedding's one-hot layout.
    const std::vector<std::string>& symptoms() const { return symptoms_; }

private:
    Vocabulary();

    std::string version_;
    std::map<std::string, Category, std::less<>> category_;
    std::map<Metric, std::string> anomaly_;
    std::map<std::string, int, std::less<>> event_severity_;
    std::vector<std::string> symptoms_;
};

struct UnifiedRecord {
    Tick tick = 0;
    EntityId entity;
    Source source = Source::telemetry;
    Category category = Category::performance;
    std::string attribute;
    std::optional<double> value;
    int severity = 0;

    bool operator==(const UnifiedRecord&) const = default;
};

struct SampleRef {
    Tick tick = 0;
    EntityId entity;
    std::string attribute;
    double value = 0.0;
    bool operator==(const SampleRef&) const = default;
};

struct Alert {
    Tick tick = 0;
    EntityId entity;
    std::string attribute;
    int severity = 1;
    std::vector<SampleRef> evidence;
    bool operator==(const Alert&) const = default;
};

UnifiedRecord normalize(const TelemetrySample& raw, const Vocabulary& vocab = Vocabulary::standard());
UnifiedRecord normalize(const RawEvent& raw, const Vocabulary& vocab = Vocabulary::standard());
// Always throws: a unified record must not pass through normalization twice.
[[noreturn]] UnifiedRecord normalize(const UnifiedRecord& already, const Vocabulary& vocab = Vocabulary::standard());

struct DetectorParams {
    double alpha = 0.3;
    int window = 5;
    double k = 3.0;
    // Deviation (in sigmas) at which severity 1, 2, 3 begin.
    double severity_sigmas[3] = {3.0, 5.0, 8.0};
    static DetectorParams from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Per-metric baseline level and noise sigma. Noise is uniform +/- noise_frac of
// baseline, so sigma = noise_frac * baseline / sqrt(3).
struct Baselines {
    std::map<std::string, double, std::less<>> level;
    std::map<std::string, double, std::less<>> sigma;

    static Baselines from_sim(const SimParams& params);
    double sigma_of(std::string_view metric) const;
};

int severity_for(double deviation_sigmas, const DetectorParams& p);

// Scores every (entity, metric) series in the window with an EWMA seeded at
// baseline and raises an alert at the series' last tick when the upward
// deviation exceeds k sigma. Series shorter than the configured window are not
// scored. Event records at the window's last tick pass through as alerts.
std::vector<Alert> detect_anomalies(std::span<const UnifiedRecord> window, const Baselines& baselines,
                                    const DetectorParams& params, const Vocabulary& vocab = Vocabulary::standard());

// Sliding window over the last W ticks of normalized records.
class DetectorWindow {
public:
    explicit DetectorWindow(int ticks) : ticks_(ticks) {}
    void push_tick(std::vector<UnifiedRecord> records);
    std::vector<UnifiedRecord> flatten() const;
    void clear() { ticks_buf_.clear(); }
    std::size_t size() const { return ticks_buf_.size(); }

private:
    int ticks_;
    std::deque<std::vector<UnifiedRecord>> ticks_buf_;
};

nlohmann::json to_json(const UnifiedRecord& r);
UnifiedRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Alert& a);
Alert alert_from_json(const nlohmann::json& j);

} // namespace life
