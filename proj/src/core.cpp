#include "life/core.hpp"

#include <array>
#include <utility>

namespace life {
namespace {

constexpr std::array<std::pair<FaultKind, std::string_view>, 5> kFaultNames{{
    {FaultKind::dns_error_burst, "dns_error_burst"},
    {FaultKind::tor_packet_loss, "tor_packet_loss"},
    {FaultKind::ingress_throttle, "ingress_throttle"},
    {FaultKind::noisy_neighbor, "noisy_neighbor"},
    {FaultKind::node_decommission, "node_decommission"},
}};

constexpr std::array<std::pair<ActionKind, std::string_view>, 6> kActionNames{{
    {ActionKind::restart_pod, "restart_pod"},
    {ActionKind::scale_replicas, "scale_replicas"},
    {ActionKind::reroute_service, "reroute_service"},
    {ActionKind::throttle_tenant, "throttle_tenant"},
    {ActionKind::flush_dns_cache, "flush_dns_cache"},
    {ActionKind::drain_node, "drain_node"},
}};

constexpr std::array<std::pair<Metric, std::string_view>, 6> kMetricNames{{
    {Metric::cpu_util, "cpu_util"},
    {Metric::mem_util, "mem_util"},
    {Metric::disk_io, "disk_io"},
    {Metric::net_latency_ms, "net_latency_ms"},
    {Metric::packet_loss_rate, "packet_loss_rate"},
    {Metric::pod_restarts, "pod_restarts"},
}};

template <class Table, class E>
std::string_view name_of(const Table& table, E value) {
    for (const auto& [v, name] : table)
        if (v == value)
            return name;
    return "unknown";
}

template <class Table>
auto value_of(const Table& table, std::string_view s) -> std::optional<typename Table::value_type::first_type> {
    for (const auto& [v, name] : table)
        if (name == s)
            return v;
    return std::nullopt;
}

} // namespace

std::string_view to_string(FaultKind k) { return name_of(kFaultNames, k); }
std::string_view to_string(ActionKind k) { return name_of(kActionNames, k); }
std::string_view to_string(Metric m) { return name_of(kMetricNames, m); }

std::optional<FaultKind> parse_fault_kind(std::string_view s) { return value_of(kFaultNames, s); }
std::optional<ActionKind> parse_action_kind(std::string_view s) { return value_of(kActionNames, s); }
std::optional<Metric> parse_metric(std::string_view s) { return value_of(kMetricNames, s); }

ActionKind remedy_for(FaultKind k) {
    switch (k) {
    case FaultKind::dns_error_burst:
        return ActionKind::flush_dns_cache;
    case FaultKind::tor_packet_loss:
        return ActionKind::reroute_service;
    case FaultKind::ingress_throttle:
        return ActionKind::scale_replicas;
    case FaultKind::noisy_neighbor:
        return ActionKind::throttle_tenant;
    case FaultKind::node_decommission:
        return ActionKind::drain_node;
    }
    return ActionKind::restart_pod;
}

std::string cause_label(FaultKind k) { return std::string(kCausePrefix) + std::string(to_string(k)); }
std::string resolved_label(ActionKind a) { return std::string(kResolvedPrefix) + std::string(to_string(a)); }

bool is_outcome_label(std::string_view attribute) {
    return attribute.starts_with(kCausePrefix) || attribute.starts_with(kResolvedPrefix);
}

} // namespace life
