#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace life {

using Tick = std::int64_t;
using EntityId = std::string;

// Raised on contract violations (bad references, unknown ids, illegal input).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FaultKind { dns_error_burst, tor_packet_loss, ingress_throttle, noisy_neighbor, node_decommission };

enum class ActionKind { restart_pod, scale_replicas, reroute_service, throttle_tenant, flush_dns_cache, drain_node };

enum class Metric { cpu_util, mem_util, disk_io, net_latency_ms, packet_loss_rate, pod_restarts };

inline constexpr FaultKind kAllFaultKinds[] = {FaultKind::dns_error_burst, FaultKind::tor_packet_loss,
                                               FaultKind::ingress_throttle, FaultKind::noisy_neighbor,
                                               FaultKind::node_decommission};
inline constexpr ActionKind kAllActionKinds[] = {ActionKind::restart_pod,     ActionKind::scale_replicas,
                                                 ActionKind::reroute_service, ActionKind::throttle_tenant,
                                                 ActionKind::flush_dns_cache, ActionKind::drain_node};
inline constexpr Metric kAllMetrics[] = {Metric::cpu_util,       Metric::mem_util,         Metric::disk_io,
                                         Metric::net_latency_ms, Metric::packet_loss_rate, Metric::pod_restarts};

std::string_view to_string(FaultKind k);
std::string_view to_string(ActionKind k);
std::string_view to_string(Metric m);

std::optional<FaultKind> parse_fault_kind(std::string_view s);
std::optional<ActionKind> parse_action_kind(std::string_view s);
std::optional<Metric> parse_metric(std::string_view s);

// Ground-truth remedy for each fault kind. The simulator uses this to decide
// whether an action clears a fault; the agent never reads it directly.
ActionKind remedy_for(FaultKind k);

// Prefixes used for outcome labels in formal contexts and rules.
inline constexpr std::string_view kCausePrefix = "cause_";
inline constexpr std::string_view kResolvedPrefix = "resolved_by_";

std::string cause_label(FaultKind k);
std::string resolved_label(ActionKind a);
bool is_outcome_label(std::string_view attribute);

} // namespace life
