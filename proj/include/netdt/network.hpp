#pragma once

// Network domain model: links, queues, flows and their routing, plus the
// index functions used by the message-passing model.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace netdt {

using NodeId = std::size_t;
using LinkId = std::size_t;
using QueueId = std::size_t;
using FlowId = std::size_t;

enum class SchedPolicy { Fifo, Sp, Wfq, Drr };
enum class TrafficModel { Poisson, OnOff };
enum class PacketSizeDist { Exponential, Fixed };

inline constexpr std::size_t kSchedPolicyCount = 4;
inline constexpr std::size_t kTrafficModelCount = 2;

// Link capacity expressed as a reference capacity times a scale factor.
// Only the product is physical; the split is a representation choice.
struct CapacityFactor {
  double c_ref = 0.0;  // bits/second
  double s_f = 1.0;    // dimensionless

  double effective() const { return c_ref * s_f; }
  friend bool operator==(const CapacityFactor&, const CapacityFactor&) = default;
};

struct Link {
  LinkId id = 0;
  NodeId src_node = 0;
  NodeId dst_node = 0;
  CapacityFactor capacity;
  SchedPolicy sched_policy = SchedPolicy::Fifo;
  std::vector<QueueId> queue_ids;
};

struct Queue {
  QueueId id = 0;
  LinkId link_id = 0;
  double buffer_size = 0.0;  // bits
  int priority = 0;
  double weight = 0.0;
};

struct TrafficDescriptor {
  TrafficModel model = TrafficModel::Poisson;
  double avg_rate = 0.0;      // bits/second, long-run average
  double avg_pkt_size = 0.0;  // bits
  PacketSizeDist pkt_size_dist = PacketSizeDist::Exponential;
  double on_mean = 0.0;   // seconds, ON_OFF only
  double off_mean = 0.0;  // seconds, ON_OFF only
};

struct Hop {
  QueueId queue_id = 0;
  LinkId link_id = 0;
  friend bool operator==(const Hop&, const Hop&) = default;
};

struct Flow {
  FlowId id = 0;
  NodeId src_node = 0;
  NodeId dst_node = 0;
  std::vector<Hop> path;
  TrafficDescriptor traffic;
};

struct FlowLabels {
  double mean_delay = 0.0;  // seconds
  double jitter = 0.0;      // seconds^2, variance of per-packet delay
  double loss_ratio = 0.0;
};

struct PerformanceLabels {
  std::vector<FlowLabels> flows;
  std::vector<double> queue_occupancy;  // time-averaged backlog / buffer
};

// Free-form provenance carried alongside a sample (generation seed, split,
// augmentation variant). Not used by the model.
struct SampleMeta {
  std::uint64_t topo_seed = 0;
  std::string split;
  int variant = 0;
};

struct NetworkSample {
  std::size_t nodes = 0;
  std::vector<Link> links;
  std::vector<Queue> queues;
  std::vector<Flow> flows;
  std::optional<PerformanceLabels> labels;
  std::optional<SampleMeta> meta;
};

std::string_view to_string(SchedPolicy p);
std::string_view to_string(TrafficModel m);
std::string_view to_string(PacketSizeDist d);
SchedPolicy parse_sched_policy(std::string_view s);
TrafficModel parse_traffic_model(std::string_view s);
PacketSizeDist parse_pkt_size_dist(std::string_view s);

// Q_f(q): every (flow, hop index) pair whose path visits the queue, in
// ascending flow order. Throws DomainError for an unknown queue.
std::vector<std::pair<FlowId, std::size_t>> flows_through_queue(const NetworkSample& sample,
                                                                QueueId queue_id);

// L_q(l): the link's queues ordered by (priority, id). Throws DomainError for
// an unknown link.
std::vector<QueueId> queues_of_link(const NetworkSample& sample, LinkId link_id);

// Precomputed Q_f and L_q for every queue and link. Building it is a single
// pass over the sample; the model uses it instead of repeated scans.
struct SampleIndex {
  std::vector<std::vector<std::pair<FlowId, std::size_t>>> flows_of_queue;
  std::vector<std::vector<QueueId>> queues_of_link;
};

SampleIndex build_index(const NetworkSample& sample);

enum class ViolationKind {
  NodeCount,
  IdMismatch,
  DanglingReference,
  SelfLoop,
  NonPositiveCapacity,
  EmptyQueueList,
  FifoQueueCount,
  QueueOwnership,
  NonPositiveBuffer,
  NegativeWeight,
  NonPositiveRate,
  NonPositivePacketSize,
  OnOffDurations,
  EmptyPath,
  PathEndpoints,
  PathContiguity,
  HopQueueNotOnLink,
  LabelCount,
  LabelRange,
};

std::string_view to_string(ViolationKind k);

struct Violation {
  ViolationKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ViolationKind kind) const;
  std::string summary() const;
};

// Report every broken invariant. An empty report means the sample is
// well-formed.
ValidationReport validate_sample(const NetworkSample& sample);

// Sum over the flow's hops of avg_pkt_size / effective capacity.
double path_transmission_time(const NetworkSample& sample, const Flow& flow);

}  // namespace netdt
