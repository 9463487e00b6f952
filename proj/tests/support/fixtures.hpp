#pragma once

// Sample builders shared by the unit and acceptance tests.

#include <algorithm>
#include <numeric>
#include <utility>
#include <vector>

#include "netdt/datagen.hpp"
#include "netdt/network.hpp"
#include "netdt/rng.hpp"
#include "netdt/topogen.hpp"

namespace netdt::testing {

// Nodes 0..hops in a line, one flow from node 0 to the last node.
inline NetworkSample chain(std::size_t hops, double capacity = 10e6, double rate = 1e6,
                           double pkt = 1000.0, double buffer = 32000.0) {
  NetworkSample s;
  s.nodes = hops + 1;
  Flow f;
  f.src_node = 0;
  f.dst_node = hops;
  f.traffic.avg_rate = rate;
  f.traffic.avg_pkt_size = pkt;
  for (std::size_t i = 0; i < hops; ++i) {
    s.links.push_back({i, i, i + 1, {capacity, 1.0}, SchedPolicy::Fifo, {i}});
    s.queues.push_back({i, i, buffer, 0, 0.0});
    f.path.push_back({i, i});
  }
  s.flows.push_back(std::move(f));
  return s;
}

// One link, one flow of exponential packets: arrival rate lambda and service
// rate mu in packets/second.
inline NetworkSample single_queue(double lambda, double mu, double pkt_bits, double buffer) {
  NetworkSample s = chain(1, mu * pkt_bits, lambda * pkt_bits, pkt_bits, buffer);
  return s;
}

// Random routed sample with varied traffic descriptors and factorizations.
// With extra_queues, some links get additional SP queues with distinct
// priorities. Labels are random placeholders when `labels` is set.
inline NetworkSample random_sample(std::uint64_t seed, std::size_t n, double flows_per_node,
                                   bool extra_queues = false, bool labels = true) {
  Rng rng(mix_seed(seed, 77));
  TopoGenConfig tc = default_topo_config(n, seed);
  tc.capacity_pool = {25e6, 50e6, 100e6, 250e6};
  NetworkSample s = generate_topology(tc);
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = 0; b < n; ++b) {
      if (a != b) pairs.emplace_back(a, b);
    }
  }
  const auto want = std::min<std::size_t>(
      pairs.size(), std::max<std::size_t>(1, static_cast<std::size_t>(flows_per_node * n)));
  for (std::size_t i = 0; i < want; ++i) std::swap(pairs[i], pairs[i + rng.below(pairs.size() - i)]);
  pairs.resize(want);
  s.flows = route_shortest_paths(s, pairs);
  for (Flow& f : s.flows) {
    f.traffic.avg_rate = rng.uniform(0.5e6, 5e6);
    f.traffic.avg_pkt_size = rng.uniform(1000.0, 4000.0);
    f.traffic.pkt_size_dist = rng.uniform() < 0.3 ? PacketSizeDist::Fixed : PacketSizeDist::Exponential;
    if (rng.uniform() < 0.3) {
      f.traffic.model = TrafficModel::OnOff;
      f.traffic.on_mean = 0.01;
      f.traffic.off_mean = 0.01;
    }
  }
  for (Link& l : s.links) {
    const double s_f = rng.uniform(1.0, 10.0);
    l.capacity = {l.capacity.effective() / s_f, s_f};
  }
  if (extra_queues) {
    for (Link& l : s.links) {
      if (rng.uniform() < 0.5) continue;
      l.sched_policy = SchedPolicy::Sp;
      const std::size_t extra = 1 + rng.below(2);
      s.queues[l.queue_ids.front()].priority = static_cast<int>(extra);
      for (std::size_t k = 0; k < extra; ++k) {
        const QueueId q = s.queues.size();
        s.queues.push_back({q, l.id, rng.uniform(8000.0, 64000.0), static_cast<int>(k), 0.0});
        l.queue_ids.push_back(q);
      }
    }
  }
  if (labels) {
    PerformanceLabels pl;
    for (const Flow& f : s.flows) {
      pl.flows.push_back({path_transmission_time(s, f) * rng.uniform(1.0, 3.0), 1e-8, 0.0});
    }
    for (std::size_t q = 0; q < s.queues.size(); ++q) pl.queue_occupancy.push_back(rng.uniform(0.0, 0.5));
    s.labels = pl;
  }
  return s;
}

inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

// Relabels nodes, links, queues and flows. new_x[i] is the new id of old
// entity i.
struct Relabeling {
  std::vector<std::size_t> node, link, queue, flow;
};

inline NetworkSample permute(const NetworkSample& s, const Relabeling& r) {
  NetworkSample out;
  out.nodes = s.nodes;
  out.links.resize(s.links.size());
  out.queues.resize(s.queues.size());
  out.flows.resize(s.flows.size());
  for (const Link& l : s.links) {
    Link m = l;
    m.id = r.link[l.id];
    m.src_node = r.node[l.src_node];
    m.dst_node = r.node[l.dst_node];
    for (QueueId& q : m.queue_ids) q = r.queue[q];
    out.links[m.id] = m;
  }
  for (const Queue& q : s.queues) {
    Queue m = q;
    m.id = r.queue[q.id];
    m.link_id = r.link[q.link_id];
    out.queues[m.id] = m;
  }
  for (const Flow& f : s.flows) {
    Flow m = f;
    m.id = r.flow[f.id];
    m.src_node = r.node[f.src_node];
    m.dst_node = r.node[f.dst_node];
    for (Hop& h : m.path) h = {r.queue[h.queue_id], r.link[h.link_id]};
    out.flows[m.id] = m;
  }
  if (s.labels) {
    PerformanceLabels pl;
    pl.flows.resize(s.flows.size());
    pl.queue_occupancy.resize(s.queues.size());
    for (std::size_t f = 0; f < s.flows.size(); ++f) pl.flows[r.flow[f]] = s.labels->flows[f];
    for (std::size_t q = 0; q < s.queues.size(); ++q) {
      pl.queue_occupancy[r.queue[q]] = s.labels->queue_occupancy[q];
    }
    out.labels = pl;
  }
  return out;
}

inline Relabeling random_relabeling(const NetworkSample& s, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x9e12));
  return {random_permutation(s.nodes, rng), random_permutation(s.links.size(), rng),
          random_permutation(s.queues.size(), rng), random_permutation(s.flows.size(), rng)};
}

}  // namespace netdt::testing
