#pragma once

// Power-law out-degree (PLOD) random topologies.

#include <cstdint>
#include <vector>

#include "netdt/network.hpp"

namespace netdt {

inline constexpr double kDefaultBufferBits = 32000.0;

// Project defaults for the PLOD parameters. With credit = ceil(beta * x^-alpha)
// and x uniform in [1, n], these ranges keep the mean out-degree within
// [2, 6] for 25 to 300 nodes.
inline constexpr double kAlphaMin = 0.7;
inline constexpr double kAlphaMax = 0.8;
inline constexpr double kBetaPerNodeMin = 0.3;
inline constexpr double kBetaPerNodeMax = 0.4;

struct TopoGenConfig {
  std::size_t n_nodes = 25;
  double alpha = 0.75;
  double beta = 8.0;
  std::vector<double> capacity_pool = {10e6, 25e6, 40e6, 100e6};  // bits/second
  double buffer_size = kDefaultBufferBits;
  std::uint64_t seed = 1;
};

// Draw alpha and beta from the project default ranges for a given size.
TopoGenConfig default_topo_config(std::size_t n_nodes, std::uint64_t seed);

// Directed PLOD graph, repaired to strong connectivity. Every link gets one
// FIFO queue and a capacity drawn from the pool (c_ref = capacity, s_f = 1).
// Links are ordered by (src, dst).
NetworkSample generate_topology(const TopoGenConfig& cfg);

bool is_strongly_connected(const NetworkSample& sample);

// Strongly connected components of the link graph; comp[v] is the
// component of node v, components numbered in reverse topological order.
std::vector<std::size_t> strongly_connected_components(std::size_t n,
                                                       const std::vector<Link>& links);

}  // namespace netdt
