#include "netdt/topogen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "netdt/errors.hpp"
#include "netdt/rng.hpp"

namespace netdt {

TopoGenConfig default_topo_config(std::size_t n_nodes, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x70f0));
  TopoGenConfig cfg;
  cfg.n_nodes = n_nodes;
  cfg.alpha = rng.uniform(kAlphaMin, kAlphaMax);
  cfg.beta = rng.uniform(kBetaPerNodeMin, kBetaPerNodeMax) * static_cast<double>(n_nodes);
  cfg.seed = seed;
  return cfg;
}

std::vector<std::size_t> strongly_connected_components(std::size_t n,
                                                       const std::vector<Link>& links) {
  std::vector<std::vector<std::size_t>> adj(n);
  for (const Link& l : links) adj[l.src_node].push_back(l.dst_node);

  // Iterative Tarjan.
  constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, kUnvisited), low(n, 0), comp(n, kUnvisited);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::size_t counter = 0, n_comp = 0;
  struct Frame {
    std::size_t v;
    std::size_t next;
  };
  std::vector<Frame> call;
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnvisited) continue;
    call.push_back({root, 0});
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& fr = call.back();
      const std::size_t v = fr.v;
      if (fr.next < adj[v].size()) {
        const std::size_t w = adj[v][fr.next++];
        if (index[w] == kUnvisited) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = n_comp;
        } while (w != v);
        ++n_comp;
      }
      call.pop_back();
      if (!call.empty()) {
        const std::size_t parent = call.back().v;
        low[parent] = std::min(low[parent], low[v]);
      }
    }
  }
  return comp;
}

bool is_strongly_connected(const NetworkSample& sample) {
  if (sample.nodes <= 1) return true;
  const auto comp = strongly_connected_components(sample.nodes, sample.links);
  return std::all_of(comp.begin(), comp.end(), [&](std::size_t c) { return c == comp[0]; });
}

NetworkSample generate_topology(const TopoGenConfig& cfg) {
  if (cfg.n_nodes < 2) throw ConfigError("topology needs at least 2 nodes");
  if (!(cfg.alpha > 0.0) || !(cfg.beta > 0.0)) throw ConfigError("alpha and beta must be > 0");
  if (cfg.capacity_pool.empty()) throw ConfigError("capacity pool is empty");
  for (double c : cfg.capacity_pool) {
    if (!(c > 0.0)) throw ConfigError("capacity pool entries must be > 0");
  }
  if (!(cfg.buffer_size > 0.0)) throw ConfigError("buffer size must be > 0");

  const std::size_t n = cfg.n_nodes;
  Rng rng(mix_seed(cfg.seed, 1));

  // Out-degree credits.
  std::vector<std::size_t> credit(n);
  for (std::size_t v = 0; v < n; ++v) {
    const double x = rng.uniform(1.0, static_cast<double>(n));
    const double c = std::ceil(cfg.beta * std::pow(x, -cfg.alpha));
    credit[v] = std::min<std::size_t>(static_cast<std::size_t>(c), n - 1);
  }

  // Each node spends its credits on distinct random targets.
  std::set<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::size_t> others;
  for (std::size_t v = 0; v < n; ++v) {
    others.clear();
    for (std::size_t w = 0; w < n; ++w) {
      if (w != v) others.push_back(w);
    }
    for (std::size_t k = 0; k < credit[v]; ++k) {
      const std::size_t pick = k + rng.below(others.size() - k);
      std::swap(others[k], others[pick]);
      edges.emplace(v, others[k]);
    }
  }

  auto to_links = [&](const std::set<std::pair<std::size_t, std::size_t>>& es) {
    std::vector<Link> links;
    for (const auto& [a, b] : es) {
      Link l;
      l.src_node = a;
      l.dst_node = b;
      links.push_back(l);
    }
    return links;
  };

  // Connectivity repair: chain the strongly connected components in a random
  // order and close the ring, which makes the condensation a single cycle.
  constexpr int kRetryBudget = 4;
  for (int attempt = 0;; ++attempt) {
    const auto comp = strongly_connected_components(n, to_links(edges));
    const std::size_t n_comp = *std::max_element(comp.begin(), comp.end()) + 1;
    if (n_comp == 1) break;
    if (attempt == kRetryBudget) {
      throw GenerationError("could not make topology strongly connected");
    }
    std::vector<std::vector<std::size_t>> members(n_comp);
    for (std::size_t v = 0; v < n; ++v) members[comp[v]].push_back(v);
    std::vector<std::size_t> order(n_comp);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n_comp - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    for (std::size_t i = 0; i < n_comp; ++i) {
      const auto& from = members[order[i]];
      const auto& to = members[order[(i + 1) % n_comp]];
      edges.emplace(from[rng.below(from.size())], to[rng.below(to.size())]);
    }
  }

  NetworkSample s;
  s.nodes = n;
  s.links = to_links(edges);
  for (std::size_t i = 0; i < s.links.size(); ++i) {
    Link& l = s.links[i];
    l.id = i;
    l.capacity = {cfg.capacity_pool[rng.below(cfg.capacity_pool.size())], 1.0};
    l.sched_policy = SchedPolicy::Fifo;
    l.queue_ids = {i};
    s.queues.push_back({i, i, cfg.buffer_size, 0, 0.0});
  }
  return s;
}

}  // namespace netdt
