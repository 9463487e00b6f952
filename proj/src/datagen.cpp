#include "netdt/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "netdt/errors.hpp"
#include "netdt/rng.hpp"
#include "netdt/sample_io.hpp"
#include "netdt/topogen.hpp"

namespace netdt {

using nlohmann::json;

std::vector<Flow> route_shortest_paths(const NetworkSample& skeleton,
                                       std::span<const std::pair<NodeId, NodeId>> endpoints) {
  const std::size_t n = skeleton.nodes;
  // out[v] holds (neighbor, link) sorted by neighbor id.
  std::vector<std::vector<std::pair<NodeId, LinkId>>> out(n);
  std::vector<std::vector<NodeId>> in(n);
  for (const Link& l : skeleton.links) {
    out[l.src_node].emplace_back(l.dst_node, l.id);
    in[l.dst_node].push_back(l.src_node);
  }
  for (auto& v : out) std::sort(v.begin(), v.end());

  constexpr std::size_t kUnreached = static_cast<std::size_t>(-1);
  std::map<NodeId, std::vector<std::size_t>> dist_to;  // cached reverse BFS per destination
  auto distances = [&](NodeId dst) -> const std::vector<std::size_t>& {
    auto it = dist_to.find(dst);
    if (it != dist_to.end()) return it->second;
    std::vector<std::size_t> d(n, kUnreached);
    std::deque<NodeId> frontier{dst};
    d[dst] = 0;
    while (!frontier.empty()) {
      const NodeId v = frontier.front();
      frontier.pop_front();
      for (NodeId u : in[v]) {
        if (d[u] == kUnreached) {
          d[u] = d[v] + 1;
          frontier.push_back(u);
        }
      }
    }
    return dist_to.emplace(dst, std::move(d)).first->second;
  };

  std::vector<Flow> flows;
  flows.reserve(endpoints.size());
  for (const auto& [src, dst] : endpoints) {
    if (src >= n || dst >= n) throw RoutingError("flow endpoint outside node range");
    if (src == dst) throw RoutingError("flow source equals destination");
    const auto& d = distances(dst);
    if (d[src] == kUnreached) {
      throw RoutingError("node " + std::to_string(dst) + " unreachable from " +
                         std::to_string(src));
    }
    Flow f;
    f.id = flows.size();
    f.src_node = src;
    f.dst_node = dst;
    for (NodeId v = src; v != dst;) {
      // out[v] is sorted, so the first neighbor one step closer is the
      // smallest-id choice.
      for (const auto& [w, link] : out[v]) {
        if (d[w] + 1 == d[v]) {
          f.path.push_back({skeleton.links[link].queue_ids.front(), link});
          v = w;
          break;
        }
      }
    }
    flows.push_back(std::move(f));
  }
  return flows;
}

SimConfig horizon_for(const NetworkSample& sample, double packets_per_flow, std::uint64_t seed) {
  double mean_gap = 0.0;
  for (const Flow& f : sample.flows) mean_gap += f.traffic.avg_pkt_size / f.traffic.avg_rate;
  if (!sample.flows.empty()) mean_gap /= static_cast<double>(sample.flows.size());
  SimConfig cfg;
  cfg.measure = std::max(1e-3, packets_per_flow * mean_gap);
  cfg.warmup = 0.1 * cfg.measure;
  cfg.seed = seed;
  return cfg;
}

NetworkSample sample_traffic(const NetworkSample& routed, double intensity, std::uint64_t seed,
                             const TrafficConfig& cfg) {
  if (!(intensity > 0.0 && intensity <= 1.0)) throw ConfigError("intensity must lie in (0, 1]");
  if (!(cfg.rate_min > 0.0 && cfg.rate_max >= cfg.rate_min)) {
    throw ConfigError("traffic rate band must satisfy 0 < rate_min <= rate_max");
  }
  if (!(cfg.pkt_size_min > 0.0 && cfg.pkt_size_max >= cfg.pkt_size_min)) {
    throw ConfigError("packet size band must satisfy 0 < pkt_size_min <= pkt_size_max");
  }
  Rng rng(mix_seed(seed, 0x7aff));
  NetworkSample s = routed;
  s.labels.reset();
  for (Flow& f : s.flows) {
    if (f.path.empty()) throw ConfigError("sample_traffic needs routed flows");
    TrafficDescriptor& t = f.traffic;
    t.avg_rate = rng.uniform(cfg.rate_min, cfg.rate_max);
    t.avg_pkt_size = rng.uniform(cfg.pkt_size_min, cfg.pkt_size_max);
    t.pkt_size_dist =
        rng.uniform() < cfg.fixed_size_fraction ? PacketSizeDist::Fixed : PacketSizeDist::Exponential;
    if (rng.uniform() < cfg.on_off_fraction) {
      t.model = TrafficModel::OnOff;
      t.on_mean = rng.uniform(cfg.on_mean_min, cfg.on_mean_max);
      t.off_mean = rng.uniform(cfg.off_mean_min, cfg.off_mean_max);
    } else {
      t.model = TrafficModel::Poisson;
      t.on_mean = t.off_mean = 0.0;
    }
  }
  const double target = intensity * cfg.max_loss_at_full_intensity;
  const double tolerance = std::min(0.01, 0.5 * target);
  const SimConfig probe = horizon_for(s, cfg.calibration_packets_per_flow, mix_seed(seed, 0xca1));
  // The horizon is fixed before scaling; faster rates only add packets.
  return calibrate_intensity(s, target, probe, tolerance).sample;
}

std::vector<double> valid_references(double capacity, double s_min, double s_max,
                                     std::span<const double> c_ref_pool) {
  constexpr double kSlack = 1e-9;
  std::vector<double> out;
  for (double c : c_ref_pool) {
    const double s = capacity / c;
    if (s >= s_min * (1.0 - kSlack) && s <= s_max * (1.0 + kSlack)) out.push_back(c);
  }
  return out;
}

NetworkSample augment_capacity(const NetworkSample& sample, std::pair<double, double> s_f_range,
                               std::span<const double> c_ref_pool, std::uint64_t seed) {
  const auto [s_min, s_max] = s_f_range;
  if (!(s_min > 0.0 && s_max >= s_min)) throw ConfigError("s_f range must satisfy 0 < min <= max");
  if (c_ref_pool.empty()) throw ConfigError("c_ref pool is empty");
  Rng rng(mix_seed(seed, 0xa06));
  NetworkSample out = sample;
  for (Link& l : out.links) {
    const double cap = l.capacity.effective();
    const auto refs = valid_references(cap, s_min, s_max, c_ref_pool);
    if (refs.empty()) {
      throw AugmentationError("capacity " + std::to_string(cap) + " bits/s on link " +
                              std::to_string(l.id) + " has no factorization with s_f in [" +
                              std::to_string(s_min) + ", " + std::to_string(s_max) + "]");
    }
    const double c_ref = refs[rng.below(refs.size())];
    l.capacity = {c_ref, cap / c_ref};
  }
  return out;
}

namespace {

std::vector<std::pair<NodeId, NodeId>> pick_endpoints(std::size_t n, double flows_per_node,
                                                      Rng& rng) {
  std::vector<std::pair<NodeId, NodeId>> all;
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = 0; b < n; ++b) {
      if (a != b) all.emplace_back(a, b);
    }
  }
  if (flows_per_node <= 0.0) return all;
  const auto want = std::min<std::size_t>(
      all.size(), static_cast<std::size_t>(std::llround(flows_per_node * static_cast<double>(n))));
  for (std::size_t i = 0; i < want; ++i) std::swap(all[i], all[i + rng.below(all.size() - i)]);
  all.resize(want);
  std::sort(all.begin(), all.end());
  return all;
}

void assign_capacities(NetworkSample& s, std::vector<double> capacities, double per_flow) {
  std::sort(capacities.begin(), capacities.end());
  std::vector<std::size_t> load(s.links.size(), 0);
  for (const Flow& f : s.flows) {
    for (const Hop& h : f.path) ++load[h.link_id];
  }
  for (Link& l : s.links) {
    const double demand = static_cast<double>(load[l.id]) * per_flow;
    auto it = std::lower_bound(capacities.begin(), capacities.end(), demand);
    const double cap = it == capacities.end() ? capacities.back() : *it;
    l.capacity = {cap, 1.0};
  }
}

void check_config(const DatasetConfig& cfg) {
  if (cfg.bands.empty()) throw ConfigError("dataset config has no size bands");
  for (const SizeBand& b : cfg.bands) {
    if (b.split != "train" && b.split != "test") {
      throw ConfigError("band split must be 'train' or 'test', got '" + b.split + "'");
    }
    if (b.sizes.empty() || b.capacities.empty()) {
      throw ConfigError("band needs sizes and capacities");
    }
    for (std::size_t n : b.sizes) {
      if (n < 2) throw ConfigError("topology sizes must be >= 2");
    }
    for (double c : b.capacities) {
      if (!(c > 0.0)) throw ConfigError("capacities must be > 0");
    }
  }
  if (cfg.augmentations < 1) throw ConfigError("augmentations must be >= 1");
  if (!(cfg.s_f_range.first > 0.0 && cfg.s_f_range.second >= cfg.s_f_range.first)) {
    throw ConfigError("s_f range must satisfy 0 < min <= max");
  }
  if (cfg.c_ref_pool.empty()) throw ConfigError("c_ref pool is empty");
  if (!(cfg.intensity_range.first > 0.0 && cfg.intensity_range.second <= 1.0 &&
        cfg.intensity_range.first <= cfg.intensity_range.second)) {
    throw ConfigError("intensity range must lie in (0, 1]");
  }
  if (!(cfg.val_fraction >= 0.0 && cfg.val_fraction < 1.0)) {
    throw ConfigError("val_fraction must lie in [0, 1)");
  }
  if (!(cfg.packets_per_flow > 0.0)) throw ConfigError("packets_per_flow must be > 0");
}

}  // namespace

GeneratedSample generate_sample(const DatasetConfig& cfg, const SizeBand& band, std::size_t n_nodes,
                                std::size_t index, bool to_validation) {
  const std::uint64_t seed = mix_seed(cfg.seed, index);
  Rng rng(mix_seed(seed, 0xd47a));

  TopoGenConfig topo = default_topo_config(n_nodes, seed);
  topo.capacity_pool = band.capacities;
  NetworkSample s = generate_topology(topo);

  const auto endpoints = pick_endpoints(n_nodes, band.flows_per_node, rng);
  s.flows = route_shortest_paths(s, endpoints);
  assign_capacities(s, band.capacities, cfg.capacity_per_flow);

  const double intensity = rng.uniform(cfg.intensity_range.first, cfg.intensity_range.second);
  s = sample_traffic(s, intensity, mix_seed(seed, 0x7f), cfg.traffic);
  s.labels = simulate(s, horizon_for(s, cfg.packets_per_flow, mix_seed(seed, 0x51)));

  GeneratedSample out;
  out.split = band.split == "test" ? "test" : (to_validation ? "val" : "train");
  const std::size_t variants = out.split == "train" ? cfg.augmentations : 1;
  for (std::size_t v = 0; v < variants; ++v) {
    NetworkSample aug = augment_capacity(s, cfg.s_f_range, cfg.c_ref_pool, mix_seed(seed, 100 + v));
    aug.meta = SampleMeta{seed, out.split, static_cast<int>(v)};
    const ValidationReport report = validate_sample(aug);
    if (!report.ok()) throw ValidationError("generated sample is invalid:\n" + report.summary());
    out.variants.push_back(std::move(aug));
  }
  return out;
}

json dataset_config_to_json(const DatasetConfig& cfg) {
  json bands = json::array();
  for (const SizeBand& b : cfg.bands) {
    bands.push_back({{"split", b.split},
                     {"sizes", b.sizes},
                     {"samples_per_size", b.samples_per_size},
                     {"capacities", b.capacities},
                     {"flows_per_node", b.flows_per_node}});
  }
  const TrafficConfig& t = cfg.traffic;
  return {{"bands", std::move(bands)},
          {"augmentations", cfg.augmentations},
          {"val_fraction", cfg.val_fraction},
          {"intensity_range", {cfg.intensity_range.first, cfg.intensity_range.second}},
          {"s_f_range", {cfg.s_f_range.first, cfg.s_f_range.second}},
          {"c_ref_pool", cfg.c_ref_pool},
          {"capacity_per_flow", cfg.capacity_per_flow},
          {"packets_per_flow", cfg.packets_per_flow},
          {"traffic",
           {{"rate_min", t.rate_min},
            {"rate_max", t.rate_max},
            {"pkt_size_range", {t.pkt_size_min, t.pkt_size_max}},
            {"on_off_fraction", t.on_off_fraction},
            {"on_mean_range", {t.on_mean_min, t.on_mean_max}},
            {"off_mean_range", {t.off_mean_min, t.off_mean_max}},
            {"fixed_size_fraction", t.fixed_size_fraction},
            {"max_loss_at_full_intensity", t.max_loss_at_full_intensity},
            {"calibration_packets_per_flow", t.calibration_packets_per_flow}}},
          {"scaling", scaling_to_json(cfg.scaling)},
          {"seed", cfg.seed},
          {"workers", cfg.workers},
          {"max_abort_fraction", cfg.max_abort_fraction}};
}

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& into) {
  if (auto it = j.find(key); it != j.end()) into = it->get<T>();
}

void read_pair(const json& j, const char* key, double& a, double& b) {
  if (auto it = j.find(key); it != j.end()) {
    const auto v = it->get<std::vector<double>>();
    if (v.size() != 2) throw ConfigError(std::string(key) + " must have two entries");
    a = v[0];
    b = v[1];
  }
}

}  // namespace

DatasetConfig dataset_config_from_json(const json& j) {
  DatasetConfig cfg;
  try {
    if (auto it = j.find("bands"); it != j.end()) {
      cfg.bands.clear();
      for (const json& jb : *it) {
        SizeBand b;
        b.split = jb.at("split").get<std::string>();
        b.sizes = jb.at("sizes").get<std::vector<std::size_t>>();
        read_opt(jb, "samples_per_size", b.samples_per_size);
        b.capacities = jb.at("capacities").get<std::vector<double>>();
        read_opt(jb, "flows_per_node", b.flows_per_node);
        cfg.bands.push_back(std::move(b));
      }
    }
    read_opt(j, "augmentations", cfg.augmentations);
    read_opt(j, "val_fraction", cfg.val_fraction);
    read_pair(j, "intensity_range", cfg.intensity_range.first, cfg.intensity_range.second);
    read_pair(j, "s_f_range", cfg.s_f_range.first, cfg.s_f_range.second);
    read_opt(j, "c_ref_pool", cfg.c_ref_pool);
    read_opt(j, "capacity_per_flow", cfg.capacity_per_flow);
    read_opt(j, "packets_per_flow", cfg.packets_per_flow);
    if (auto it = j.find("traffic"); it != j.end()) {
      TrafficConfig& t = cfg.traffic;
      read_opt(*it, "rate_min", t.rate_min);
      read_opt(*it, "rate_max", t.rate_max);
      read_pair(*it, "pkt_size_range", t.pkt_size_min, t.pkt_size_max);
      read_opt(*it, "on_off_fraction", t.on_off_fraction);
      read_pair(*it, "on_mean_range", t.on_mean_min, t.on_mean_max);
      read_pair(*it, "off_mean_range", t.off_mean_min, t.off_mean_max);
      read_opt(*it, "fixed_size_fraction", t.fixed_size_fraction);
      read_opt(*it, "max_loss_at_full_intensity", t.max_loss_at_full_intensity);
      read_opt(*it, "calibration_packets_per_flow", t.calibration_packets_per_flow);
    }
    if (auto it = j.find("scaling"); it != j.end()) cfg.scaling = scaling_from_json(*it);
    read_opt(j, "seed", cfg.seed);
    read_opt(j, "workers", cfg.workers);
    read_opt(j, "max_abort_fraction", cfg.max_abort_fraction);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed dataset config: ") + e.what());
  }
  check_config(cfg);
  return cfg;
}

DatasetSummary build_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir,
                             const ProgressFn& progress) {
  check_config(cfg);

  struct Job {
    const SizeBand* band;
    std::size_t nodes;
    bool to_validation;
  };
  std::vector<Job> jobs;
  for (const SizeBand& band : cfg.bands) {
    for (std::size_t n : band.sizes) {
      for (std::size_t k = 0; k < band.samples_per_size; ++k) {
        const std::size_t index = jobs.size();
        Rng split_rng(mix_seed(cfg.seed ^ 0x5b117ULL, index));
        const bool val = band.split == "train" && split_rng.uniform() < cfg.val_fraction;
        jobs.push_back({&band, n, val});
      }
    }
  }

  std::vector<std::optional<GeneratedSample>> results(jobs.size());
  std::vector<std::string> failures(jobs.size());
  std::atomic<std::size_t> next{0}, done{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = generate_sample(cfg, *jobs[i].band, jobs[i].nodes, i, jobs[i].to_validation);
      } catch (const Error& e) {
        failures[i] = e.what();
      }
      const std::size_t d = ++done;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(d, jobs.size());
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(cfg.workers, jobs.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  DatasetSummary summary;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!results[i]) {
      ++summary.aborted;
      std::cerr << "netdt: sample " << i << " (" << jobs[i].nodes
                << " nodes) aborted: " << failures[i] << '\n';
    }
  }
  if (static_cast<double>(summary.aborted) >
      cfg.max_abort_fraction * static_cast<double>(jobs.size())) {
    throw GenerationError(std::to_string(summary.aborted) + " of " + std::to_string(jobs.size()) +
                          " samples aborted");
  }

  std::filesystem::create_directories(out_dir);
  std::ofstream train(out_dir / "train.jsonl"), val(out_dir / "val.jsonl"),
      test(out_dir / "test.jsonl");
  if (!train || !val || !test) throw ConfigError("cannot write into " + out_dir.string());
  json seeds = json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!results[i]) continue;
    const GeneratedSample& g = *results[i];
    std::ofstream& out = g.split == "train" ? train : (g.split == "val" ? val : test);
    std::size_t& count = g.split == "train" ? summary.train_lines
                         : g.split == "val" ? summary.val_lines
                                            : summary.test_lines;
    for (const NetworkSample& s : g.variants) {
      out << sample_to_line(s) << '\n';
      ++count;
    }
    seeds.push_back({{"index", i},
                     {"split", g.split},
                     {"nodes", jobs[i].nodes},
                     {"topo_seed", g.variants.front().meta->topo_seed}});
  }

  summary.manifest = {{"format_version", kManifestFormatVersion},
                      {"config", dataset_config_to_json(cfg)},
                      {"counts",
                       {{"train", summary.train_lines},
                        {"val", summary.val_lines},
                        {"test", summary.test_lines},
                        {"aborted", summary.aborted}}},
                      {"samples", std::move(seeds)},
                      {"scaling", scaling_to_json(cfg.scaling)}};
  std::ofstream manifest(out_dir / "manifest.json");
  manifest << summary.manifest.dump(2) << '\n';
  return summary;
}

std::optional<FeatureScaling> manifest_scaling(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  if (!std::filesystem::exists(path)) return std::nullopt;
  std::ifstream in(path);
  json j;
  try {
    in >> j;
    if (j.at("format_version").get<int>() != kManifestFormatVersion) {
      throw ConfigError("unsupported manifest format_version in " + path.string());
    }
    return scaling_from_json(j.at("scaling"));
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest " + path.string() + ": " + e.what());
  }
}

}  // namespace netdt
