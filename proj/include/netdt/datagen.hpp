#pragma once

// Dataset construction: routing, traffic sampling with loss calibration,
// capacity re-factorization, and split-tagged JSON-Lines output.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "netdt/model.hpp"
#include "netdt/network.hpp"
#include "netdt/simulator.hpp"

namespace netdt {

// Minimum-hop paths; among equal-length paths the smallest next-node id is
// taken at every step. Each hop uses the link's first queue. Returns flows
// with ids 0..n-1 and a default traffic descriptor.
std::vector<Flow> route_shortest_paths(const NetworkSample& skeleton,
                                       std::span<const std::pair<NodeId, NodeId>> endpoints);

struct TrafficConfig {
  double rate_min = 1e6;   // bits/second, before calibration
  double rate_max = 5e6;
  double pkt_size_min = 1000.0;  // bits; per-flow mean drawn uniformly
  double pkt_size_max = 4000.0;
  double on_off_fraction = 0.0;  // share of flows using ON_OFF
  double on_mean_min = 0.005;    // seconds
  double on_mean_max = 0.02;
  double off_mean_min = 0.005;
  double off_mean_max = 0.02;
  double fixed_size_fraction = 0.0;  // share of flows with FIXED packet sizes
  double max_loss_at_full_intensity = 0.03;
  // Calibration probes: packets per flow on average and number of probes.
  double calibration_packets_per_flow = 800.0;
};

// Simulation horizon giving `packets_per_flow` packets to an average flow;
// warmup is a tenth of the measurement window.
SimConfig horizon_for(const NetworkSample& sample, double packets_per_flow, std::uint64_t seed);

// Draws per-flow descriptors (rates uniform in [rate_min, rate_max], mean
// packet sizes uniform in [pkt_size_min, pkt_size_max]), then
// scales all rates so the maximum per-flow loss approaches
// intensity * max_loss_at_full_intensity. Requires routed flows.
NetworkSample sample_traffic(const NetworkSample& routed, double intensity, std::uint64_t seed,
                             const TrafficConfig& cfg = {});

// Valid reference capacities for an effective capacity: pool entries c with
// capacity / c inside [s_min, s_max] (1e-9 relative slack).
std::vector<double> valid_references(double capacity, double s_min, double s_max,
                                     std::span<const double> c_ref_pool);

// Replace each link's (c_ref, s_f) by a uniformly chosen valid factorization
// of the same effective capacity. Labels are kept. Throws AugmentationError
// naming the first capacity with no valid factorization.
NetworkSample augment_capacity(const NetworkSample& sample, std::pair<double, double> s_f_range,
                               std::span<const double> c_ref_pool, std::uint64_t seed);

// Effective capacities are assigned from a per-band list after routing: the
// smallest entry covering (flows on the link) * capacity_per_flow, capped at
// the largest entry.
struct SizeBand {
  std::string split;             // "train" or "test"; train bands also feed validation
  std::vector<std::size_t> sizes;
  std::size_t samples_per_size = 1;
  std::vector<double> capacities;  // bits/second
  double flows_per_node = 0.0;     // 0 means full src-dst mesh
};

struct DatasetConfig {
  std::vector<SizeBand> bands;
  std::size_t augmentations = 4;      // variants per training sample
  double val_fraction = 0.0;          // share of train-band topologies sent to validation
  std::pair<double, double> intensity_range = {0.1, 1.0};
  std::pair<double, double> s_f_range = {1.0, 10.0};
  std::vector<double> c_ref_pool = {25e6, 50e6, 100e6, 250e6, 500e6, 1000e6};
  double capacity_per_flow = 10e6;
  double packets_per_flow = 3000.0;   // labeling simulation length
  TrafficConfig traffic;
  FeatureScaling scaling;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  double max_abort_fraction = 0.01;
};

nlohmann::json dataset_config_to_json(const DatasetConfig& cfg);
// Missing keys keep their defaults. Throws ConfigError on invalid values.
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

struct GeneratedSample {
  std::string split;  // train, val or test
  std::vector<NetworkSample> variants;
};

// Full pipeline for one topology: generate, route, assign capacities, sample
// traffic, simulate, augment. `index` is the sample's position in the
// dataset; the derived seed depends only on (cfg.seed, index).
GeneratedSample generate_sample(const DatasetConfig& cfg, const SizeBand& band, std::size_t n_nodes,
                                std::size_t index, bool to_validation);

struct DatasetSummary {
  std::size_t train_lines = 0;
  std::size_t val_lines = 0;
  std::size_t test_lines = 0;
  std::size_t aborted = 0;
  nlohmann::json manifest;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

// Writes train.jsonl, val.jsonl, test.jsonl and manifest.json into out_dir.
DatasetSummary build_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir,
                             const ProgressFn& progress = {});

inline constexpr int kManifestFormatVersion = 1;

// Feature scaling recorded in a dataset manifest, if the directory has one.
std::optional<FeatureScaling> manifest_scaling(const std::filesystem::path& dir);

}  // namespace netdt
