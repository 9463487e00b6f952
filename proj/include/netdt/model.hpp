#pragma once

// Three-stage flow/queue/link message-passing model with an occupancy
// readout and physical delay reconstruction.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "netdt/layers.hpp"
#include "netdt/network.hpp"
#include "netdt/tape.hpp"

namespace netdt {

// How link capacity enters the link features. Factorized feeds
// [c_ref, s_f]; Raw feeds the effective capacity as one number (used for
// the no-augmentation ablation).
enum class CapacityEncoding { Factorized, Raw };

std::string_view to_string(CapacityEncoding e);
CapacityEncoding parse_capacity_encoding(std::string_view s);

// Fixed units dividing raw magnitudes so features are O(1). Chosen when a
// dataset is created and carried in its manifest and in every checkpoint.
struct FeatureScaling {
  double capacity_unit = 1e8;  // bits/second
  double rate_unit = 1e7;      // bits/second
  double pkt_unit = 1e4;       // bits
  double buffer_unit = 1e4;    // bits

  friend bool operator==(const FeatureScaling&, const FeatureScaling&) = default;
};

nlohmann::json scaling_to_json(const FeatureScaling& s);
FeatureScaling scaling_from_json(const nlohmann::json& j);

inline constexpr std::size_t kPriorityLevels = 3;
inline constexpr std::size_t kQueueFeatureSize = 2 + kPriorityLevels;
inline constexpr std::size_t kFlowFeatureSize = 2 + kTrafficModelCount;
std::size_t link_feature_size(CapacityEncoding e);

struct ModelConfig {
  std::size_t hidden = 32;
  std::size_t t_iters = 8;
  std::size_t l_max = 8;
  CapacityEncoding capacity_encoding = CapacityEncoding::Factorized;
};

// One column per entity, in id order.
struct FeatureMatrices {
  ad::Matrix links;   // rows: [c_ref, s_f, one-hot policy] or [capacity, one-hot policy]
  ad::Matrix queues;  // rows: [buffer, one-hot priority, weight]
  ad::Matrix flows;   // rows: [rate, packet size, one-hot traffic model]
};

FeatureMatrices extract_features(const NetworkSample& sample, const ModelConfig& cfg,
                                 const FeatureScaling& scaling);

struct ModelParams {
  ModelConfig config;
  FeatureScaling scaling;
  // Delay normalization used by the training loss (seconds).
  double delay_unit = 1e-3;

  ad::GruParams frnn;  // input 2h -> h
  ad::GruParams u_q;   // input h -> h
  ad::GruParams lrnn;  // input h -> h
  ad::MlpParams r_q;   // h -> h -> 1, sigmoid
  ad::MlpParams r_f;   // h -> h -> 1, identity

  // Zero-initialized parameters; throws ConfigError on an invalid config.
  ModelParams(const ModelConfig& config, const FeatureScaling& scaling);
  // Glorot-initialized from seed.
  ModelParams(const ModelConfig& config, const FeatureScaling& scaling, std::uint64_t seed);

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
};

// hidden x count state blocks, one column per entity in id order.
struct HiddenStates {
  ad::Var flows;
  ad::Var queues;
  ad::Var links;
};

// h0 = [x, 0 ... 0] for every flow, queue and link.
HiddenStates init_states(ad::Tape& tape, const NetworkSample& sample, const ModelParams& params);

// Orders entities by sequence length (longest first, then id) so the ones
// still active at step k always form a column prefix of the batch.
struct ScanSchedule {
  std::vector<std::size_t> order;     // batch column -> entity id
  std::vector<std::size_t> position;  // entity id -> batch column
  std::vector<std::size_t> active;    // active[k] = entities with length > k
};

ScanSchedule make_schedule(std::span<const std::size_t> lengths);

struct FlowStageOutput {
  ad::Var flows;                  // final flow states, id order
  std::vector<ad::Var> steps;     // steps[k]: states after hop k, batch order
  ScanSchedule schedule;

  // Column of the message that flow f emits at hop `hop`.
  ad::ColumnTerm message(std::size_t f, std::size_t hop, std::uint32_t dst_col) const;
};

// FRNN over each flow's (h_q, h_l) hop sequence, in chunks of at most l_max
// hops with the state carried between chunks.
FlowStageOutput flow_stage(ad::Tape& tape, const HiddenStates& states,
                           const NetworkSample& sample, const ModelParams& params);

// Sum incoming flow messages per queue (zero when none) and apply U_q. The
// messages for each queue are summed in the order given by index.
ad::Var queue_stage(ad::Tape& tape, const HiddenStates& states, const FlowStageOutput& flow_out,
                    const SampleIndex& index, const ModelParams& params);

// LRNN over each link's queues in (priority, id) order.
ad::Var link_stage(ad::Tape& tape, ad::Var link_states, ad::Var queue_states,
                   const SampleIndex& index, const ModelParams& params);

struct ForwardOutput {
  ad::Var occupancy;  // 1 x queues, in (0, 1)
  ad::Var flow_head;  // 1 x flows, R_f output
  HiddenStates states;  // after the last iteration
};

// t_iters rounds of flow, queue and link stages, then the readouts. Throws
// NumericError naming the stage and iteration if a state turns non-finite.
// With keep_graph = false, values of finished iterations are released, which
// bounds memory for inference but rules out backward().
ForwardOutput forward(ad::Tape& tape, const NetworkSample& sample, const ModelParams& params,
                      bool keep_graph = true);

// Per-flow delay: sum over hops of (o_q * buffer_q + avg_pkt_size) / capacity.
// The tape version maps a 1 x queues occupancy node to a 1 x flows node.
ad::Var reconstruct_delay(ad::Tape& tape, const NetworkSample& sample, ad::Var occupancy);
std::vector<double> reconstruct_delay(const NetworkSample& sample,
                                      std::span<const double> occupancy);

struct Prediction {
  std::vector<double> occupancy;
  std::vector<double> delay;
  std::vector<double> flow_head;
};

// Throws NumericError when a state or reconstructed delay is not finite.
Prediction predict(const NetworkSample& sample, const ModelParams& params);

inline constexpr int kCheckpointFormatVersion = 1;

nlohmann::json checkpoint_to_json(const ModelParams& params);
ModelParams checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace netdt
