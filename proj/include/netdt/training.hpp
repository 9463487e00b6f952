#pragma once

// Per-sample training loop, evaluation by topology size, and the CSV
// reports both produce.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "netdt/model.hpp"
#include "netdt/network.hpp"

namespace netdt {

enum class NanPolicy { Abort, SkipSample };

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t samples_per_epoch = 400;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 0;  // epochs; 0 keeps only the best checkpoint
  double occupancy_loss_weight = 0.0;
  // Rescales the gradient to this global L2 norm before each Adam step when
  // it is larger; 0 disables clipping.
  double max_grad_norm = 0.0;
  NanPolicy nan_policy = NanPolicy::Abort;
  // Above 1, gradients of `workers` samples are averaged per Adam step.
  std::size_t workers = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_mse = 0.0;
  std::optional<double> val_mse;
  std::size_t skipped = 0;
};

struct TrainResult {
  ModelParams best;
  ModelParams last;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&, const ModelParams&)>;

// Mean of the flows' simulated mean delays over a labeled set.
double mean_label_delay(const std::vector<NetworkSample>& samples);

// Normalized loss of one sample: MSE of (reconstructed - simulated) delays
// divided by params.delay_unit, plus the weighted occupancy MSE. Requires
// labels.
ad::Var sample_loss(ad::Tape& tape, const NetworkSample& sample, const ModelParams& params,
                    double occupancy_weight);

// Mean sample loss over a labeled set without updating anything.
double dataset_loss(const std::vector<NetworkSample>& samples, const ModelParams& params,
                    double occupancy_weight = 0.0);

// Trains from a Glorot initialization derived from cfg.seed. Selects the
// best epoch by validation loss (training loss when `val` is empty).
// Throws ConfigError on an empty training set or unlabeled samples and
// NumericError on non-finite losses under NanPolicy::Abort.
TrainResult train(const std::vector<NetworkSample>& train_set,
                  const std::vector<NetworkSample>& val, const ModelConfig& model_cfg,
                  const FeatureScaling& scaling, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

struct SizeBucket {
  std::size_t lo = 0;
  std::size_t hi = 0;  // inclusive
};

std::vector<SizeBucket> default_eval_buckets();

struct FlowError {
  std::size_t sample = 0;
  std::size_t nodes = 0;
  std::size_t flow = 0;
  double true_delay = 0.0;
  double pred_delay = 0.0;
  double abs_rel_error = 0.0;
};

struct BucketStats {
  SizeBucket bucket;
  std::size_t samples = 0;
  std::size_t flows = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct EvalReport {
  std::vector<FlowError> flows;
  std::vector<BucketStats> buckets;  // only buckets with at least one flow
  double mean_abs_rel_error = 0.0;   // over every flow
};

// Linear-interpolated quantile (p in [0, 1]) of unsorted values.
double quantile(std::vector<double> values, double p);

// |pred - true| / true per flow, aggregated by node count. Throws ConfigError
// on unlabeled samples.
EvalReport evaluate(const std::vector<NetworkSample>& samples, const ModelParams& params,
                    const std::vector<SizeBucket>& buckets = default_eval_buckets(),
                    std::size_t workers = 1);

// Same report for externally supplied per-flow delays (one vector per sample).
EvalReport evaluate_predictions(const std::vector<NetworkSample>& samples,
                                const std::vector<std::vector<double>>& delays,
                                const std::vector<SizeBucket>& buckets = default_eval_buckets());

void write_report_csv(std::ostream& out, const EvalReport& report);
void write_flow_errors_csv(std::ostream& out, const EvalReport& report);

// Throws ConfigError when the dataset directory's manifest records feature
// scaling different from the checkpoint's.
void check_scaling(const ModelParams& params, const std::filesystem::path& data_dir);

// Reads <dir>/<split>.jsonl; a missing file yields an empty set.
std::vector<NetworkSample> load_split(const std::filesystem::path& dir, const std::string& split);

}  // namespace netdt
