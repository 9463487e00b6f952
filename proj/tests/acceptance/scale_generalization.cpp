#include <algorithm>
#include <chrono>
#include <filesystem>

#include "acceptance.hpp"
#include "netdt/datagen.hpp"

namespace netdt::acceptance {

namespace {

// Training topologies of 8 to 20 nodes on the 25 to 250 Mbps pool; test
// topologies of 40 to 80 nodes whose capacities reach 2.5 Gbps, each of
// which factors into a pool reference and s_f in [1, 10].
DatasetConfig generalization_dataset(bool test_split) {
  DatasetConfig cfg;
  const std::vector<double> pool = {25e6, 50e6, 100e6, 250e6};
  if (test_split) {
    cfg.bands = {{"test", {40, 50, 60, 70, 80}, 2, {25e6, 50e6, 100e6, 250e6, 500e6, 1000e6, 2500e6}, 0}};
    cfg.seed = 2;
  } else {
    cfg.bands = {{"train", {8, 10, 12, 14, 16, 18, 20}, 30, pool, 0}};
    cfg.val_fraction = 0.2;
    cfg.seed = 1;
  }
  cfg.c_ref_pool = pool;
  cfg.capacity_per_flow = 4e6;
  cfg.traffic.rate_min = 1e6;
  cfg.traffic.rate_max = 5e6;
  cfg.traffic.calibration_packets_per_flow = 500;
  cfg.packets_per_flow = 1500;
  cfg.max_abort_fraction = 0.2;
  return cfg;
}

TrainConfig generalization_training() {
  TrainConfig tc;
  tc.epochs = 60;
  tc.samples_per_epoch = 400;
  tc.lr = 5e-5;
  tc.occupancy_loss_weight = 1.0;
  tc.max_grad_norm = 0.25;
  return tc;
}

constexpr double kMaxError = 0.15;
constexpr double kMinAblationRatio = 1.5;
constexpr double kMaxSeconds = 2.0 * 3600.0;

}  // namespace

const GeneralizationRun& generalization_run(Context& ctx) {
  if (ctx.generalization) return *ctx.generalization;
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = ctx.work_dir / "generalization";
  std::filesystem::create_directories(dir);
  build_dataset(generalization_dataset(false), dir / "train");
  build_dataset(generalization_dataset(true), dir / "test");

  const auto train_set = load_split(dir / "train", "train");
  const auto val_set = load_split(dir / "train", "val");
  const auto test_set = load_split(dir / "test", "test");

  GeneralizationRun run;
  const TrainResult augmented = train(train_set, val_set, ModelConfig{}, FeatureScaling{}, generalization_training());
  run.history = augmented.history;
  run.augmented_error = evaluate(test_set, augmented.best).mean_abs_rel_error;

  // Ablation: raw capacities, unaugmented training topologies.
  std::vector<NetworkSample> raw_train;
  for (const auto& s : train_set) {
    if (!s.meta || s.meta->variant == 0) raw_train.push_back(s);
  }
  ModelConfig raw_cfg;
  raw_cfg.capacity_encoding = CapacityEncoding::Raw;
  const TrainResult raw = train(raw_train, val_set, raw_cfg, FeatureScaling{}, generalization_training());
  run.raw_error = evaluate(test_set, raw.best).mean_abs_rel_error;

  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ctx.generalization = run;
  return *ctx.generalization;
}

Outcome scale_generalization(Context& ctx) {
  const GeneralizationRun& run = generalization_run(ctx);
  const double ratio = run.raw_error / run.augmented_error;
  const bool pass = run.augmented_error <= kMaxError && ratio >= kMinAblationRatio && run.seconds <= kMaxSeconds;
  return {pass, "test MARE " + fmt(run.augmented_error) + " (max " + fmt(kMaxError) + "), raw ablation " +
                    fmt(run.raw_error) + " ratio " + fmt(ratio, 3) + " (min " + fmt(kMinAblationRatio, 3) +
                    "), pipeline " + fmt(run.seconds / 60.0, 3) + " min (max 120)"};
}

Outcome training_sanity(Context& ctx) {
  const GeneralizationRun& run = generalization_run(ctx);
  const auto& h = run.history;
  if (h.size() < 60 || !h.front().val_mse || !h[59].val_mse) return {false, "missing validation history"};
  const double first = *h.front().val_mse, last = *h[59].val_mse;
  std::string jumps;
  double worst = 0.0;
  for (std::size_t e = 5; e < h.size(); ++e) {  // epoch e+1 versus epoch e
    worst = std::max(worst, *h[e].val_mse / *h[e - 1].val_mse);
    if (*h[e].val_mse > 2.0 * *h[e - 1].val_mse) {
      jumps += (jumps.empty() ? "" : " ") + std::to_string(e + 1);
    }
  }
  const bool pass = last <= 0.5 * first && jumps.empty();
  return {pass, "val epoch 1 " + fmt(first) + " epoch 60 " + fmt(last) + " ratio " + fmt(last / first, 3) +
                    " (max 0.5), largest epoch-over-epoch ratio after epoch 5 " + fmt(worst, 3) +
                    " (max 2), jumps: " + (jumps.empty() ? "none" : jumps)};
}

}  // namespace netdt::acceptance
