#include "netdt/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include "netdt/datagen.hpp"
#include "netdt/errors.hpp"
#include "netdt/rng.hpp"
#include "netdt/sample_io.hpp"

namespace netdt {

using ad::Matrix;
using ad::Tape;
using ad::Var;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void require_labels(const NetworkSample& s, const char* what) {
  if (!s.labels) throw ConfigError(std::string(what) + " sample without labels");
}

// Runs fn(i) for i in [0, n) on up to `workers` threads; fn must only touch
// per-index state.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void copy_values(const ModelParams& from, ModelParams& to) {
  const auto src = from.parameters();
  const auto dst = to.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value;
  to.delay_unit = from.delay_unit;
}

}  // namespace

double mean_label_delay(const std::vector<NetworkSample>& samples) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const NetworkSample& s : samples) {
    require_labels(s, "training");
    for (const FlowLabels& f : s.labels->flows) {
      sum += f.mean_delay;
      ++n;
    }
  }
  if (n == 0) throw ConfigError("training set has no flows");
  return sum / static_cast<double>(n);
}

Var sample_loss(Tape& tape, const NetworkSample& sample, const ModelParams& params,
                double occupancy_weight) {
  require_labels(sample, "training");
  const ForwardOutput fwd = forward(tape, sample, params);
  const Var delay = reconstruct_delay(tape, sample, fwd.occupancy);
  Matrix target(1, static_cast<Eigen::Index>(sample.flows.size()));
  for (std::size_t f = 0; f < sample.flows.size(); ++f) {
    target(0, static_cast<Eigen::Index>(f)) = sample.labels->flows[f].mean_delay / params.delay_unit;
  }
  Var loss = tape.mse(tape.scale(delay, 1.0 / params.delay_unit), target);
  if (occupancy_weight > 0.0) {
    const auto& occ = sample.labels->queue_occupancy;
    const Matrix occ_target =
        Eigen::Map<const Matrix>(occ.data(), 1, static_cast<Eigen::Index>(occ.size()));
    loss = tape.add(loss, tape.scale(tape.mse(fwd.occupancy, occ_target), occupancy_weight));
  }
  return loss;
}

double dataset_loss(const std::vector<NetworkSample>& samples, const ModelParams& params,
                    double occupancy_weight) {
  if (samples.empty()) throw ConfigError("loss over an empty dataset");
  double sum = 0.0;
  for (const NetworkSample& s : samples) {
    Tape tape;
    sum += tape.scalar(sample_loss(tape, s, params, occupancy_weight));
  }
  return sum / static_cast<double>(samples.size());
}

TrainResult train(const std::vector<NetworkSample>& train_set,
                  const std::vector<NetworkSample>& val, const ModelConfig& model_cfg,
                  const FeatureScaling& scaling, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  if (train_set.empty()) throw ConfigError("training set is empty");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.samples_per_epoch < 1) throw ConfigError("samples_per_epoch must be >= 1");
  if (!(cfg.lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (cfg.occupancy_loss_weight < 0.0) throw ConfigError("occupancy_loss_weight must be >= 0");
  if (cfg.max_grad_norm < 0.0) throw ConfigError("max_grad_norm must be >= 0");
  for (const NetworkSample& s : val) require_labels(s, "validation");

  ModelParams params(model_cfg, scaling, cfg.seed);
  params.delay_unit = mean_label_delay(train_set);
  const auto ps = params.parameters();
  ad::AdamState adam;
  adam.lr = cfg.lr;

  const std::size_t workers = std::max<std::size_t>(1, cfg.workers);
  std::vector<ModelParams> replicas;
  for (std::size_t w = 1; w < workers; ++w) replicas.push_back(params);

  TrainResult result{params, params, 0, {}};
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, 0xe90c00 + epoch));
    std::vector<std::size_t> picks;
    picks.reserve(cfg.samples_per_epoch);
    while (picks.size() < cfg.samples_per_epoch) {
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      for (std::size_t i = 0; i < order.size() && picks.size() < cfg.samples_per_epoch; ++i) {
        picks.push_back(order[i]);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t start = 0; start < picks.size(); start += workers) {
      const std::size_t group = std::min(workers, picks.size() - start);
      std::vector<double> losses(group, 0.0);
      std::vector<char> ok(group, 1);
      for (auto& r : replicas) copy_values(params, r);
      ad::zero_grads(ps);
      for (auto& r : replicas) {
        const auto rp = r.parameters();
        ad::zero_grads(rp);
      }
      parallel_for(group, workers, [&](std::size_t k) {
        const ModelParams& model = k == 0 ? params : replicas[k - 1];
        const NetworkSample& s = train_set[picks[start + k]];
        Tape tape;
        try {
          const Var loss = sample_loss(tape, s, model, cfg.occupancy_loss_weight);
          losses[k] = tape.scalar(loss);
          if (!std::isfinite(losses[k])) {
            throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                               " on training sample " + std::to_string(picks[start + k]));
          }
          tape.backward(loss);
        } catch (const NumericError&) {
          if (cfg.nan_policy == NanPolicy::Abort) throw;
          ok[k] = 0;
        }
      });
      std::size_t used = 0;
      for (std::size_t k = 0; k < group; ++k) {
        if (!ok[k]) {
          ++rec.skipped;
          if (k == 0) ad::zero_grads(ps);
          continue;
        }
        ++used;
        loss_sum += losses[k];
        ++counted;
        if (k > 0) {
          const auto rp = replicas[k - 1].parameters();
          for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->grad += rp[i]->grad;
        }
      }
      if (used == 0) continue;
      if (used > 1) {
        for (auto* p : ps) p->grad /= static_cast<double>(used);
      }
      if (cfg.max_grad_norm > 0.0) {
        double sq = 0.0;
        for (const auto* p : ps) sq += p->grad.squaredNorm();
        const double norm = std::sqrt(sq);
        if (norm > cfg.max_grad_norm) {
          for (auto* p : ps) p->grad *= cfg.max_grad_norm / norm;
        }
      }
      ad::adam_step(adam, ps);
    }
    if (counted == 0) {
      throw NumericError("every training sample of epoch " + std::to_string(epoch) +
                         " produced a non-finite loss");
    }
    rec.train_mse = loss_sum / static_cast<double>(counted);
    if (!val.empty()) rec.val_mse = dataset_loss(val, params);
    const double score = rec.val_mse.value_or(rec.train_mse);
    if (score < best_score) {
      best_score = score;
      result.best_epoch = epoch;
      copy_values(params, result.best);
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec, params);
  }
  copy_values(params, result.last);
  return result;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_mse,val_mse\n";
  for (const EpochRecord& r : history) {
    out << r.epoch << ',' << num(r.train_mse) << ',' << (r.val_mse ? num(*r.val_mse) : "")
        << '\n';
  }
}

std::vector<SizeBucket> default_eval_buckets() {
  return {{2, 24}, {25, 49}, {50, 99}, {100, 149}, {150, 199}, {200, 249}, {250, 300}};
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw DomainError("quantile of an empty set");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

EvalReport evaluate(const std::vector<NetworkSample>& samples, const ModelParams& params,
                    const std::vector<SizeBucket>& buckets, std::size_t workers) {
  for (const NetworkSample& s : samples) require_labels(s, "evaluation");
  std::vector<std::vector<double>> delays(samples.size());
  parallel_for(samples.size(), workers,
               [&](std::size_t i) { delays[i] = predict(samples[i], params).delay; });
  return evaluate_predictions(samples, delays, buckets);
}

EvalReport evaluate_predictions(const std::vector<NetworkSample>& samples,
                                const std::vector<std::vector<double>>& delays,
                                const std::vector<SizeBucket>& buckets) {
  if (delays.size() != samples.size()) throw ConfigError("one delay vector per sample required");
  EvalReport report;
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const NetworkSample& s = samples[i];
    require_labels(s, "evaluation");
    if (delays[i].size() != s.flows.size()) {
      throw ConfigError("sample " + std::to_string(i) + ": one delay per flow required");
    }
    for (std::size_t f = 0; f < s.flows.size(); ++f) {
      const double truth = s.labels->flows[f].mean_delay;
      const double err = std::abs(delays[i][f] - truth) / truth;
      report.flows.push_back({i, s.nodes, f, truth, delays[i][f], err});
      sum += err;
    }
  }
  if (!report.flows.empty()) report.mean_abs_rel_error = sum / static_cast<double>(report.flows.size());

  for (const SizeBucket& b : buckets) {
    std::vector<double> errs;
    std::size_t n_samples = 0;
    for (const NetworkSample& s : samples) {
      if (s.nodes >= b.lo && s.nodes <= b.hi) ++n_samples;
    }
    for (const FlowError& e : report.flows) {
      if (e.nodes >= b.lo && e.nodes <= b.hi) errs.push_back(e.abs_rel_error);
    }
    if (errs.empty()) continue;
    BucketStats st;
    st.bucket = b;
    st.samples = n_samples;
    st.flows = errs.size();
    st.mean = std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(errs.size());
    st.median = quantile(errs, 0.5);
    st.q1 = quantile(errs, 0.25);
    st.q3 = quantile(errs, 0.75);
    st.min = *std::min_element(errs.begin(), errs.end());
    st.max = *std::max_element(errs.begin(), errs.end());
    report.buckets.push_back(st);
  }
  return report;
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << "bucket_lo,bucket_hi,samples,flows,mean,median,q1,q3,min,max\n";
  for (const BucketStats& b : report.buckets) {
    out << b.bucket.lo << ',' << b.bucket.hi << ',' << b.samples << ',' << b.flows << ','
        << num(b.mean) << ',' << num(b.median) << ',' << num(b.q1) << ',' << num(b.q3) << ','
        << num(b.min) << ',' << num(b.max) << '\n';
  }
}

void write_flow_errors_csv(std::ostream& out, const EvalReport& report) {
  out << "sample,nodes,flow,true_delay,pred_delay,abs_rel_error\n";
  for (const FlowError& e : report.flows) {
    out << e.sample << ',' << e.nodes << ',' << e.flow << ',' << num(e.true_delay) << ','
        << num(e.pred_delay) << ',' << num(e.abs_rel_error) << '\n';
  }
}

void check_scaling(const ModelParams& params, const std::filesystem::path& data_dir) {
  const auto recorded = manifest_scaling(data_dir);
  if (recorded && !(*recorded == params.scaling)) {
    throw ConfigError("feature scaling in " + (data_dir / "manifest.json").string() +
                      " differs from the checkpoint's: " + scaling_to_json(*recorded).dump() +
                      " vs " + scaling_to_json(params.scaling).dump());
  }
}

std::vector<NetworkSample> load_split(const std::filesystem::path& dir, const std::string& split) {
  const auto path = dir / (split + ".jsonl");
  if (!std::filesystem::exists(path)) return {};
  return read_samples(path);
}

}  // namespace netdt
