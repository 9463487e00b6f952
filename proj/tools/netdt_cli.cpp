#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "netdt/bench.hpp"
#include "netdt/datagen.hpp"
#include "netdt/errors.hpp"
#include "netdt/model.hpp"
#include "netdt/sample_io.hpp"
#include "netdt/simulator.hpp"
#include "netdt/topogen.hpp"
#include "netdt/training.hpp"

namespace {

using namespace netdt;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitConfig = 4;
constexpr int kPredictionFormatVersion = 1;

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel log_level() {
  const char* env = std::getenv("NETDT_LOG_LEVEL");
  if (env == nullptr) return LogLevel::Info;
  const std::string v = env;
  if (v == "error") return LogLevel::Error;
  if (v == "warn") return LogLevel::Warn;
  if (v == "debug") return LogLevel::Debug;
  return LogLevel::Info;
}

void info(const std::string& msg) {
  if (log_level() >= LogLevel::Info) std::cerr << "netdt: " << msg << '\n';
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + " is not valid JSON: " + e.what());
  }
}

void require_valid(const NetworkSample& s, std::size_t line) {
  const ValidationReport r = validate_sample(s);
  if (!r.ok()) {
    throw ValidationError("sample " + std::to_string(line) + " is invalid:\n" + r.summary());
  }
}

struct GenTopoArgs {
  std::size_t nodes = 25;
  std::uint64_t seed = 1;
  std::optional<double> alpha, beta;
  std::vector<double> capacities;
  double buffer = kDefaultBufferBits;
  std::string out;
};

void run_gen_topo(const GenTopoArgs& a) {
  TopoGenConfig cfg = default_topo_config(a.nodes, a.seed);
  if (a.alpha) cfg.alpha = *a.alpha;
  if (a.beta) cfg.beta = *a.beta;
  if (!a.capacities.empty()) cfg.capacity_pool = a.capacities;
  cfg.buffer_size = a.buffer;
  const std::string line = sample_to_line(generate_topology(cfg));
  if (a.out.empty()) {
    std::cout << line << '\n';
  } else {
    open_out(a.out) << line << '\n';
  }
}

struct GenDataArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
};

void run_gen_data(const GenDataArgs& a) {
  DatasetConfig cfg = dataset_config_from_json(read_json_file(a.config));
  if (a.seed) cfg.seed = *a.seed;
  cfg.workers = a.workers;
  const bool progress = log_level() >= LogLevel::Debug;
  const DatasetSummary s = build_dataset(cfg, a.out, [&](std::size_t done, std::size_t total) {
    if (progress) std::cerr << "netdt: sample " << done << '/' << total << '\n';
  });
  info("wrote " + std::to_string(s.train_lines) + " train, " + std::to_string(s.val_lines) +
       " val, " + std::to_string(s.test_lines) + " test lines (" + std::to_string(s.aborted) +
       " aborted)");
}

struct SimulateArgs {
  std::string in, out;
  std::optional<double> warmup, measure;
  double packets_per_flow = 3000.0;
  std::uint64_t seed = 1;
  std::size_t packet_limit = 0;
};

void run_simulate(const SimulateArgs& a) {
  const std::vector<NetworkSample> samples = read_samples(std::filesystem::path(a.in));
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!a.out.empty()) {
    file = open_out(a.out);
    out = &file;
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    NetworkSample s = samples[i];
    require_valid(s, i + 1);
    SimConfig cfg = horizon_for(s, a.packets_per_flow, mix_seed(a.seed, i));
    if (a.warmup) cfg.warmup = *a.warmup;
    if (a.measure) cfg.measure = *a.measure;
    cfg.packet_limit = a.packet_limit;
    s.labels = simulate(s, cfg);
    *out << sample_to_line(s) << '\n';
  }
}

struct TrainArgs {
  std::string data, out, config, history;
  std::optional<std::size_t> epochs, samples_per_epoch, checkpoint_every, hidden, t_iters, l_max;
  std::optional<double> lr, occupancy_weight, max_grad_norm;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> capacity_encoding;
  std::size_t workers = 1;
};

void run_train(const TrainArgs& a) {
  TrainConfig tc;
  ModelConfig mc;
  if (!a.config.empty()) {
    const json j = read_json_file(a.config);
    try {
      tc.epochs = j.value("epochs", tc.epochs);
      tc.samples_per_epoch = j.value("samples_per_epoch", tc.samples_per_epoch);
      tc.lr = j.value("lr", tc.lr);
      tc.seed = j.value("seed", tc.seed);
      tc.checkpoint_every = j.value("checkpoint_every", tc.checkpoint_every);
      tc.occupancy_loss_weight = j.value("occupancy_loss_weight", tc.occupancy_loss_weight);
      tc.max_grad_norm = j.value("max_grad_norm", tc.max_grad_norm);
      const std::string nan = j.value("nan_policy", std::string("abort"));
      if (nan != "abort" && nan != "skip") throw ConfigError("nan_policy must be abort or skip");
      tc.nan_policy = nan == "skip" ? NanPolicy::SkipSample : NanPolicy::Abort;
      if (auto it = j.find("model"); it != j.end()) {
        mc.hidden = it->value("hidden", mc.hidden);
        mc.t_iters = it->value("t_iters", mc.t_iters);
        mc.l_max = it->value("l_max", mc.l_max);
        mc.capacity_encoding = parse_capacity_encoding(
            it->value("capacity_encoding", std::string(to_string(mc.capacity_encoding))));
      }
    } catch (const json::exception& e) {
      throw ConfigError("malformed training config: " + std::string(e.what()));
    }
  }
  if (a.epochs) tc.epochs = *a.epochs;
  if (a.samples_per_epoch) tc.samples_per_epoch = *a.samples_per_epoch;
  if (a.checkpoint_every) tc.checkpoint_every = *a.checkpoint_every;
  if (a.lr) tc.lr = *a.lr;
  if (a.occupancy_weight) tc.occupancy_loss_weight = *a.occupancy_weight;
  if (a.max_grad_norm) tc.max_grad_norm = *a.max_grad_norm;
  if (a.seed) tc.seed = *a.seed;
  if (a.hidden) mc.hidden = *a.hidden;
  if (a.t_iters) mc.t_iters = *a.t_iters;
  if (a.l_max) mc.l_max = *a.l_max;
  if (a.capacity_encoding) mc.capacity_encoding = parse_capacity_encoding(*a.capacity_encoding);
  tc.workers = a.workers;

  const FeatureScaling scaling = manifest_scaling(a.data).value_or(FeatureScaling{});
  const std::vector<NetworkSample> train_set = load_split(a.data, "train");
  const std::vector<NetworkSample> val = load_split(a.data, "val");
  if (train_set.empty()) throw ConfigError("no training samples in " + a.data);
  for (std::size_t i = 0; i < train_set.size(); ++i) require_valid(train_set[i], i + 1);
  for (std::size_t i = 0; i < val.size(); ++i) require_valid(val[i], i + 1);
  info("training on " + std::to_string(train_set.size()) + " samples, validating on " +
       std::to_string(val.size()));

  const std::string history_path = a.history.empty() ? a.out + ".history.csv" : a.history;
  std::vector<EpochRecord> history;
  const TrainResult r = train(train_set, val, mc, scaling, tc, [&](const EpochRecord& rec, const ModelParams& p) {
    history.push_back(rec);
    std::ofstream h = open_out(history_path);
    write_history_csv(h, history);
    if (tc.checkpoint_every > 0 && rec.epoch % tc.checkpoint_every == 0) {
      save_checkpoint(a.out + ".epoch" + std::to_string(rec.epoch) + ".json", p);
    }
    if (log_level() >= LogLevel::Debug) {
      std::cerr << "netdt: epoch " << rec.epoch << " train " << rec.train_mse << " val "
                << (rec.val_mse ? std::to_string(*rec.val_mse) : std::string("-")) << '\n';
    }
  });
  save_checkpoint(a.out, r.best);
  info("best epoch " + std::to_string(r.best_epoch) + "; checkpoint written to " + a.out);
}

struct EvalArgs {
  std::string data, ckpt, report, flows;
  std::size_t workers = 1;
};

void run_eval(const EvalArgs& a) {
  const ModelParams params = load_checkpoint(a.ckpt);
  const std::filesystem::path data(a.data);
  check_scaling(params, data.has_parent_path() ? data.parent_path() : std::filesystem::path("."));
  const std::vector<NetworkSample> samples = read_samples(data);
  for (std::size_t i = 0; i < samples.size(); ++i) require_valid(samples[i], i + 1);
  const EvalReport report = evaluate(samples, params, default_eval_buckets(), a.workers);
  if (a.report.empty()) {
    write_report_csv(std::cout, report);
  } else {
    std::ofstream out = open_out(a.report);
    write_report_csv(out, report);
  }
  if (!a.flows.empty()) {
    std::ofstream out = open_out(a.flows);
    write_flow_errors_csv(out, report);
  }
  info("mean absolute relative error " + std::to_string(report.mean_abs_rel_error) + " over " +
       std::to_string(report.flows.size()) + " flows");
}

struct PredictArgs {
  std::string in, ckpt, out;
};

void run_predict(const PredictArgs& a) {
  const ModelParams params = load_checkpoint(a.ckpt);
  const std::vector<NetworkSample> samples = read_samples(std::filesystem::path(a.in));
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!a.out.empty()) {
    file = open_out(a.out);
    out = &file;
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const NetworkSample& s = samples[i];
    require_valid(s, i + 1);
    const Prediction p = predict(s, params);
    json flows = json::array(), queues = json::array();
    for (std::size_t f = 0; f < s.flows.size(); ++f) {
      flows.push_back({{"id", s.flows[f].id}, {"delay", p.delay[f]}});
    }
    for (std::size_t q = 0; q < s.queues.size(); ++q) {
      queues.push_back({{"id", s.queues[q].id}, {"occupancy", p.occupancy[q]}});
    }
    *out << json{{"format_version", kPredictionFormatVersion},
                 {"flows", std::move(flows)},
                 {"queues", std::move(queues)}}
                .dump()
         << '\n';
  }
}

struct BenchArgs {
  std::string in, ckpt, out;
  std::size_t warmup = 3, reps = 10;
};

void run_bench(const BenchArgs& a) {
  const ModelParams params = load_checkpoint(a.ckpt);
  const std::vector<NetworkSample> samples = read_samples(std::filesystem::path(a.in));
  for (std::size_t i = 0; i < samples.size(); ++i) require_valid(samples[i], i + 1);
  BenchConfig cfg;
  cfg.warmup = a.warmup;
  cfg.repetitions = a.reps;
  const auto rows = bench(samples, params, cfg);
  if (a.out.empty()) {
    write_bench_csv(std::cout, rows);
  } else {
    std::ofstream out = open_out(a.out);
    write_bench_csv(out, rows);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Network performance modeling: topology and dataset generation, packet "
               "simulation, GNN training, evaluation and inference"};
  app.require_subcommand(1);

  GenTopoArgs topo;
  auto* gen_topo = app.add_subcommand("gen-topo", "Generate a random topology skeleton");
  gen_topo->add_option("--nodes", topo.nodes, "Node count")->capture_default_str();
  gen_topo->add_option("--seed", topo.seed, "Random seed")->capture_default_str();
  gen_topo->add_option("--alpha", topo.alpha, "Power-law exponent");
  gen_topo->add_option("--beta", topo.beta, "Credit scale");
  gen_topo->add_option("--capacities", topo.capacities, "Capacity pool, bits/second");
  gen_topo->add_option("--buffer", topo.buffer, "Queue buffer, bits")->capture_default_str();
  gen_topo->add_option("--out", topo.out, "Output file (default stdout)");

  GenDataArgs data;
  auto* gen_data = app.add_subcommand("gen-data", "Build a labeled dataset");
  gen_data->add_option("--config", data.config, "Dataset config JSON")->required();
  gen_data->add_option("--out", data.out, "Output directory")->required();
  gen_data->add_option("--seed", data.seed, "Override the config seed");
  gen_data->add_option("--workers", data.workers, "Parallel workers")->capture_default_str();

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Label samples by packet simulation");
  simulate_cmd->add_option("--in", sim.in, "Input samples (JSON Lines)")->required();
  simulate_cmd->add_option("--out", sim.out, "Output file (default stdout)");
  simulate_cmd->add_option("--packets-per-flow", sim.packets_per_flow,
                           "Horizon in packets of an average flow")
      ->capture_default_str();
  simulate_cmd->add_option("--warmup", sim.warmup, "Warmup, seconds");
  simulate_cmd->add_option("--measure", sim.measure, "Measurement window, seconds");
  simulate_cmd->add_option("--packet-limit", sim.packet_limit,
                           "Admit by packet count instead of bits (0 = off)");
  simulate_cmd->add_option("--seed", sim.seed, "Random seed")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--data", tr.data, "Dataset directory")->required();
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--config", tr.config, "Training config JSON");
  train_cmd->add_option("--history", tr.history, "Loss history CSV (default <out>.history.csv)");
  train_cmd->add_option("--epochs", tr.epochs, "Epochs");
  train_cmd->add_option("--samples-per-epoch", tr.samples_per_epoch, "Samples per epoch");
  train_cmd->add_option("--lr", tr.lr, "Learning rate");
  train_cmd->add_option("--seed", tr.seed, "Random seed");
  train_cmd->add_option("--checkpoint-every", tr.checkpoint_every, "Extra checkpoint cadence");
  train_cmd->add_option("--occupancy-weight", tr.occupancy_weight, "Occupancy loss weight");
  train_cmd->add_option("--max-grad-norm", tr.max_grad_norm, "Gradient norm clip (0 disables)");
  train_cmd->add_option("--hidden", tr.hidden, "Hidden width");
  train_cmd->add_option("--iterations", tr.t_iters, "Message-passing iterations");
  train_cmd->add_option("--l-max", tr.l_max, "Path chunk length");
  train_cmd->add_option("--capacity-encoding", tr.capacity_encoding, "factorized or raw")
      ->check(CLI::IsMember({"factorized", "raw"}));
  train_cmd->add_option("--workers", tr.workers, "Data-parallel workers")->capture_default_str();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on labeled samples");
  eval_cmd->add_option("--data", ev.data, "Labeled samples (JSON Lines)")->required();
  eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
  eval_cmd->add_option("--report", ev.report, "Bucket statistics CSV (default stdout)");
  eval_cmd->add_option("--flows", ev.flows, "Per-flow error CSV");
  eval_cmd->add_option("--workers", ev.workers, "Parallel workers")->capture_default_str();

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Predict per-flow delays");
  predict_cmd->add_option("--in", pr.in, "Samples (JSON Lines)")->required();
  predict_cmd->add_option("--ckpt", pr.ckpt, "Checkpoint")->required();
  predict_cmd->add_option("--out", pr.out, "Output file (default stdout)");

  BenchArgs be;
  auto* bench_cmd = app.add_subcommand("bench", "Time inference by topology size");
  bench_cmd->add_option("--in", be.in, "Samples (JSON Lines)")->required();
  bench_cmd->add_option("--ckpt", be.ckpt, "Checkpoint")->required();
  bench_cmd->add_option("--out", be.out, "Output CSV (default stdout)");
  bench_cmd->add_option("--warmup", be.warmup, "Warmup runs per sample")->capture_default_str();
  bench_cmd->add_option("--reps", be.reps, "Measured runs per sample")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen_topo) run_gen_topo(topo);
    if (*gen_data) run_gen_data(data);
    if (*simulate_cmd) run_simulate(sim);
    if (*train_cmd) run_train(tr);
    if (*eval_cmd) run_eval(ev);
    if (*predict_cmd) run_predict(pr);
    if (*bench_cmd) run_bench(be);
  } catch (const ValidationError& e) {
    std::cerr << "netdt: validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericError& e) {
    std::cerr << "netdt: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& e) {
    std::cerr << "netdt: configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "netdt: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}
