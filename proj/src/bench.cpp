#include "netdt/bench.hpp"

#include <chrono>
#include <cstdio>
#include <ostream>

#include "netdt/errors.hpp"

namespace netdt {

std::vector<SizeBucket> default_bench_buckets() {
  return {{10, 30}, {31, 50}, {51, 70}, {71, 100}, {101, 150}, {151, 200}, {201, 300}};
}

namespace {

double time_once(const NetworkSample& sample, const ModelParams& params) {
  const auto t0 = std::chrono::steady_clock::now();
  ad::Tape tape;
  const ForwardOutput fwd = forward(tape, sample, params, false);
  const ad::Var delay = reconstruct_delay(tape, sample, fwd.occupancy);
  if (tape.value(delay).size() != static_cast<Eigen::Index>(sample.flows.size())) {
    throw ShapeError("bench: delay count mismatch");
  }
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<BenchRow> bench(const std::vector<NetworkSample>& samples, const ModelParams& params,
                            const BenchConfig& cfg) {
  if (cfg.warmup < 3) throw ConfigError("bench needs at least 3 warmup runs");
  if (cfg.repetitions < 10) throw ConfigError("bench needs at least 10 measured repetitions");
  const auto buckets = cfg.buckets.empty() ? default_bench_buckets() : cfg.buckets;
  std::vector<BenchRow> rows;
  for (const SizeBucket& b : buckets) {
    BenchRow row;
    row.bucket = b;
    for (const NetworkSample& s : samples) {
      if (s.nodes < b.lo || s.nodes > b.hi) continue;
      ++row.samples;
      for (std::size_t i = 0; i < cfg.warmup; ++i) time_once(s, params);
      for (std::size_t i = 0; i < cfg.repetitions; ++i) row.timings.push_back(time_once(s, params));
    }
    if (row.samples == 0) continue;
    row.median = quantile(row.timings, 0.5);
    row.p95 = quantile(row.timings, 0.95);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "bucket_lo,bucket_hi,samples,repetitions,median_ms,p95_ms\n";
  char buf[64];
  for (const BenchRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.3f,%.3f", 1e3 * r.median, 1e3 * r.p95);
    out << r.bucket.lo << ',' << r.bucket.hi << ',' << r.samples << ','
        << r.timings.size() / r.samples << ',' << buf << '\n';
  }
}

}  // namespace netdt
