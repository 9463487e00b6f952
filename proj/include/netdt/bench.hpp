#pragma once

// Wall-clock timing of forward + delay reconstruction by topology size.

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "netdt/model.hpp"
#include "netdt/network.hpp"
#include "netdt/training.hpp"

namespace netdt {

struct BenchConfig {
  std::size_t warmup = 3;
  std::size_t repetitions = 10;
  std::vector<SizeBucket> buckets;  // empty: default_bench_buckets()
};

std::vector<SizeBucket> default_bench_buckets();

struct BenchRow {
  SizeBucket bucket;
  std::size_t samples = 0;
  std::vector<double> timings;  // seconds, samples x repetitions
  double median = 0.0;
  double p95 = 0.0;
};

// Times forward() + reconstruct_delay() for each sample; warmup runs are
// discarded. Buckets without samples are omitted. Throws ConfigError when
// warmup < 3 or repetitions < 10.
std::vector<BenchRow> bench(const std::vector<NetworkSample>& samples, const ModelParams& params,
                            const BenchConfig& cfg = {});

// Columns: bucket_lo,bucket_hi,samples,repetitions,median_ms,p95_ms
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace netdt
