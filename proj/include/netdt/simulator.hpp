#pragma once

// Packet-level discrete-event simulator used as the labeling oracle.
// FIFO service, tail-drop on the bit backlog, zero propagation delay.

#include <cstdint>
#include <vector>

#include "netdt/network.hpp"

namespace netdt {

struct SimConfig {
  double warmup = 10.0;   // seconds
  double measure = 100.0; // seconds
  std::uint64_t seed = 1;
  // When non-zero, admission counts packets in the system (service included)
  // against this limit instead of bits against buffer_size, and occupancy is
  // the time-averaged packet count over the limit. Used for M/M/1/K checks.
  std::size_t packet_limit = 0;
};

struct FlowCounters {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t in_flight = 0;
  double delay_sum = 0.0;
  double delay_sq_sum = 0.0;
};

struct SimStats {
  std::vector<FlowCounters> flows;
  std::vector<double> occupancy_integral;  // bit-seconds (packet-seconds in packet mode)
  // Smallest (delay - sum of own transmission times) over delivered packets.
  double min_queueing_slack = 0.0;
  std::uint64_t events = 0;
};

struct SimResult {
  PerformanceLabels labels;
  SimStats stats;
};

// Labels cover packets created inside [warmup, warmup + measure). A flow with
// no delivered packets reports its average-packet transmission time as delay
// and zero jitter. Throws ValidationError on a malformed sample and
// UnsupportedPolicyError on non-FIFO links.
SimResult simulate_detailed(const NetworkSample& sample, const SimConfig& cfg);
PerformanceLabels simulate(const NetworkSample& sample, const SimConfig& cfg);

double max_flow_loss(const PerformanceLabels& labels);

NetworkSample scale_rates(NetworkSample sample, double factor);

struct CalibrationResult {
  NetworkSample sample;
  double factor = 1.0;
  double max_loss = 0.0;
  int steps = 0;
};

inline constexpr double kCalibrationFactorMin = 0.01;
inline constexpr double kCalibrationFactorMax = 100.0;
inline constexpr int kCalibrationMaxSteps = 12;

// Scale every flow rate by one common factor, found by log-space bisection
// over [0.01, 100], until the maximum per-flow loss lands within `tolerance`
// (absolute) of target_loss. Simulations share cfg.seed so successive probes
// use common random numbers. cfg's horizons apply at factor 1; each probe
// stretches them by 1/factor so every probe sees the same expected packet
// count. Throws CalibrationError if the target is not
// reached within 12 steps.
CalibrationResult calibrate_intensity(const NetworkSample& sample, double target_loss,
                                      const SimConfig& cfg, double tolerance = 0.01);

}  // namespace netdt
