#pragma once

// Structural property checks on the model shared by the unit and
// acceptance suites. Each returns a deviation so callers pick tolerances.

#include <algorithm>
#include <cmath>
#include <vector>

#include "netdt/model.hpp"
#include "netdt/network.hpp"
#include "support/fixtures.hpp"

namespace netdt::testing {

// Relative difference, absolute below `floor`.
inline double rel_diff(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Largest difference between the outputs of a sample and of its relabeled
// copy, matched entity by entity: relative for delays, absolute for the O(1)
// occupancy and flow-head outputs.
inline double equivariance_error(const NetworkSample& s, const ModelParams& params,
                                 const Relabeling& r) {
  const Prediction a = predict(s, params);
  const Prediction b = predict(permute(s, r), params);
  double worst = 0.0;
  for (std::size_t q = 0; q < s.queues.size(); ++q) {
    worst = std::max(worst, rel_diff(a.occupancy[q], b.occupancy[r.queue[q]], 1.0));
  }
  for (std::size_t f = 0; f < s.flows.size(); ++f) {
    worst = std::max(worst, rel_diff(a.delay[f], b.delay[r.flow[f]]));
    worst = std::max(worst, rel_diff(a.flow_head[f], b.flow_head[r.flow[f]], 1.0));
  }
  return worst;
}

// True when the flow stage gives bit-identical states and messages for the
// given l_max and for an l_max longer than every path.
inline bool lmax_neutral(const NetworkSample& s, const ModelParams& params, std::size_t l_max) {
  auto run = [&](std::size_t l) {
    ModelParams p = params;
    p.config.l_max = l;
    ad::Tape tape;
    const HiddenStates h = init_states(tape, s, p);
    const FlowStageOutput out = flow_stage(tape, h, s, p);
    std::vector<ad::Matrix> values{tape.value(out.flows)};
    for (const Flow& f : s.flows) {
      for (std::size_t j = 0; j < f.path.size(); ++j) {
        const ad::ColumnTerm m = out.message(f.id, j, 0);
        values.push_back(tape.value(m.src).col(m.src_col));
      }
    }
    return values;
  };
  std::size_t longest = 1;
  for (const Flow& f : s.flows) longest = std::max(longest, f.path.size());
  const auto chunked = run(l_max), whole = run(longest + 100);
  for (std::size_t i = 0; i < chunked.size(); ++i) {
    if (!(chunked[i].array() == whole[i].array()).all()) return false;
  }
  return true;
}

// Largest absolute difference in queue states (entries are O(1)) when every
// queue's incoming messages are summed in a shuffled order.
inline double aggregation_order_error(const NetworkSample& s, const ModelParams& params,
                                      std::uint64_t seed, int shuffles) {
  ad::Tape tape;
  const HiddenStates h = init_states(tape, s, params);
  const FlowStageOutput out = flow_stage(tape, h, s, params);
  const SampleIndex index = build_index(s);
  const ad::Matrix base = tape.value(queue_stage(tape, h, out, index, params));
  Rng rng(seed);
  double worst = 0.0;
  for (int k = 0; k < shuffles; ++k) {
    SampleIndex shuffled = index;
    for (auto& list : shuffled.flows_of_queue) {
      const auto perm = random_permutation(list.size(), rng);
      auto copy = list;
      for (std::size_t i = 0; i < list.size(); ++i) list[i] = copy[perm[i]];
    }
    const ad::Matrix& other = tape.value(queue_stage(tape, h, out, shuffled, params));
    for (Eigen::Index i = 0; i < base.size(); ++i) {
      worst = std::max(worst, rel_diff(base.data()[i], other.data()[i], 1.0));
    }
  }
  return worst;
}

}  // namespace netdt::testing
