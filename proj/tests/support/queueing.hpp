#pragma once

// Closed-form queueing results used as simulator oracles.

#include <cmath>

namespace netdt::testing {

// Mean sojourn time of M/M/1 with arrival rate lambda and service rate mu.
inline double mm1_sojourn(double lambda, double mu) { return 1.0 / (mu - lambda); }

// Blocking probability of M/M/1/K with offered load rho and K packets in
// the system.
inline double mm1k_loss(double rho, int k) {
  if (std::abs(rho - 1.0) < 1e-12) return 1.0 / (k + 1);
  return (1.0 - rho) * std::pow(rho, k) / (1.0 - std::pow(rho, k + 1));
}

}  // namespace netdt::testing
