#include <chrono>
#include <cmath>
#include <sstream>

#include "acceptance.hpp"
#include "netdt/simulator.hpp"
#include "support/fixtures.hpp"
#include "support/queueing.hpp"

namespace netdt::acceptance {

std::string fmt(double v, int precision) {
  std::ostringstream out;
  out.precision(precision);
  out << v;
  return out.str();
}

Outcome simulator_fidelity(Context&) {
  using clock = std::chrono::steady_clock;
  const double mu = 1000.0;
  bool pass = true;
  double worst_delay = 0.0, worst_wall = 0.0, worst_loss = 0.0;

  for (double rho : {0.3, 0.5, 0.8}) {
    const NetworkSample s = testing::single_queue(rho * mu, mu, 1000.0, 1e12);
    SimConfig cfg;
    cfg.warmup = 10.0;
    cfg.measure = 200.0;
    cfg.seed = 101;
    const auto t0 = clock::now();
    const PerformanceLabels l = simulate(s, cfg);
    const double wall = std::chrono::duration<double>(clock::now() - t0).count();
    const double err = std::abs(l.flows[0].mean_delay - testing::mm1_sojourn(rho * mu, mu)) /
                       testing::mm1_sojourn(rho * mu, mu);
    worst_delay = std::max(worst_delay, err);
    worst_wall = std::max(worst_wall, wall);
    pass = pass && err <= 0.03 && wall < 30.0;
  }

  for (int k : {5, 20}) {
    for (double rho : {0.8, 1.2}) {
      NetworkSample s = testing::single_queue(rho * mu, mu, 1000.0, 1e12);
      SimConfig cfg;
      cfg.warmup = 10.0;
      cfg.measure = 10000.0;
      cfg.seed = 103;
      cfg.packet_limit = static_cast<std::size_t>(k);
      const double expect = testing::mm1k_loss(rho, k);
      const double err = std::abs(simulate(s, cfg).flows[0].loss_ratio - expect) / expect;
      worst_loss = std::max(worst_loss, err);
      pass = pass && err <= 0.10;
    }
  }
  return {pass, "M/M/1 worst delay err " + fmt(worst_delay) + " (<= 0.03), worst wall " +
                    fmt(worst_wall, 3) + " s (< 30); M/M/1/K worst loss err " + fmt(worst_loss) +
                    " (<= 0.10)"};
}

}  // namespace netdt::acceptance
