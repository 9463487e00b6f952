#pragma once

// Central finite-difference gradient checks against Tape::backward.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "netdt/tape.hpp"

namespace netdt::testing {

// Analytic vs numeric derivative agreement, relative with an absolute floor
// so that gradients of exactly zero compare sensibly.
inline double grad_rel_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({floor, std::abs(analytic), std::abs(numeric)});
}

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst = 0.0;
  std::string worst_name;
};

using LossFn = std::function<ad::Var(ad::Tape&)>;

// Checks every entry of every parameter. The loss function must rebuild the
// graph from the parameters' current values on each call.
inline GradCheckResult check_parameter_gradients(const LossFn& loss_fn,
                                                 const std::vector<ad::Parameter*>& params,
                                                 double tol, double step = 1e-6) {
  for (ad::Parameter* p : params) p->zero_grad();
  {
    ad::Tape tape;
    tape.backward(loss_fn(tape));
  }
  std::vector<ad::Matrix> analytic;
  for (ad::Parameter* p : params) analytic.push_back(p->grad);

  auto eval = [&] {
    ad::Tape tape;
    return tape.scalar(loss_fn(tape));
  };
  GradCheckResult r;
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Parameter& p = *params[k];
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      double& x = p.value.data()[i];
      const double orig = x;
      const double h = step * std::max(1.0, std::abs(orig));
      x = orig + h;
      const double up = eval();
      x = orig - h;
      const double down = eval();
      x = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double err = grad_rel_error(analytic[k].data()[i], numeric);
      ++r.checked;
      if (err > tol) ++r.failed;
      if (err > r.worst) {
        r.worst = err;
        r.worst_name = p.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

// Checks d loss / d input for a function of one constant input node.
inline GradCheckResult check_input_gradient(const std::function<ad::Var(ad::Tape&, ad::Var)>& fn,
                                            const ad::Matrix& input, double tol,
                                            double step = 1e-6) {
  ad::Matrix analytic;
  {
    ad::Tape tape;
    const ad::Var x = tape.constant(input);
    tape.backward(fn(tape, x));
    analytic = tape.grad(x);
  }
  GradCheckResult r;
  ad::Matrix probe = input;
  for (Eigen::Index i = 0; i < input.size(); ++i) {
    const double orig = probe.data()[i];
    const double h = step * std::max(1.0, std::abs(orig));
    auto eval = [&](double v) {
      probe.data()[i] = v;
      ad::Tape tape;
      return tape.scalar(fn(tape, tape.constant(probe)));
    };
    const double numeric = (eval(orig + h) - eval(orig - h)) / (2.0 * h);
    probe.data()[i] = orig;
    const double err = grad_rel_error(analytic.data()[i], numeric);
    ++r.checked;
    if (err > tol) ++r.failed;
    if (err > r.worst) {
      r.worst = err;
      r.worst_name = "input[" + std::to_string(i) + "]";
    }
  }
  return r;
}

}  // namespace netdt::testing
