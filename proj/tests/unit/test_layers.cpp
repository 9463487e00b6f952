#include <doctest.h>

#include <cmath>

#include "netdt/errors.hpp"
#include "netdt/layers.hpp"
#include "support/gradcheck.hpp"

using namespace netdt;
using namespace netdt::ad;
using netdt::testing::check_input_gradient;
using netdt::testing::check_parameter_gradients;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

void randomize(const std::vector<Parameter*>& ps, Rng& rng, double scale = 0.8) {
  for (Parameter* p : ps) p->value = random_matrix(p->value.rows(), p->value.cols(), rng, scale);
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar-loop GRU used as the reference for one column.
std::vector<double> reference_gru(const GruParams& p, const std::vector<double>& h,
                                  const std::vector<double>& x) {
  const std::size_t H = p.hidden_dim, D = p.input_dim;
  auto lin = [&](const Parameter& w, const Parameter& u, const Parameter& b,
                 const std::vector<double>& hv, std::size_t i) {
    double acc = b.value(i, 0);
    for (std::size_t k = 0; k < D; ++k) acc += w.value(i, k) * x[k];
    for (std::size_t k = 0; k < H; ++k) acc += u.value(i, k) * hv[k];
    return acc;
  };
  std::vector<double> z(H), r(H), rh(H), out(H);
  for (std::size_t i = 0; i < H; ++i) {
    z[i] = sig(lin(p.w_z, p.u_z, p.b_z, h, i));
    r[i] = sig(lin(p.w_r, p.u_r, p.b_r, h, i));
    rh[i] = r[i] * h[i];
  }
  for (std::size_t i = 0; i < H; ++i) {
    const double c = std::tanh(lin(p.w_c, p.u_c, p.b_c, rh, i));
    out[i] = z[i] * h[i] + (1.0 - z[i]) * c;
  }
  return out;
}

Var weighted_sum(Tape& t, Var v) {
  const Matrix& x = t.value(v);
  Matrix w(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 0.5 + 0.25 * static_cast<double>(i % 5);
  return t.dot(v, t.constant(w));
}

}  // namespace

TEST_CASE("zero GRU parameters halve the state") {
  GruParams p("g", 3, 4);
  Tape t;
  Matrix h(4, 2);
  h << 0.5, -1.0, 0.2, 3.0, -0.7, 0.0, 1.0, 2.0;
  const Var out = gru_step(t, p, t.constant(h), t.constant(Matrix::Random(3, 2)));
  CHECK((t.value(out) - 0.5 * h).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("GRU matches a scalar reference and respects gate convexity") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    GruParams p("g", 5, 4);
    randomize(p.parameters(), rng, 1.5);
    const Matrix h = random_matrix(4, 3, rng, 2.0);
    const Matrix x = random_matrix(5, 3, rng, 2.0);
    Tape t;
    const Matrix& out = t.value(gru_step(t, p, t.constant(h), t.constant(x)));
    for (int c = 0; c < 3; ++c) {
      std::vector<double> hc(4), xc(5);
      for (int i = 0; i < 4; ++i) hc[i] = h(i, c);
      for (int i = 0; i < 5; ++i) xc[i] = x(i, c);
      const auto ref = reference_gru(p, hc, xc);
      for (int i = 0; i < 4; ++i) {
        CHECK(out(i, c) == doctest::Approx(ref[i]).epsilon(1e-12));
        CHECK(std::abs(out(i, c)) <= std::max(std::abs(h(i, c)), 1.0) + 1e-15);
      }
    }
  }
}

TEST_CASE("zero candidate weights never grow the state") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    GruParams p("g", 3, 4);
    randomize({&p.w_z, &p.u_z, &p.w_r, &p.u_r}, rng, 2.0);
    const Matrix h = random_matrix(4, 2, rng, 2.0);
    Tape t;
    const Matrix& out = t.value(gru_step(t, p, t.constant(h), t.constant(random_matrix(3, 2, rng))));
    CHECK(((out.cwiseAbs() - h.cwiseAbs()).array() <= 1e-15).all());
  }
}

TEST_CASE("GRU gradients match finite differences") {
  Rng rng(5);
  GruParams p("g", 4, 4);
  randomize(p.parameters(), rng);
  const Matrix h = random_matrix(4, 1, rng);
  const Matrix x = random_matrix(4, 1, rng);
  auto loss = [&](Tape& t) { return weighted_sum(t, gru_step(t, p, t.constant(h), t.constant(x))); };
  const auto r = check_parameter_gradients(loss, p.parameters(), 1e-4, 1e-5);
  CAPTURE(r.worst_name);
  CHECK(r.checked == 3 * 16 + 3 * 16 + 3 * 4);
  CHECK(r.failed == 0);
  CHECK(check_input_gradient([&](Tape& t, Var in) { return weighted_sum(t, gru_step(t, p, in, t.constant(x))); },
                             h, 1e-4, 1e-5)
            .failed == 0);
  CHECK(check_input_gradient([&](Tape& t, Var in) { return weighted_sum(t, gru_step(t, p, t.constant(h), in)); },
                             x, 1e-4, 1e-5)
            .failed == 0);
}

TEST_CASE("GRU rejects mismatched shapes") {
  GruParams p("g", 3, 4);
  Tape t;
  CHECK_THROWS_AS(gru_step(t, p, t.zeros(3, 1), t.zeros(3, 1)), ShapeError);
  CHECK_THROWS_AS(gru_step(t, p, t.zeros(4, 1), t.zeros(2, 1)), ShapeError);
  CHECK_THROWS_AS(gru_step(t, p, t.zeros(4, 2), t.zeros(3, 3)), ShapeError);
}

TEST_CASE("MLP forward semantics") {
  MlpParams zero("m", 3, 5, 2, OutputActivation::Identity);
  Tape t;
  CHECK(t.value(mlp_forward(t, zero, t.constant(Matrix::Ones(3, 4)))).isZero(0.0));

  Rng rng(6);
  MlpParams p("m", 3, 5, 2, OutputActivation::Sigmoid);
  randomize(p.parameters(), rng, 3.0);
  const Matrix x = random_matrix(3, 6, rng, 5.0);
  const Matrix& y = t.value(mlp_forward(t, p, t.constant(x)));
  CHECK((y.array() > 0.0).all());
  CHECK((y.array() < 1.0).all());
  const Matrix hidden = (p.w1.value * x).colwise() + Eigen::VectorXd(p.b1.value.col(0));
  const Matrix pre = (p.w2.value * hidden.cwiseMax(0.0)).colwise() + Eigen::VectorXd(p.b2.value.col(0));
  for (Eigen::Index i = 0; i < y.size(); ++i) CHECK(y.data()[i] == doctest::Approx(sig(pre.data()[i])));

  CHECK_THROWS_AS(mlp_forward(t, p, t.zeros(4, 1)), ShapeError);
}

TEST_CASE("MLP gradients match finite differences") {
  Rng rng(7);
  for (auto act : {OutputActivation::Identity, OutputActivation::Sigmoid}) {
    MlpParams p("m", 8, 16, 4, act);
    randomize(p.parameters(), rng, 0.5);
    // Bias away from zero so no hidden unit sits on the relu kink.
    p.b1.value.array() += 0.05;
    const Matrix x = random_matrix(8, 1, rng);
    auto loss = [&](Tape& t) { return weighted_sum(t, mlp_forward(t, p, t.constant(x))); };
    const auto r = check_parameter_gradients(loss, p.parameters(), 1e-4, 1e-5);
    CAPTURE(r.worst_name);
    CHECK(r.checked == 8 * 16 + 16 + 16 * 4 + 4);
    CHECK(r.failed == 0);
  }
}

TEST_CASE("backward on simple expressions") {
  Tape t;
  const Var x = t.constant_scalar(3.0);
  t.backward(t.mul(x, x));
  CHECK(t.grad(x)(0, 0) == 6.0);

  Tape u;
  const Var a = u.constant(Matrix::Constant(2, 1, 0.3));
  const Var b = u.constant(Matrix::Constant(3, 1, -2.0));
  u.backward(u.sum_elements(u.concat(a, b)));
  CHECK(u.grad(a).isOnes(0.0));
  CHECK(u.grad(b).isOnes(0.0));

  // The tape is reusable after reset.
  u.reset();
  const Var c = u.constant_scalar(2.0);
  u.backward(u.scale(c, 4.0));
  CHECK(u.grad(c)(0, 0) == 4.0);
}

TEST_CASE("tape replay is deterministic") {
  Rng rng(8);
  GruParams p("g", 4, 4);
  randomize(p.parameters(), rng);
  const Matrix h = random_matrix(4, 3, rng), x = random_matrix(4, 3, rng);
  auto run = [&] {
    zero_grads(p.parameters());
    Tape t;
    const Var loss = weighted_sum(t, gru_step(t, p, t.constant(h), t.constant(x)));
    t.backward(loss);
    return std::pair(t.scalar(loss), p.w_c.grad);
  };
  const auto a = run(), b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("Adam matches the bias-corrected update") {
  Parameter w("w", 2, 2);
  w.value << 1, -2, 0.5, 3;
  Parameter* ps[] = {&w};
  AdamState st;

  w.grad.setZero();
  const Matrix before = w.value;
  adam_step(st, ps);
  CHECK(w.value == before);

  // Constant gradient: the first step moves each entry by lr against the sign.
  AdamState first;
  w.grad << 0.3, -5.0, 1e-3, 2.0;
  adam_step(first, ps);
  const Matrix delta = w.value - before;
  CHECK(delta(0, 0) == doctest::Approx(-1e-3).epsilon(1e-4));
  CHECK(delta(0, 1) == doctest::Approx(1e-3).epsilon(1e-4));
  CHECK(delta(1, 0) == doctest::Approx(-1e-3).epsilon(1e-4));
  CHECK(delta(1, 1) == doctest::Approx(-1e-3).epsilon(1e-4));

  // Independent scalar implementation over several varying gradients.
  Parameter v("v", 1, 1);
  Parameter* vs[] = {&v};
  AdamState s2;
  s2.lr = 0.01;
  double ref = 0.4, m = 0, s = 0;
  v.value(0, 0) = ref;
  for (int k = 1; k <= 7; ++k) {
    const double g = std::sin(k) + 0.1 * k;
    v.grad(0, 0) = g;
    adam_step(s2, vs);
    m = 0.9 * m + 0.1 * g;
    s = 0.999 * s + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, k)), sh = s / (1 - std::pow(0.999, k));
    ref -= 0.01 * mh / (std::sqrt(sh) + 1e-8);
    CHECK(v.value(0, 0) == doctest::Approx(ref).epsilon(1e-12));
  }
  CHECK(s2.step == 7);

  Parameter other("o", 3, 1);
  Parameter* wrong[] = {&other};
  CHECK_THROWS_AS(adam_step(s2, wrong), ShapeError);
}

TEST_CASE("Adam descends a quadratic bowl") {
  Parameter w("w", 1, 1);
  w.value(0, 0) = 1.0;
  Parameter* ps[] = {&w};
  AdamState st;
  st.lr = 0.01;
  for (int k = 0; k < 100; ++k) {
    w.zero_grad();
    Tape t;
    const Var x = t.constant(w.value);
    t.backward(t.mul(x, x));
    w.grad = t.grad(x);
    adam_step(st, ps);
  }
  CHECK(std::abs(w.value(0, 0)) < 0.5);
}

TEST_CASE("Glorot init and parameter JSON round-trip") {
  GruParams p("g", 6, 4);
  Rng rng(9);
  glorot_init(p.parameters(), rng);
  const double limit = std::sqrt(6.0 / (6 + 4));
  CHECK(p.w_z.value.cwiseAbs().maxCoeff() <= limit);
  CHECK(p.w_z.value.cwiseAbs().maxCoeff() > 0.0);
  CHECK(p.b_z.value.isZero(0.0));

  const auto cps = std::as_const(p).parameters();
  const auto j = parameters_to_json(cps);
  GruParams q("g", 6, 4);
  parameters_from_json(j, q.parameters());
  CHECK(q.w_c.value == p.w_c.value);
  CHECK(q.u_r.value == p.u_r.value);

  GruParams wrong("g", 5, 4);
  CHECK_THROWS_AS(parameters_from_json(j, wrong.parameters()), ConfigError);
  GruParams renamed("h", 6, 4);
  CHECK_THROWS_AS(parameters_from_json(j, renamed.parameters()), ConfigError);
}
