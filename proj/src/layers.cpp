#include "netdt/layers.hpp"

#include <cmath>
#include <map>

#include "netdt/errors.hpp"

namespace netdt::ad {

namespace {

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

}  // namespace

GruParams::GruParams(const std::string& prefix, std::size_t in, std::size_t hid)
    : input_dim(in),
      hidden_dim(hid),
      w_z(prefix + ".w_z", idx(hid), idx(in)),
      w_r(prefix + ".w_r", idx(hid), idx(in)),
      w_c(prefix + ".w_c", idx(hid), idx(in)),
      u_z(prefix + ".u_z", idx(hid), idx(hid)),
      u_r(prefix + ".u_r", idx(hid), idx(hid)),
      u_c(prefix + ".u_c", idx(hid), idx(hid)),
      b_z(prefix + ".b_z", idx(hid), 1),
      b_r(prefix + ".b_r", idx(hid), 1),
      b_c(prefix + ".b_c", idx(hid), 1) {}

std::vector<Parameter*> GruParams::parameters() {
  return {&w_z, &w_r, &w_c, &u_z, &u_r, &u_c, &b_z, &b_r, &b_c};
}

std::vector<const Parameter*> GruParams::parameters() const {
  return {&w_z, &w_r, &w_c, &u_z, &u_r, &u_c, &b_z, &b_r, &b_c};
}

Var gru_step(Tape& tape, const GruParams& p, Var state, Var input) {
  const auto h_dim = tape.value(state).rows();
  const auto x_dim = tape.value(input).rows();
  if (h_dim != idx(p.hidden_dim) || x_dim != idx(p.input_dim) ||
      tape.value(state).cols() != tape.value(input).cols()) {
    throw ShapeError("gru_step: expected state " + std::to_string(p.hidden_dim) + " and input " +
                     std::to_string(p.input_dim) + " rows with equal batch, got " +
                     std::to_string(h_dim) + " and " + std::to_string(x_dim));
  }
  const Var z = tape.sigmoid(tape.affine(p.w_z, input, &p.u_z, state, &p.b_z));
  const Var r = tape.sigmoid(tape.affine(p.w_r, input, &p.u_r, state, &p.b_r));
  const Var rh = tape.mul(r, state);
  const Var c = tape.tanh(tape.affine(p.w_c, input, &p.u_c, rh, &p.b_c));
  return tape.lerp(z, state, c);
}

MlpParams::MlpParams(const std::string& prefix, std::size_t in, std::size_t hid, std::size_t out,
                     OutputActivation act)
    : input_dim(in),
      hidden_dim(hid),
      output_dim(out),
      output_activation(act),
      w1(prefix + ".w1", idx(hid), idx(in)),
      b1(prefix + ".b1", idx(hid), 1),
      w2(prefix + ".w2", idx(out), idx(hid)),
      b2(prefix + ".b2", idx(out), 1) {}

std::vector<Parameter*> MlpParams::parameters() { return {&w1, &b1, &w2, &b2}; }

std::vector<const Parameter*> MlpParams::parameters() const { return {&w1, &b1, &w2, &b2}; }

Var mlp_forward(Tape& tape, const MlpParams& p, Var input) {
  if (tape.value(input).rows() != idx(p.input_dim)) {
    throw ShapeError("mlp_forward: expected input " + std::to_string(p.input_dim) + ", got " +
                     std::to_string(tape.value(input).rows()));
  }
  const Var hidden = tape.relu(tape.affine(p.w1, input, nullptr, {}, &p.b1));
  const Var out = tape.affine(p.w2, hidden, nullptr, {}, &p.b2);
  return p.output_activation == OutputActivation::Sigmoid ? tape.sigmoid(out) : out;
}

void glorot_init(std::span<Parameter* const> params, Rng& rng) {
  for (Parameter* p : params) {
    if (p->value.cols() == 1) {
      p->value.setZero();
    } else {
      const double limit =
          std::sqrt(6.0 / static_cast<double>(p->value.rows() + p->value.cols()));
      for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
        for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
          p->value(i, j) = rng.uniform(-limit, limit);
        }
      }
    }
    p->zero_grad();
  }
}

void adam_step(AdamState& state, std::span<Parameter* const> params) {
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: parameter count changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (state.m[i].rows() != p.value.rows() || state.m[i].cols() != p.value.cols() ||
        p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      throw ShapeError("adam_step: shape mismatch for " + p.name);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    m = state.beta1 * m + (1.0 - state.beta1) * p.grad;
    v = state.beta2 * v + (1.0 - state.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -=
        state.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.eps);
  }
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

nlohmann::json parameters_to_json(std::span<const Parameter* const> params) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Parameter* p : params) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(p->value.size()));
    for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) data.push_back(p->value(i, j));
    }
    arr.push_back({{"name", p->name},
                   {"shape", {p->value.rows(), p->value.cols()}},
                   {"data", std::move(data)}});
  }
  return arr;
}

void parameters_from_json(const nlohmann::json& j, std::span<Parameter* const> params) {
  if (!j.is_array()) throw ConfigError("parameter list must be an array");
  std::map<std::string, const nlohmann::json*> by_name;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("name")) throw ConfigError("malformed parameter entry");
    by_name[e.at("name").get<std::string>()] = &e;
  }
  for (Parameter* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw ConfigError("checkpoint lacks parameter " + p->name);
    const auto& e = *it->second;
    const auto shape = e.at("shape").get<std::vector<Eigen::Index>>();
    const auto data = e.at("data").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] != p->value.rows() || shape[1] != p->value.cols() ||
        data.size() != static_cast<std::size_t>(p->value.size())) {
      throw ConfigError("checkpoint parameter " + p->name + " has the wrong shape");
    }
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) p->value(r, c) = data[k++];
    }
    if (!p->value.allFinite()) throw NumericError("checkpoint parameter " + p->name + " is not finite");
    p->zero_grad();
  }
}

}  // namespace netdt::ad
