#pragma once

// Neural building blocks on top of the tape: GRU cell, 2-layer MLP, Adam.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netdt/rng.hpp"
#include "netdt/tape.hpp"

namespace netdt::ad {

// Standard GRU with the reset gate applied to the recurrent term before the
// candidate matmul:
//   z  = sigmoid(W_z x + U_z h + b_z)
//   r  = sigmoid(W_r x + U_r h + b_r)
//   c  = tanh(W_c x + U_c (r * h) + b_c)
//   h' = z * h + (1 - z) * c
struct GruParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Parameter w_z, w_r, w_c;  // hidden x input
  Parameter u_z, u_r, u_c;  // hidden x hidden
  Parameter b_z, b_r, b_c;  // hidden x 1

  GruParams() = default;
  GruParams(const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

// One GRU update for a batch of columns: state is hidden x B, input is in x B.
Var gru_step(Tape& tape, const GruParams& p, Var state, Var input);

enum class OutputActivation { Identity, Sigmoid };

// W2 relu(W1 x + b1) + b2, then the output activation.
struct MlpParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t output_dim = 0;
  OutputActivation output_activation = OutputActivation::Identity;
  Parameter w1, b1, w2, b2;

  MlpParams() = default;
  MlpParams(const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim,
            std::size_t output_dim, OutputActivation act);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

// Column-batched: input is in x B, output is out x B.
Var mlp_forward(Tape& tape, const MlpParams& p, Var input);

// Glorot-uniform for matrices, zeros for single-column (bias) parameters.
void glorot_init(std::span<Parameter* const> params, Rng& rng);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

// One bias-corrected Adam update using each parameter's grad. Moments are
// created on the first call; later calls require matching shapes.
void adam_step(AdamState& state, std::span<Parameter* const> params);

void zero_grads(std::span<Parameter* const> params);

// Named arrays: [{"name", "shape": [r, c], "data": [row-major values]}].
nlohmann::json parameters_to_json(std::span<const Parameter* const> params);
// Loads values into params by name; every parameter must be present with the
// same shape. Throws ConfigError otherwise.
void parameters_from_json(const nlohmann::json& j, std::span<Parameter* const> params);

}  // namespace netdt::ad
