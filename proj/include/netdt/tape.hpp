#pragma once

// Reverse-mode automatic differentiation over dense matrices.
//
// A Tape records every operation as a node holding its forward value.
// backward() sweeps the nodes in reverse and accumulates gradients into the
// node slots and into the Parameter objects referenced by affine nodes.
// Values are column batches: a column is one entity (flow, queue, link), so
// a single node can carry the states of many entities at once.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace netdt::ad {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Trainable array. Vectors are stored as single-column matrices. The gradient
// is an accumulator written by Tape::backward, so it stays writable through
// const references held by a forward pass.
struct Parameter {
  std::string name;
  Matrix value;
  mutable Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
};

// Handle to a tape node. Only meaningful for the tape that created it.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

// One term of Tape::combine_columns: coeff * src[:, src_col] is added to
// output column dst_col.
struct ColumnTerm {
  Var src;
  std::uint32_t src_col = 0;
  std::uint32_t dst_col = 0;
  double coeff = 1.0;
};

class Tape {
 public:
  Tape() = default;

  // Leaf holding a fixed value. Rejects NaN/Inf with NumericError. Leaves
  // still receive gradients, which tests use to probe inputs.
  Var constant(Matrix value);
  Var constant_scalar(double value);
  Var zeros(Eigen::Index rows, Eigen::Index cols = 1);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const;
  // Valid after backward(); zero for nodes the loss does not depend on.
  const Matrix& grad(Var v) const { return grads_.at(v.id); }

  std::size_t size() const { return nodes_.size(); }
  void reset();

  // Frees the values of nodes in [from, to) except `keep`. A tape with
  // released nodes can no longer run backward().
  void release(std::uint32_t from, std::uint32_t to, std::span<const Var> keep);

  // First node whose value contains NaN/Inf, if any. Scans the whole tape.
  std::optional<std::uint32_t> first_nonfinite() const;

  // Fills node gradients and accumulates parameter gradients. The loss must
  // be a 1x1 node; anything else raises ShapeError.
  void backward(Var loss);

  // Y = W X [+ U H] [+ b], the bias broadcast over columns.
  Var affine(const Parameter& w, Var x, const Parameter* u = nullptr, Var h = {},
             const Parameter* b = nullptr);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double k);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  // z * a + (1 - z) * b, elementwise.
  Var lerp(Var z, Var a, Var b);
  // Row-wise stacking of two blocks with equal column counts.
  Var concat(Var a, Var b);
  // Elementwise sum of equally shaped nodes; empty input is not allowed.
  Var sum(std::span<const Var> xs);
  Var sum_elements(Var a);
  Var dot(Var a, Var b);
  // rows x cols output, zero except for the listed terms. Gathers, prefix
  // selections and per-segment sums are all special cases. Terms are applied
  // in the given order.
  Var combine_columns(Eigen::Index rows, Eigen::Index cols, std::span<const ColumnTerm> terms);
  // Mean over elements of (a - target)^2.
  Var mse(Var a, const Matrix& target);

 private:
  enum class Op : std::uint8_t {
    Leaf,
    Affine,
    Add,
    Sub,
    Mul,
    Scale,
    Sigmoid,
    Tanh,
    Relu,
    Lerp,
    Concat,
    Sum,
    SumElements,
    Dot,
    Combine,
    Mse,
  };

  struct Node {
    Op op = Op::Leaf;
    std::uint32_t in[3] = {UINT32_MAX, UINT32_MAX, UINT32_MAX};
    const Parameter* params[3] = {nullptr, nullptr, nullptr};
    double k = 0.0;
    std::vector<std::uint32_t> many;
    std::vector<ColumnTerm> terms;
    Matrix aux;  // Mse target
    Matrix value;
  };

  Var push(Node node);
  void check_var(Var v) const;

  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
  bool released_ = false;
};

}  // namespace netdt::ad
