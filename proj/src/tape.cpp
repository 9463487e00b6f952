#include "netdt/tape.hpp"

#include <algorithm>
#include <cmath>

#include "netdt/errors.hpp"

namespace netdt::ad {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape " + shape(a) + " vs " + shape(b));
  }
}

}  // namespace

Var Tape::push(Node node) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(std::move(node));
  return Var{id};
}

void Tape::check_var(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw ShapeError("variable does not belong to tape");
}

Var Tape::constant(Matrix value) {
  if (!value.allFinite()) throw NumericError("non-finite value passed to tape constant");
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant_scalar(double value) {
  return constant(Matrix::Constant(1, 1, value));
}

Var Tape::zeros(Eigen::Index rows, Eigen::Index cols) { return constant(Matrix::Zero(rows, cols)); }

double Tape::scalar(Var v) const {
  const Matrix& x = value(v);
  if (x.size() != 1) throw ShapeError("scalar() on a node of shape " + shape(x));
  return x(0, 0);
}

void Tape::reset() {
  nodes_.clear();
  grads_.clear();
  released_ = false;
}

std::optional<std::uint32_t> Tape::first_nonfinite() const {
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].value.allFinite()) return i;
  }
  return std::nullopt;
}

void Tape::release(std::uint32_t from, std::uint32_t to, std::span<const Var> keep) {
  to = std::min<std::uint32_t>(to, static_cast<std::uint32_t>(nodes_.size()));
  for (std::uint32_t i = from; i < to; ++i) {
    if (std::any_of(keep.begin(), keep.end(), [i](Var v) { return v.id == i; })) continue;
    nodes_[i].value.resize(0, 0);
    nodes_[i].terms.clear();
    nodes_[i].many.clear();
    released_ = true;
  }
}

Var Tape::affine(const Parameter& w, Var x, const Parameter* u, Var h, const Parameter* b) {
  check_var(x);
  const Matrix& xv = value(x);
  if (w.value.cols() != xv.rows()) {
    throw ShapeError("affine: weight " + w.name + " expects input " +
                     std::to_string(w.value.cols()) + ", got " + std::to_string(xv.rows()));
  }
  Node n;
  n.op = Op::Affine;
  n.in[0] = x.id;
  n.params[0] = &w;
  n.value.noalias() = w.value * xv;
  if (u != nullptr) {
    check_var(h);
    const Matrix& hv = value(h);
    if (u->value.cols() != hv.rows() || u->value.rows() != w.value.rows() ||
        hv.cols() != xv.cols()) {
      throw ShapeError("affine: recurrent weight " + u->name + " does not match");
    }
    n.in[1] = h.id;
    n.params[1] = u;
    n.value.noalias() += u->value * hv;
  }
  if (b != nullptr) {
    if (b->value.rows() != w.value.rows() || b->value.cols() != 1) {
      throw ShapeError("affine: bias " + b->name + " does not match");
    }
    n.params[2] = b;
    n.value.colwise() += b->value.col(0);
  }
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  check_var(a);
  check_var(b);
  require_same_shape(value(a), value(b), "add");
  Node n;
  n.op = Op::Add;
  n.in[0] = a.id;
  n.in[1] = b.id;
  n.value = value(a) + value(b);
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  check_var(a);
  check_var(b);
  require_same_shape(value(a), value(b), "sub");
  Node n;
  n.op = Op::Sub;
  n.in[0] = a.id;
  n.in[1] = b.id;
  n.value = value(a) - value(b);
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  check_var(a);
  check_var(b);
  require_same_shape(value(a), value(b), "mul");
  Node n;
  n.op = Op::Mul;
  n.in[0] = a.id;
  n.in[1] = b.id;
  n.value = value(a).cwiseProduct(value(b));
  return push(std::move(n));
}

Var Tape::scale(Var a, double k) {
  check_var(a);
  Node n;
  n.op = Op::Scale;
  n.in[0] = a.id;
  n.k = k;
  n.value = k * value(a);
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  check_var(a);
  Node n;
  n.op = Op::Sigmoid;
  n.in[0] = a.id;
  // exp(-x) may overflow to +inf for very negative x, which still yields 0.
  n.value = (1.0 + (-value(a).array()).exp()).inverse().matrix();
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  check_var(a);
  Node n;
  n.op = Op::Tanh;
  n.in[0] = a.id;
  // Vectorized form; saturates to +-1 through inf arithmetic.
  n.value = (1.0 - 2.0 / ((2.0 * value(a).array()).exp() + 1.0)).matrix();
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  check_var(a);
  Node n;
  n.op = Op::Relu;
  n.in[0] = a.id;
  n.value = value(a).cwiseMax(0.0);
  return push(std::move(n));
}

Var Tape::lerp(Var z, Var a, Var b) {
  check_var(z);
  check_var(a);
  check_var(b);
  require_same_shape(value(z), value(a), "lerp");
  require_same_shape(value(a), value(b), "lerp");
  Node n;
  n.op = Op::Lerp;
  n.in[0] = z.id;
  n.in[1] = a.id;
  n.in[2] = b.id;
  const Matrix& zv = value(z);
  n.value = (zv.array() * value(a).array() + (1.0 - zv.array()) * value(b).array()).matrix();
  return push(std::move(n));
}

Var Tape::concat(Var a, Var b) {
  check_var(a);
  check_var(b);
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.cols() != bv.cols()) throw ShapeError("concat: shape " + shape(av) + " vs " + shape(bv));
  Node n;
  n.op = Op::Concat;
  n.in[0] = a.id;
  n.in[1] = b.id;
  n.value.resize(av.rows() + bv.rows(), av.cols());
  n.value << av, bv;
  return push(std::move(n));
}

Var Tape::sum(std::span<const Var> xs) {
  if (xs.empty()) throw ShapeError("sum of an empty list");
  Node n;
  n.op = Op::Sum;
  n.many.reserve(xs.size());
  for (Var x : xs) check_var(x);
  n.value = value(xs[0]);
  n.many.push_back(xs[0].id);
  for (std::size_t i = 1; i < xs.size(); ++i) {
    require_same_shape(n.value, value(xs[i]), "sum");
    n.value += value(xs[i]);
    n.many.push_back(xs[i].id);
  }
  return push(std::move(n));
}

Var Tape::sum_elements(Var a) {
  check_var(a);
  Node n;
  n.op = Op::SumElements;
  n.in[0] = a.id;
  n.value = Matrix::Constant(1, 1, value(a).sum());
  return push(std::move(n));
}

Var Tape::dot(Var a, Var b) {
  check_var(a);
  check_var(b);
  require_same_shape(value(a), value(b), "dot");
  Node n;
  n.op = Op::Dot;
  n.in[0] = a.id;
  n.in[1] = b.id;
  n.value = Matrix::Constant(1, 1, value(a).cwiseProduct(value(b)).sum());
  return push(std::move(n));
}

Var Tape::combine_columns(Eigen::Index rows, Eigen::Index cols,
                          std::span<const ColumnTerm> terms) {
  Node n;
  n.op = Op::Combine;
  n.value = Matrix::Zero(rows, cols);
  for (const ColumnTerm& t : terms) {
    check_var(t.src);
    const Matrix& src = value(t.src);
    if (src.rows() != rows || t.src_col >= src.cols() || t.dst_col >= cols) {
      throw ShapeError("combine_columns: term out of range for source " + shape(src));
    }
    n.value.col(t.dst_col) += t.coeff * src.col(t.src_col);
  }
  n.terms.assign(terms.begin(), terms.end());
  return push(std::move(n));
}

Var Tape::mse(Var a, const Matrix& target) {
  check_var(a);
  require_same_shape(value(a), target, "mse");
  if (target.size() == 0) throw ShapeError("mse of an empty node");
  Node n;
  n.op = Op::Mse;
  n.in[0] = a.id;
  n.aux = target;
  n.value = Matrix::Constant(1, 1, (value(a) - target).squaredNorm() /
                                       static_cast<double>(target.size()));
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  check_var(loss);
  if (value(loss).size() != 1) throw ShapeError("backward() needs a 1x1 loss");
  if (released_) throw ShapeError("backward() on a tape with released values");
  grads_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    grads_[i].setZero(nodes_[i].value.rows(), nodes_[i].value.cols());
  }
  grads_[loss.id](0, 0) = 1.0;

  for (std::size_t idx = loss.id + 1; idx-- > 0;) {
    const Node& n = nodes_[idx];
    const Matrix& g = grads_[idx];
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Affine: {
        const Matrix& x = nodes_[n.in[0]].value;
        n.params[0]->grad.noalias() += g * x.transpose();
        grads_[n.in[0]].noalias() += n.params[0]->value.transpose() * g;
        if (n.params[1] != nullptr) {
          const Matrix& h = nodes_[n.in[1]].value;
          n.params[1]->grad.noalias() += g * h.transpose();
          grads_[n.in[1]].noalias() += n.params[1]->value.transpose() * g;
        }
        if (n.params[2] != nullptr) n.params[2]->grad.col(0) += g.rowwise().sum();
        break;
      }
      case Op::Add:
        grads_[n.in[0]] += g;
        grads_[n.in[1]] += g;
        break;
      case Op::Sub:
        grads_[n.in[0]] += g;
        grads_[n.in[1]] -= g;
        break;
      case Op::Mul:
        grads_[n.in[0]] += g.cwiseProduct(nodes_[n.in[1]].value);
        grads_[n.in[1]] += g.cwiseProduct(nodes_[n.in[0]].value);
        break;
      case Op::Scale:
        grads_[n.in[0]] += n.k * g;
        break;
      case Op::Sigmoid:
        grads_[n.in[0]].array() += g.array() * n.value.array() * (1.0 - n.value.array());
        break;
      case Op::Tanh:
        grads_[n.in[0]].array() += g.array() * (1.0 - n.value.array().square());
        break;
      case Op::Relu: {
        const Matrix& a = nodes_[n.in[0]].value;
        grads_[n.in[0]].array() += (a.array() > 0.0).select(g.array(), 0.0);
        break;
      }
      case Op::Lerp: {
        const Matrix& z = nodes_[n.in[0]].value;
        const Matrix& a = nodes_[n.in[1]].value;
        const Matrix& b = nodes_[n.in[2]].value;
        grads_[n.in[0]].array() += g.array() * (a.array() - b.array());
        grads_[n.in[1]].array() += g.array() * z.array();
        grads_[n.in[2]].array() += g.array() * (1.0 - z.array());
        break;
      }
      case Op::Concat: {
        const auto na = nodes_[n.in[0]].value.rows();
        const auto nb = nodes_[n.in[1]].value.rows();
        grads_[n.in[0]] += g.topRows(na);
        grads_[n.in[1]] += g.bottomRows(nb);
        break;
      }
      case Op::Sum:
        for (std::uint32_t id : n.many) grads_[id] += g;
        break;
      case Op::SumElements:
        grads_[n.in[0]].array() += g(0, 0);
        break;
      case Op::Dot:
        grads_[n.in[0]] += g(0, 0) * nodes_[n.in[1]].value;
        grads_[n.in[1]] += g(0, 0) * nodes_[n.in[0]].value;
        break;
      case Op::Combine:
        for (const ColumnTerm& t : n.terms) grads_[t.src.id].col(t.src_col) += t.coeff * g.col(t.dst_col);
        break;
      case Op::Mse:
        grads_[n.in[0]] +=
            (2.0 * g(0, 0) / static_cast<double>(n.aux.size())) * (nodes_[n.in[0]].value - n.aux);
        break;
    }
  }
}

}  // namespace netdt::ad
