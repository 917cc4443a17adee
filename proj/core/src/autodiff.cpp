#include "meter/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace meter::ad {

namespace {
constexpr std::size_t kNone = static_cast<std::size_t>(-1);
}  // namespace

Var Tape::push(Op op, std::size_t a, std::size_t b, Matrix value, double p0, double p1) {
  bool needs = op == Op::Leaf;
  if (a != kNone) needs = needs || nodes_[a].needs_grad;
  if (b != kNone) needs = needs || nodes_[b].needs_grad;
  nodes_.push_back(Node{op, a, b, p0, p1, std::move(value), Matrix{}, needs});
  return Var{nodes_.size() - 1};
}

Var Tape::leaf(Matrix value) { return push(Op::Leaf, kNone, kNone, std::move(value)); }

Var Tape::constant(Matrix value) { return push(Op::Constant, kNone, kNone, std::move(value)); }

Matrix Tape::evaluate(const Node& n) const {
  const Matrix& a = nodes_[n.a].value;
  switch (n.op) {
    case Op::Leaf:
    case Op::Constant:
      return n.value;
    case Op::MatMul:
      return meter::matmul(a, nodes_[n.b].value);
    case Op::MatMulT:
      return meter::matmul(a, nodes_[n.b].value, true);
    case Op::Add:
      return a + nodes_[n.b].value;
    case Op::AddRow: {
      const Matrix& row = nodes_[n.b].value;
      if (row.rows() != 1 || row.cols() != a.cols()) {
        throw ShapeError("add_row: " + a.shape_string() + " + " + row.shape_string());
      }
      Matrix out = a;
      for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += row(0, c);
      return out;
    }
    case Op::Sub:
      return a - nodes_[n.b].value;
    case Op::Mul: {
      const Matrix& b = nodes_[n.b].value;
      require_same_shape(a, b, "mul");
      Matrix out = a;
      for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
      return out;
    }
    case Op::Scale:
      return n.p0 * a;
    case Op::ScaleBy: {
      const Matrix& sc = nodes_[n.b].value;
      if (sc.rows() != 1 || sc.cols() != 1) throw ShapeError("scale_by: scale is not 1x1");
      return sc(0, 0) * a;
    }
    case Op::Relu: {
      Matrix out = a;
      for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
      return out;
    }
    case Op::Exp: {
      Matrix out = a;
      for (double& v : out.values()) v = std::exp(v);
      return out;
    }
    case Op::Log: {
      Matrix out = a;
      for (double& v : out.values()) {
        if (!(v > 0.0)) throw DomainError("log: non-positive argument on tape");
        v = std::log(v);
      }
      return out;
    }
    case Op::Clamp: {
      Matrix out = a;
      for (double& v : out.values()) v = std::clamp(v, n.p0, n.p1);
      return out;
    }
    case Op::RowDot: {
      const Matrix& b = nodes_[n.b].value;
      require_same_shape(a, b, "row_dot");
      Matrix out(a.rows(), 1);
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) acc += a(r, c) * b(r, c);
        out(r, 0) = acc;
      }
      return out;
    }
    case Op::RowSum: {
      Matrix out(a.rows(), 1);
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) acc += a(r, c);
        out(r, 0) = acc;
      }
      return out;
    }
    case Op::Sum:
    case Op::Mean: {
      double acc = 0.0;
      for (double v : a.values()) acc += v;
      if (n.op == Op::Mean) acc /= static_cast<double>(std::max<std::size_t>(a.size(), 1));
      return Matrix(1, 1, acc);
    }
  }
  return {};
}

Var Tape::emit(Op op, std::size_t a, std::size_t b, double p0, double p1) {
  Node probe{op, a, b, p0, p1, Matrix{}, Matrix{}, false};
  Matrix v = evaluate(probe);
  return push(op, a, b, std::move(v), p0, p1);
}

Var Tape::matmul(Var a, Var b, bool transpose_b) {
  return emit(transpose_b ? Op::MatMulT : Op::MatMul, a.id, b.id);
}

Var Tape::add(Var a, Var b) { return emit(Op::Add, a.id, b.id); }
Var Tape::add_row(Var a, Var row) { return emit(Op::AddRow, a.id, row.id); }
Var Tape::sub(Var a, Var b) { return emit(Op::Sub, a.id, b.id); }
Var Tape::mul(Var a, Var b) { return emit(Op::Mul, a.id, b.id); }
Var Tape::row_dot(Var a, Var b) { return emit(Op::RowDot, a.id, b.id); }
Var Tape::scale_by(Var a, Var s) { return emit(Op::ScaleBy, a.id, s.id); }
Var Tape::scale(Var a, double s) { return emit(Op::Scale, a.id, kNone, s); }
Var Tape::relu(Var a) { return emit(Op::Relu, a.id, kNone); }
Var Tape::exp(Var a) { return emit(Op::Exp, a.id, kNone); }
Var Tape::log(Var a) { return emit(Op::Log, a.id, kNone); }
Var Tape::clamp(Var a, double lo, double hi) { return emit(Op::Clamp, a.id, kNone, lo, hi); }
Var Tape::row_sum(Var a) { return emit(Op::RowSum, a.id, kNone); }
Var Tape::sum(Var a) { return emit(Op::Sum, a.id, kNone); }
Var Tape::mean(Var a) { return emit(Op::Mean, a.id, kNone); }

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.same_shape(n.value)) return n.grad;
  return Matrix(n.value.rows(), n.value.cols());
}

Matrix& Tape::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad.same_shape(n.value)) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::set_value(Var leaf, Matrix value) {
  Node& n = nodes_.at(leaf.id);
  if (n.op != Op::Leaf && n.op != Op::Constant) {
    throw ContractError("set_value: node is not a leaf");
  }
  require_same_shape(n.value, value, "set_value");
  n.value = std::move(value);
}

void Tape::replay() {
  for (Node& n : nodes_) {
    if (n.op == Op::Leaf || n.op == Op::Constant) continue;
    n.value = evaluate(n);
  }
}

void Tape::backward(Var root) {
  if (root.id >= nodes_.size()) throw ContractError("backward: unknown root");
  if (nodes_[root.id].value.rows() != 1 || nodes_[root.id].value.cols() != 1) {
    throw ContractError("backward: root is not a scalar (" +
                        nodes_[root.id].value.shape_string() + ")");
  }
  for (Node& n : nodes_) n.grad = Matrix{};
  grad_of(root.id)(0, 0) = 1.0;

  for (std::size_t id = root.id + 1; id-- > 0;) {
    if (!nodes_[id].grad.same_shape(nodes_[id].value)) continue;  // unreached
    const Op op = nodes_[id].op;
    if (op == Op::Leaf || op == Op::Constant) continue;
    const std::size_t ia = nodes_[id].a;
    const std::size_t ib = nodes_[id].b;
    // Inputs always precede id, so this reference survives grad_of(ia/ib).
    const Matrix& g = nodes_[id].grad;
    const double p0 = nodes_[id].p0;
    const double p1 = nodes_[id].p1;

    const bool want_a = ia != kNone && nodes_[ia].needs_grad;
    const bool want_b = ib != kNone && nodes_[ib].needs_grad;
    if (!want_a && !want_b) continue;

    switch (op) {
      case Op::MatMul: {
        // C = A B: dA = G B^T, dB = A^T G
        if (want_a) grad_of(ia) += meter::matmul(g, nodes_[ib].value, true);
        if (want_b) grad_of(ib) += matmul_tn(nodes_[ia].value, g);
        break;
      }
      case Op::MatMulT: {
        // C = A B^T: dA = G B, dB = G^T A
        if (want_a) grad_of(ia) += meter::matmul(g, nodes_[ib].value);
        if (want_b) grad_of(ib) += matmul_tn(g, nodes_[ia].value);
        break;
      }
      case Op::Add:
        if (want_a) grad_of(ia) += g;
        if (want_b) grad_of(ib) += g;
        break;
      case Op::AddRow: {
        if (want_a) grad_of(ia) += g;
        if (want_b) {
          Matrix& gb = grad_of(ib);
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
        }
        break;
      }
      case Op::Sub: {
        if (want_a) grad_of(ia) += g;
        if (want_b) {
          Matrix& gb = grad_of(ib);
          for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] -= g.data()[i];
        }
        break;
      }
      case Op::Mul: {
        const Matrix& a = nodes_[ia].value;
        const Matrix& b = nodes_[ib].value;
        if (want_a) {
          Matrix& ga = grad_of(ia);
          for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * b.data()[i];
        }
        if (want_b) {
          Matrix& gb = grad_of(ib);
          for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] += g.data()[i] * a.data()[i];
        }
        break;
      }
      case Op::Scale: {
        Matrix& ga = grad_of(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += p0 * g.data()[i];
        break;
      }
      case Op::ScaleBy: {
        const Matrix& a = nodes_[ia].value;
        const double sc = nodes_[ib].value(0, 0);
        if (want_a) {
          Matrix& ga = grad_of(ia);
          for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += sc * g.data()[i];
        }
        if (want_b) {
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) acc += g.data()[i] * a.data()[i];
          grad_of(ib)(0, 0) += acc;
        }
        break;
      }
      case Op::Relu: {
        const Matrix& a = nodes_[ia].value;
        Matrix& ga = grad_of(ia);
        for (std::size_t i = 0; i < g.size(); ++i)
          if (a.data()[i] > 0.0) ga.data()[i] += g.data()[i];
        break;
      }
      case Op::Exp: {
        const Matrix& out = nodes_[id].value;
        Matrix& ga = grad_of(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * out.data()[i];
        break;
      }
      case Op::Log: {
        const Matrix& a = nodes_[ia].value;
        Matrix& ga = grad_of(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] / a.data()[i];
        break;
      }
      case Op::Clamp: {
        const Matrix& a = nodes_[ia].value;
        Matrix& ga = grad_of(ia);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double v = a.data()[i];
          if (v > p0 && v < p1) ga.data()[i] += g.data()[i];
        }
        break;
      }
      case Op::RowDot: {
        const Matrix& a = nodes_[ia].value;
        const Matrix& b = nodes_[ib].value;
        if (want_a) {
          Matrix& ga = grad_of(ia);
          for (std::size_t r = 0; r < a.rows(); ++r)
            for (std::size_t c = 0; c < a.cols(); ++c) ga(r, c) += g(r, 0) * b(r, c);
        }
        if (want_b) {
          Matrix& gb = grad_of(ib);
          for (std::size_t r = 0; r < a.rows(); ++r)
            for (std::size_t c = 0; c < a.cols(); ++c) gb(r, c) += g(r, 0) * a(r, c);
        }
        break;
      }
      case Op::RowSum: {
        Matrix& ga = grad_of(ia);
        for (std::size_t r = 0; r < ga.rows(); ++r)
          for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(r, 0);
        break;
      }
      case Op::Sum:
      case Op::Mean: {
        Matrix& ga = grad_of(ia);
        const double s =
            op == Op::Mean ? g(0, 0) / static_cast<double>(std::max<std::size_t>(ga.size(), 1))
                           : g(0, 0);
        for (double& v : ga.values()) v += s;
        break;
      }
      case Op::Leaf:
      case Op::Constant:
        break;
    }
  }
}

}  // namespace meter::ad
