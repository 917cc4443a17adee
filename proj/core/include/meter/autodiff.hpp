#pragma once

#include <cstddef>
#include <vector>

#include "meter/matrix.hpp"

namespace meter::ad {

// Handle to a node recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

// Reverse-mode recorder over matrix-valued nodes. Nodes are appended in
// evaluation order, so reverse creation order is a valid topological order
// for backward(). A Tape belongs to one training call on one thread.
class Tape {
 public:
  // Leaf whose gradient is tracked (a parameter).
  Var leaf(Matrix value);
  // Leaf without gradient (data, targets, masks).
  Var constant(Matrix value);

  Var matmul(Var a, Var b, bool transpose_b = false);
  Var add(Var a, Var b);
  // Adds a 1 x n row to every row of a.
  Var add_row(Var a, Var row);
  Var sub(Var a, Var b);
  // Elementwise product.
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  // Multiplies every entry of a by the 1 x 1 node s.
  Var scale_by(Var a, Var s);
  Var relu(Var a);
  Var exp(Var a);
  Var log(Var a);
  // Elementwise clamp; gradient is zero where the clamp is active.
  Var clamp(Var a, double lo, double hi);
  // Row-wise inner product of two equally shaped matrices: B x n -> B x 1.
  Var row_dot(Var a, Var b);
  // B x n -> B x 1.
  Var row_sum(Var a);
  // Sum of all entries -> 1 x 1.
  Var sum(Var a);
  // Mean of all entries -> 1 x 1.
  Var mean(Var a);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  // Gradient accumulated by the last backward(); zeros if the node was not reached.
  Matrix grad(Var v) const;
  // Overwrites a leaf value; call replay() to refresh dependent nodes.
  void set_value(Var leaf, Matrix value);

  // Reverse accumulation from a 1 x 1 root. Throws ContractError otherwise.
  void backward(Var root);
  // Recomputes every non-leaf node from its recorded inputs.
  void replay();

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    Leaf,
    Constant,
    MatMul,
    MatMulT,
    Add,
    AddRow,
    Sub,
    Mul,
    Scale,
    ScaleBy,
    Relu,
    Exp,
    Log,
    Clamp,
    RowDot,
    RowSum,
    Sum,
    Mean,
  };

  struct Node {
    Op op;
    std::size_t a;
    std::size_t b;
    double p0 = 0.0;
    double p1 = 0.0;
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
  };

  Var push(Op op, std::size_t a, std::size_t b, Matrix value, double p0 = 0.0, double p1 = 0.0);
  Var emit(Op op, std::size_t a, std::size_t b, double p0 = 0.0, double p1 = 0.0);
  Matrix evaluate(const Node& n) const;
  Matrix& grad_of(std::size_t id);

  std::vector<Node> nodes_;
};

}  // namespace meter::ad
