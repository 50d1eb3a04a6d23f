#pragma once

#include "cl2o/numcore/tensor.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace cl2o::ad {

enum class Op : std::uint8_t {
  Input,
  Constant,
  Add,
  Sub,
  Mul,
  Scale,
  AddScalar,
  MulScalar,
  DivScalar,
  Matmul,
  MatmulNT,
  MatmulTN,
  AddRow,
  ColSum,
  Sum,
  Norm,
  Tanh,
  Sigmoid,
  Relu,
  Step,
  Exp,
  Log,
  Sin,
  Cos,
  Max,
  SoftmaxRows,
  SoftmaxCE,
  Reshape,
  Slice,
  VCat,
  HCat,
  Broadcast,
};

const char* op_name(Op op);

/// A non-finite value appeared while recording. Carries the primitive and
/// the index of the offending node.
class NonFiniteError : public Error {
 public:
  NonFiniteError(Op op, std::size_t node);
  Op op() const { return op_; }
  std::size_t node() const { return node_; }

 private:
  Op op_;
  std::size_t node_;
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Append-only record of primitive evaluations. Every node only references
/// earlier nodes, so a single reverse sweep visits each node once.
///
/// Not copyable or movable: Vars hold a pointer back to their tape.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable leaf.
  Var input(Matrix value);
  /// Non-differentiable leaf (owned copy).
  Var constant(Matrix value);
  /// Non-differentiable leaf sharing storage with the caller.
  Var constant(std::shared_ptr<const Matrix> value);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<Var>& inputs() const { return inputs_; }

  /// Reverse sweep from a scalar (1x1) output. Returns the adjoint of every
  /// registered input, in registration order.
  std::vector<Matrix> gradient(const Var& output) const;
  Matrix gradient(const Var& output, const Var& wrt) const;

  // Recording entry point used by the primitive functions in `ops`.
  Var record(Op op, Matrix value, const Var& a, const Var& b = Var(), double c = 0.0,
             Index i0 = 0, Index i1 = 0);

  const Matrix& value_of(std::size_t id) const;

 private:
  struct Node {
    Op op = Op::Constant;
    std::int64_t a = -1;
    std::int64_t b = -1;
    bool requires_grad = false;
    Matrix value;
    std::shared_ptr<const Matrix> shared;
    double c = 0.0;
    Index i0 = 0;
    Index i1 = 0;
  };

  void check_finite(const Node& node, std::size_t index) const;
  void accumulate(std::vector<Matrix>& adj, std::int64_t id, const Matrix& contribution) const;
  void backprop_node(std::size_t i, const Matrix& g, std::vector<Matrix>& adj) const;

  std::vector<Node> nodes_;
  std::vector<Var> inputs_;
};

}  // namespace cl2o::ad
