#include "cl2o/numcore/autodiff.hpp"

#include <cmath>
#include <string>

namespace cl2o::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::MulScalar: return "mul_scalar";
    case Op::DivScalar: return "div_scalar";
    case Op::Matmul: return "matvec";
    case Op::MatmulNT: return "matmul_nt";
    case Op::MatmulTN: return "matmul_tn";
    case Op::AddRow: return "add_row";
    case Op::ColSum: return "colsum";
    case Op::Sum: return "sum";
    case Op::Norm: return "norm";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Relu: return "relu";
    case Op::Step: return "step";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Max: return "max";
    case Op::SoftmaxRows: return "softmax";
    case Op::SoftmaxCE: return "softmax_cross_entropy";
    case Op::Reshape: return "reshape";
    case Op::Slice: return "slice";
    case Op::VCat: return "vcat";
    case Op::HCat: return "hcat";
    case Op::Broadcast: return "broadcast";
  }
  return "unknown";
}

NonFiniteError::NonFiniteError(Op op, std::size_t node)
    : Error(std::string("non-finite value produced by primitive '") + op_name(op) + "' at node " +
            std::to_string(node)),
      op_(op),
      node_(node) {}

const Matrix& Var::value() const { return tape_->value_of(id_); }

const Matrix& Tape::value_of(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.shared ? *n.shared : n.value;
}

void Tape::check_finite(const Node& node, std::size_t index) const {
  const Matrix& v = node.shared ? *node.shared : node.value;
  if (!v.allFinite()) throw NonFiniteError(node.op, index);
}

Var Tape::input(Matrix value) {
  Node n;
  n.op = Op::Input;
  n.value = std::move(value);
  n.requires_grad = true;
  check_finite(n, nodes_.size());
  nodes_.push_back(std::move(n));
  Var v(this, nodes_.size() - 1);
  inputs_.push_back(v);
  return v;
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  check_finite(n, nodes_.size());
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(std::shared_ptr<const Matrix> value) {
  Node n;
  n.op = Op::Constant;
  n.shared = std::move(value);
  check_finite(n, nodes_.size());
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Op op, Matrix value, const Var& a, const Var& b, double c, Index i0, Index i1) {
  if ((a.valid() && a.tape() != this) || (b.valid() && b.tape() != this)) {
    throw InvalidArgument(std::string(op_name(op)) + ": operands recorded on a different tape");
  }
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.a = a.valid() ? static_cast<std::int64_t>(a.id()) : -1;
  n.b = b.valid() ? static_cast<std::int64_t>(b.id()) : -1;
  n.requires_grad = (n.a >= 0 && nodes_[n.a].requires_grad) || (n.b >= 0 && nodes_[n.b].requires_grad);
  n.c = c;
  n.i0 = i0;
  n.i1 = i1;
  check_finite(n, nodes_.size());
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::vector<Matrix>& adj, std::int64_t id, const Matrix& contribution) const {
  if (id < 0 || !nodes_[id].requires_grad) return;
  Matrix& slot = adj[id];
  if (slot.size() == 0) {
    slot = contribution;
  } else {
    slot += contribution;
  }
}

std::vector<Matrix> Tape::gradient(const Var& output) const {
  if (output.tape() != this) throw InvalidArgument("gradient: output belongs to another tape");
  const Matrix& out = output.value();
  if (out.rows() != 1 || out.cols() != 1) {
    throw InvalidArgument("gradient: tape output is not a scalar (" + std::to_string(out.rows()) + "x" +
                          std::to_string(out.cols()) + ")");
  }
  std::vector<Matrix> adj(nodes_.size());
  adj[output.id()] = Matrix::Ones(1, 1);
  for (std::size_t k = output.id() + 1; k-- > 0;) {
    if (adj[k].size() == 0) continue;
    const Node& n = nodes_[k];
    if (n.op == Op::Input || n.op == Op::Constant) continue;
    backprop_node(k, adj[k], adj);
    adj[k] = Matrix();
  }
  std::vector<Matrix> grads;
  grads.reserve(inputs_.size());
  for (const Var& in : inputs_) {
    const Matrix& g = adj[in.id()];
    grads.push_back(g.size() == 0 ? Matrix::Zero(in.rows(), in.cols()) : g);
  }
  return grads;
}

Matrix Tape::gradient(const Var& output, const Var& wrt) const {
  auto grads = gradient(output);
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    if (inputs_[i].id() == wrt.id()) return grads[i];
  }
  throw InvalidArgument("gradient: requested variable is not a registered input");
}

void Tape::backprop_node(std::size_t k, const Matrix& g, std::vector<Matrix>& adj) const {
  const Node& n = nodes_[k];
  const Matrix& y = n.value;
  auto val = [&](std::int64_t id) -> const Matrix& { return value_of(static_cast<std::size_t>(id)); };
  auto needs = [&](std::int64_t id) { return id >= 0 && nodes_[id].requires_grad; };

  switch (n.op) {
    case Op::Input:
    case Op::Constant:
      break;
    case Op::Add:
      accumulate(adj, n.a, g);
      accumulate(adj, n.b, g);
      break;
    case Op::Sub:
      accumulate(adj, n.a, g);
      if (needs(n.b)) accumulate(adj, n.b, -g);
      break;
    case Op::Mul:
      if (needs(n.a)) accumulate(adj, n.a, g.cwiseProduct(val(n.b)));
      if (needs(n.b)) accumulate(adj, n.b, g.cwiseProduct(val(n.a)));
      break;
    case Op::Scale:
      accumulate(adj, n.a, g * n.c);
      break;
    case Op::AddScalar:
      accumulate(adj, n.a, g);
      break;
    case Op::MulScalar: {
      const double s = val(n.b)(0, 0);
      if (needs(n.a)) accumulate(adj, n.a, g * s);
      if (needs(n.b)) accumulate(adj, n.b, Matrix::Constant(1, 1, g.cwiseProduct(val(n.a)).sum()));
      break;
    }
    case Op::DivScalar: {
      const double s = val(n.b)(0, 0);
      if (needs(n.a)) accumulate(adj, n.a, g / s);
      if (needs(n.b)) {
        accumulate(adj, n.b, Matrix::Constant(1, 1, -g.cwiseProduct(val(n.a)).sum() / (s * s)));
      }
      break;
    }
    case Op::Matmul:
      if (needs(n.a)) accumulate(adj, n.a, g * val(n.b).transpose());
      if (needs(n.b)) accumulate(adj, n.b, val(n.a).transpose() * g);
      break;
    case Op::MatmulNT:
      if (needs(n.a)) accumulate(adj, n.a, g * val(n.b));
      if (needs(n.b)) accumulate(adj, n.b, g.transpose() * val(n.a));
      break;
    case Op::MatmulTN:
      if (needs(n.a)) accumulate(adj, n.a, val(n.b) * g.transpose());
      if (needs(n.b)) accumulate(adj, n.b, val(n.a) * g);
      break;
    case Op::AddRow:
      accumulate(adj, n.a, g);
      if (needs(n.b)) accumulate(adj, n.b, g.colwise().sum().transpose());
      break;
    case Op::ColSum:
      if (needs(n.a)) {
        const Matrix& a = val(n.a);
        Matrix ga(a.rows(), a.cols());
        ga.rowwise() = g.col(0).transpose();
        accumulate(adj, n.a, ga);
      }
      break;
    case Op::Sum: {
      const Matrix& a = val(n.a);
      accumulate(adj, n.a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
      break;
    }
    case Op::Norm: {
      const Matrix& a = val(n.a);
      const double r = y(0, 0);
      if (r > 0.0) {
        accumulate(adj, n.a, a * (g(0, 0) / r));
      }
      break;
    }
    case Op::Tanh:
      accumulate(adj, n.a, g.cwiseProduct((1.0 - y.array().square()).matrix()));
      break;
    case Op::Sigmoid:
      accumulate(adj, n.a, g.cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
      break;
    case Op::Relu: {
      const Matrix& a = val(n.a);
      accumulate(adj, n.a, g.cwiseProduct(kern::step(a)));
      break;
    }
    case Op::Step:
      // piecewise constant: zero derivative everywhere, including at 0
      break;
    case Op::Exp:
      accumulate(adj, n.a, g.cwiseProduct(y));
      break;
    case Op::Log:
      accumulate(adj, n.a, g.cwiseQuotient(val(n.a)));
      break;
    case Op::Sin:
      accumulate(adj, n.a, g.cwiseProduct(kern::cos(val(n.a))));
      break;
    case Op::Cos:
      accumulate(adj, n.a, -g.cwiseProduct(kern::sin(val(n.a))));
      break;
    case Op::Max: {
      const Matrix& a = val(n.a);
      const Matrix& b = val(n.b);
      Matrix mask = (a.array() >= b.array()).cast<double>().matrix();
      if (needs(n.a)) accumulate(adj, n.a, g.cwiseProduct(mask));
      if (needs(n.b)) accumulate(adj, n.b, g.cwiseProduct((1.0 - mask.array()).matrix()));
      break;
    }
    case Op::SoftmaxRows: {
      Matrix ga(y.rows(), y.cols());
      for (Index i = 0; i < y.rows(); ++i) {
        const double dot = g.row(i).dot(y.row(i));
        ga.row(i) = y.row(i).cwiseProduct((g.row(i).array() - dot).matrix());
      }
      accumulate(adj, n.a, ga);
      break;
    }
    case Op::SoftmaxCE: {
      const Matrix& logits = val(n.a);
      const Matrix& targets = val(n.b);
      const Matrix p = kern::softmax_rows(logits);
      if (needs(n.a)) {
        Matrix ga = p;
        for (Index i = 0; i < p.rows(); ++i) ga.row(i) *= targets.row(i).sum();
        ga -= targets;
        accumulate(adj, n.a, ga * g(0, 0));
      }
      if (needs(n.b)) {
        accumulate(adj, n.b, -kern::log(p) * g(0, 0));
      }
      break;
    }
    case Op::Reshape: {
      const Matrix& a = val(n.a);
      accumulate(adj, n.a, kern::reshape(g, a.rows(), a.cols()));
      break;
    }
    case Op::Slice: {
      const Matrix& a = val(n.a);
      Matrix ga = Matrix::Zero(a.rows(), a.cols());
      ga.middleRows(n.i0, n.i1) = g;
      accumulate(adj, n.a, ga);
      break;
    }
    case Op::VCat: {
      const Index ra = val(n.a).rows();
      if (needs(n.a)) accumulate(adj, n.a, g.topRows(ra));
      if (needs(n.b)) accumulate(adj, n.b, g.bottomRows(g.rows() - ra));
      break;
    }
    case Op::HCat: {
      const Index ca = val(n.a).cols();
      if (needs(n.a)) accumulate(adj, n.a, g.leftCols(ca));
      if (needs(n.b)) accumulate(adj, n.b, g.rightCols(g.cols() - ca));
      break;
    }
    case Op::Broadcast:
      accumulate(adj, n.a, Matrix::Constant(1, 1, g.sum()));
      break;
  }
}

}  // namespace cl2o::ad
