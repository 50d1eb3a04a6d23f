#include "cl2o/numcore/tensor.hpp"

#include <cmath>
#include <string>

namespace cl2o::kern {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + ")");
  }
}

void require_scalar(const Matrix& s, const char* op) {
  if (s.rows() != 1 || s.cols() != 1) {
    throw InvalidArgument(std::string(op) + ": expected a 1x1 scalar operand");
  }
}

}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  return a + b;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  return a - b;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "mul");
  return a.cwiseProduct(b);
}

Matrix scale(const Matrix& a, double c) { return a * c; }

Matrix add_scalar(const Matrix& a, double c) { return a.array() + c; }

Matrix mul_scalar(const Matrix& a, const Matrix& s) {
  require_scalar(s, "mul_scalar");
  return a * s(0, 0);
}

Matrix div_scalar(const Matrix& a, const Matrix& s) {
  require_scalar(s, "div_scalar");
  return a / s(0, 0);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw InvalidArgument("matmul: inner dimension mismatch");
  return a * b;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw InvalidArgument("matmul_nt: inner dimension mismatch");
  return a * b.transpose();
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw InvalidArgument("matmul_tn: inner dimension mismatch");
  return a.transpose() * b;
}

Matrix add_row(const Matrix& a, const Matrix& row) {
  if (row.cols() != 1 || row.rows() != a.cols()) {
    throw InvalidArgument("add_row: row vector must be (cols x 1)");
  }
  Matrix out = a;
  out.rowwise() += row.col(0).transpose();
  return out;
}

Matrix colsum(const Matrix& a) { return a.colwise().sum().transpose(); }

Matrix sum(const Matrix& a) {
  Matrix out(1, 1);
  out(0, 0) = a.sum();
  return out;
}

Matrix norm(const Matrix& a) {
  Matrix out(1, 1);
  out(0, 0) = a.norm();
  return out;
}

Matrix tanh(const Matrix& a) { return a.array().tanh(); }

Matrix sigmoid(const Matrix& a) {
  return a.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Matrix relu(const Matrix& a) { return a.cwiseMax(0.0); }

Matrix step(const Matrix& a) {
  return a.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Matrix exp(const Matrix& a) { return a.array().exp(); }
Matrix log(const Matrix& a) { return a.array().log(); }
Matrix sin(const Matrix& a) { return a.array().sin(); }
Matrix cos(const Matrix& a) { return a.array().cos(); }

Matrix max(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max");
  return a.cwiseMax(b);
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    double z = 0.0;
    for (Index j = 0; j < logits.cols(); ++j) {
      out(i, j) = std::exp(logits(i, j) - m);
      z += out(i, j);
    }
    out.row(i) /= z;
  }
  return out;
}

Matrix softmax_ce(const Matrix& logits, const Matrix& targets) {
  require_same_shape(logits, targets, "softmax_ce");
  double total = 0.0;
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    double z = 0.0;
    for (Index j = 0; j < logits.cols(); ++j) z += std::exp(logits(i, j) - m);
    const double lse = m + std::log(z);
    for (Index j = 0; j < logits.cols(); ++j) {
      if (targets(i, j) != 0.0) total += targets(i, j) * (lse - logits(i, j));
    }
  }
  Matrix out(1, 1);
  out(0, 0) = total;
  return out;
}

Matrix reshape(const Matrix& a, Index rows, Index cols) {
  if (rows * cols != a.size()) throw InvalidArgument("reshape: element count mismatch");
  Matrix out(rows, cols);
  const Index ac = a.cols();
  for (Index k = 0; k < a.size(); ++k) {
    out(k / cols, k % cols) = a(k / ac, k % ac);
  }
  return out;
}

Matrix slice(const Matrix& a, Index offset, Index len) {
  if (a.cols() != 1 || offset < 0 || len < 0 || offset + len > a.rows()) {
    throw InvalidArgument("slice: range outside column vector");
  }
  return a.middleRows(offset, len);
}

Matrix vcat(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw InvalidArgument("vcat: column count mismatch");
  Matrix out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

Matrix hcat(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw InvalidArgument("hcat: row count mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

Matrix broadcast(const Matrix& scalar, Index rows, Index cols) {
  require_scalar(scalar, "broadcast");
  return Matrix::Constant(rows, cols, scalar(0, 0));
}

}  // namespace cl2o::kern
