#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cl2o {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed arguments: dimension mismatches, bad enum strings,
/// violated preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A stepsize was bound that voids the convergence certificate (eta >= 1/beta).
class CertificateViolation : public Error {
 public:
  using Error::Error;
};

inline Matrix as_column(const Vector& v) { return Matrix(v); }
inline Vector as_vector(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

/// Dense kernels shared by the eager path and the tape's forward pass, so
/// both produce bit-identical values. Vectors are n x 1 matrices; scalars are
/// 1 x 1.
namespace kern {

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double c);
Matrix add_scalar(const Matrix& a, double c);
Matrix mul_scalar(const Matrix& a, const Matrix& s);
Matrix div_scalar(const Matrix& a, const Matrix& s);

Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// a^T * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);

// a + 1 * row^T, where row is (a.cols() x 1)
Matrix add_row(const Matrix& a, const Matrix& row);
// column sums as a (cols x 1) vector
Matrix colsum(const Matrix& a);
Matrix sum(const Matrix& a);
Matrix norm(const Matrix& a);

Matrix tanh(const Matrix& a);
Matrix sigmoid(const Matrix& a);
Matrix relu(const Matrix& a);
Matrix step(const Matrix& a);
Matrix exp(const Matrix& a);
Matrix log(const Matrix& a);
Matrix sin(const Matrix& a);
Matrix cos(const Matrix& a);
Matrix max(const Matrix& a, const Matrix& b);

Matrix softmax_rows(const Matrix& logits);
// sum over rows of -sum_j y_ij * log softmax(logits)_ij
Matrix softmax_ce(const Matrix& logits, const Matrix& targets);

// row-major reinterpretation of the entries of a
Matrix reshape(const Matrix& a, Index rows, Index cols);
// rows [offset, offset + len) of a column vector
Matrix slice(const Matrix& a, Index offset, Index len);
Matrix vcat(const Matrix& a, const Matrix& b);
Matrix hcat(const Matrix& a, const Matrix& b);
Matrix broadcast(const Matrix& scalar, Index rows, Index cols);

}  // namespace kern

}  // namespace cl2o
