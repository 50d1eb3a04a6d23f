#pragma once

// Primitive set with two backends: plain matrices (eager) and tape variables
// (recorded). Formulas written against `ops::` once run on either.

#include "cl2o/numcore/autodiff.hpp"
#include "cl2o/numcore/tensor.hpp"

#include <memory>
#include <type_traits>

namespace cl2o::ops {

template <class V>
concept Value = std::is_same_v<V, Matrix> || std::is_same_v<V, ad::Var>;

// ---- eager backend ----
inline const Matrix& value(const Matrix& a) { return a; }
inline Matrix constant_like(const Matrix&, Matrix m) { return m; }
inline Matrix constant_like(const Matrix&, const std::shared_ptr<const Matrix>& m) { return *m; }
inline Matrix detach(const Matrix& a) { return a; }

inline Matrix add(const Matrix& a, const Matrix& b) { return kern::add(a, b); }
inline Matrix sub(const Matrix& a, const Matrix& b) { return kern::sub(a, b); }
inline Matrix mul(const Matrix& a, const Matrix& b) { return kern::hadamard(a, b); }
inline Matrix scale(const Matrix& a, double c) { return kern::scale(a, c); }
inline Matrix add_scalar(const Matrix& a, double c) { return kern::add_scalar(a, c); }
inline Matrix mul_scalar(const Matrix& a, const Matrix& s) { return kern::mul_scalar(a, s); }
inline Matrix div_scalar(const Matrix& a, const Matrix& s) { return kern::div_scalar(a, s); }
inline Matrix matmul(const Matrix& a, const Matrix& b) { return kern::matmul(a, b); }
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) { return kern::matmul_nt(a, b); }
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) { return kern::matmul_tn(a, b); }
inline Matrix add_row(const Matrix& a, const Matrix& row) { return kern::add_row(a, row); }
inline Matrix colsum(const Matrix& a) { return kern::colsum(a); }
inline Matrix sum(const Matrix& a) { return kern::sum(a); }
inline Matrix norm(const Matrix& a) { return kern::norm(a); }
inline Matrix tanh(const Matrix& a) { return kern::tanh(a); }
inline Matrix sigmoid(const Matrix& a) { return kern::sigmoid(a); }
inline Matrix relu(const Matrix& a) { return kern::relu(a); }
inline Matrix step(const Matrix& a) { return kern::step(a); }
inline Matrix exp(const Matrix& a) { return kern::exp(a); }
inline Matrix log(const Matrix& a) { return kern::log(a); }
inline Matrix sin(const Matrix& a) { return kern::sin(a); }
inline Matrix cos(const Matrix& a) { return kern::cos(a); }
inline Matrix max(const Matrix& a, const Matrix& b) { return kern::max(a, b); }
inline Matrix softmax_rows(const Matrix& a) { return kern::softmax_rows(a); }
inline Matrix softmax_ce(const Matrix& a, const Matrix& y) { return kern::softmax_ce(a, y); }
inline Matrix reshape(const Matrix& a, Index r, Index c) { return kern::reshape(a, r, c); }
inline Matrix slice(const Matrix& a, Index off, Index len) { return kern::slice(a, off, len); }
inline Matrix vcat(const Matrix& a, const Matrix& b) { return kern::vcat(a, b); }
inline Matrix hcat(const Matrix& a, const Matrix& b) { return kern::hcat(a, b); }
inline Matrix broadcast(const Matrix& s, Index r, Index c) { return kern::broadcast(s, r, c); }

// ---- taped backend ----
inline const Matrix& value(const ad::Var& a) { return a.value(); }
inline ad::Var constant_like(const ad::Var& like, Matrix m) { return like.tape()->constant(std::move(m)); }
inline ad::Var constant_like(const ad::Var& like, const std::shared_ptr<const Matrix>& m) {
  return like.tape()->constant(m);
}
inline ad::Var detach(const ad::Var& a) { return a.tape()->constant(a.value()); }

namespace detail {
inline ad::Var rec(ad::Op op, Matrix v, const ad::Var& a, const ad::Var& b = ad::Var(), double c = 0.0,
                   Index i0 = 0, Index i1 = 0) {
  return a.tape()->record(op, std::move(v), a, b, c, i0, i1);
}
}  // namespace detail

inline ad::Var add(const ad::Var& a, const ad::Var& b) {
  return detail::rec(ad::Op::Add, kern::add(a.value(), b.value()), a, b);
}
inline ad::Var sub(const ad::Var& a, const ad::Var& b) {
  return detail::rec(ad::Op::Sub, kern::sub(a.value(), b.value()), a, b);
}
inline ad::Var mul(const ad::Var& a, const ad::Var& b) {
  return detail::rec(ad::Op::Mul, kern::hadamard(a.value(), b.value()), a, b);
}
inline ad::Var scale(const ad::Var& a, double c) {
  return detail::rec(ad::Op::Scale, kern::scale(a.value(), c), a, ad::Var(), c);
}
inline ad::Var add_scalar(const ad::Var& a, double c) {
  return detail::rec(ad::Op::AddScalar, kern::add_scalar(a.value(), c), a, ad::Var(), c);
}
inline ad::Var mul_scalar(const ad::Var& a, const ad::Var& s) {
  return detail::rec(ad::Op::MulScalar, kern::mul_scalar(a.value(), s.value()), a, s);
}
inline ad::Var div_scalar(const ad::Var& a, const ad::Var& s) {
  return detail::rec(ad::Op::DivScalar, kern::div_scalar(a.value(), s.value()), a, s);
}
inline ad::Var matmul(const ad::Var& a, const ad::Var& b) {
  return detail::rec(ad::Op::Matmul, kern::matmul(a.value(), b.value()), a, b);
}
inline ad::Var matmul_nt(const ad::Var& a, const ad::Var& b) {
  return detail::rec(ad::Op::MatmulNT, kern::matmul_nt(a.value(), b.value()), a, b);
}
inline ad::Var matmul_tn(const ad::Var& a, const ad::Var& b) {
  return detail::rec(ad::Op::MatmulTN, kern::matmul_tn(a.value(), b.value()), a, b);
}
inline ad::Var add_row(const ad::Var& a, const ad::Var& row) {
  return detail::rec(ad::Op::AddRow, kern::add_row(a.value(), row.value()), a, row);
}
inline ad::Var colsum(const ad::Var& a) { return detail::rec(ad::Op::ColSum, kern::colsum(a.value()), a); }
inline ad::Var sum(const ad::Var& a) { return detail::rec(ad::Op::Sum, kern::sum(a.value()), a); }
inline ad::Var norm(const ad::Var& a) { return detail::rec(ad::Op::Norm, kern::norm(a.value()), a); }
inline ad::Var tanh(const ad::Var& a) { return detail::rec(ad::Op::Tanh, kern::tanh(a.value()), a); }
inline ad::Var sigmoid(const ad::Var& a) {
  return detail::rec(ad::Op::Sigmoid, kern::sigmoid(a.value()), a);
}
inline ad::Var relu(const ad::Var& a) { return detail::rec(ad::Op::Relu, kern::relu(a.value()), a); }
inline ad::Var step(const ad::Var& a) { return detail::rec(ad::Op::Step, kern::step(a.value()), a); }
inline ad::Var exp(const ad::Var& a) { return detail::rec(ad::Op::Exp, kern::exp(a.value()), a); }
inline ad::Var log(const ad::Var& a) { return detail::rec(ad::Op::Log, kern::log(a.value()), a); }
inline ad::Var sin(const ad::Var& a) { return detail::rec(ad::Op::Sin, kern::sin(a.value()), a); }
inline ad::Var cos(const ad::Var& a) { return detail::rec(ad::Op::Cos, kern::cos(a.value()), a); }
inline ad::Var max(const ad::Var& a, const ad::Var& b) {
  return detail::rec(ad::Op::Max, kern::max(a.value(), b.value()), a, b);
}
inline ad::Var softmax_rows(const ad::Var& a) {
  return detail::rec(ad::Op::SoftmaxRows, kern::softmax_rows(a.value()), a);
}
inline ad::Var softmax_ce(const ad::Var& a, const ad::Var& y) {
  return detail::rec(ad::Op::SoftmaxCE, kern::softmax_ce(a.value(), y.value()), a, y);
}
inline ad::Var reshape(const ad::Var& a, Index r, Index c) {
  return detail::rec(ad::Op::Reshape, kern::reshape(a.value(), r, c), a, ad::Var(), 0.0, r, c);
}
inline ad::Var slice(const ad::Var& a, Index off, Index len) {
  return detail::rec(ad::Op::Slice, kern::slice(a.value(), off, len), a, ad::Var(), 0.0, off, len);
}
inline ad::Var vcat(const ad::Var& a, const ad::Var& b) {
  return detail::rec(ad::Op::VCat, kern::vcat(a.value(), b.value()), a, b);
}
inline ad::Var hcat(const ad::Var& a, const ad::Var& b) {
  return detail::rec(ad::Op::HCat, kern::hcat(a.value(), b.value()), a, b);
}
inline ad::Var broadcast(const ad::Var& s, Index r, Index c) {
  return detail::rec(ad::Op::Broadcast, kern::broadcast(s.value(), r, c), s, ad::Var(), 0.0, r, c);
}

// ---- composites ----
template <Value V>
V dot(const V& a, const V& b) {
  return sum(mul(a, b));
}

template <Value V>
V squared_norm(const V& a) {
  return sum(mul(a, a));
}

template <Value V>
double scalar(const V& a) {
  return value(a)(0, 0);
}

}  // namespace cl2o::ops
