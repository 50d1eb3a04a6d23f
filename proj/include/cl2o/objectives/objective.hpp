#pragma once

#include "cl2o/numcore/autodiff.hpp"
#include "cl2o/numcore/ops.hpp"
#include "cl2o/numcore/tensor.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cl2o {

enum class BetaKind { Analytic, Empirical };

struct Smoothness {
  double beta = 0.0;
  BetaKind kind = BetaKind::Analytic;
};

/// A smooth, bounded-below objective with a gradient oracle. Values and
/// gradients are available on both backends: plain matrices and tape
/// variables (the latter so meta-gradients can flow through grad f).
///
/// Objectives are immutable after construction.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual Index dim() const = 0;
  /// Round-trippable descriptor, e.g. "quadratic d=4 kappa=10 seed=3".
  virtual std::string describe() const = 0;

  virtual Matrix eval(const Matrix& x) const = 0;
  virtual ad::Var eval(const ad::Var& x) const = 0;
  virtual Matrix grad(const Matrix& x) const = 0;
  virtual ad::Var grad(const ad::Var& x) const = 0;

  /// Number of separable components f_i (0 when f is not split).
  virtual std::size_t num_components() const { return 0; }
  /// Fraction w_i with sum w_i = 1; f_i / w_i estimates f.
  virtual double component_weight(std::size_t i) const;
  virtual Matrix component_eval(std::size_t i, const Matrix& x) const;
  virtual ad::Var component_eval(std::size_t i, const ad::Var& x) const;
  virtual Matrix component_grad(std::size_t i, const Matrix& x) const;
  virtual ad::Var component_grad(std::size_t i, const ad::Var& x) const;

  const Smoothness& smoothness() const { return smoothness_; }
  double beta() const { return smoothness_.beta; }
  std::optional<double> lower_bound() const { return lower_bound_; }
  /// Gradient is not Lipschitz (ReLU classifiers); no certificate is issued.
  bool non_smooth() const { return non_smooth_; }

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  double component_value(std::size_t i, const Vector& x) const;
  Vector component_gradient(std::size_t i, const Vector& x) const;

 protected:
  Smoothness smoothness_;
  std::optional<double> lower_bound_;
  bool non_smooth_ = false;

  void check_component(std::size_t i) const;
};

using ObjectivePtr = std::shared_ptr<const Objective>;

/// Forwards both backends to templated `eval_impl<V>` / `grad_impl<V>` (and
/// the component variants when the derived class defines them).
template <class Derived>
class ObjectiveBase : public Objective {
 public:
  Matrix eval(const Matrix& x) const override { return self().template eval_impl<Matrix>(x); }
  ad::Var eval(const ad::Var& x) const override { return self().template eval_impl<ad::Var>(x); }
  Matrix grad(const Matrix& x) const override { return self().template grad_impl<Matrix>(x); }
  ad::Var grad(const ad::Var& x) const override { return self().template grad_impl<ad::Var>(x); }

  Matrix component_eval(std::size_t i, const Matrix& x) const override { return comp_eval<Matrix>(i, x); }
  ad::Var component_eval(std::size_t i, const ad::Var& x) const override { return comp_eval<ad::Var>(i, x); }
  Matrix component_grad(std::size_t i, const Matrix& x) const override { return comp_grad<Matrix>(i, x); }
  ad::Var component_grad(std::size_t i, const ad::Var& x) const override { return comp_grad<ad::Var>(i, x); }

 private:
  const Derived& self() const { return static_cast<const Derived&>(*this); }

  template <class V>
  V comp_eval(std::size_t i, const V& x) const {
    if constexpr (requires(const Derived& d) { d.template component_eval_impl<V>(i, x); }) {
      check_component(i);
      return self().template component_eval_impl<V>(i, x);
    } else {
      return Objective::component_eval(i, x);
    }
  }
  template <class V>
  V comp_grad(std::size_t i, const V& x) const {
    if constexpr (requires(const Derived& d) { d.template component_grad_impl<V>(i, x); }) {
      check_component(i);
      return self().template component_grad_impl<V>(i, x);
    } else {
      return Objective::component_grad(i, x);
    }
  }
};

/// f(x) = 1/2 x^T Q x + c^T x + offset.
class QuadraticObjective : public ObjectiveBase<QuadraticObjective> {
 public:
  /// beta is the largest eigenvalue of Q; the lower bound is the exact
  /// minimum when Q is positive definite, else `lower_bound` must be given.
  QuadraticObjective(Matrix Q, Vector c, double offset = 0.0, std::optional<double> lower_bound = std::nullopt,
                     std::string descriptor = "");

  Index dim() const override { return q_->rows(); }
  std::string describe() const override { return descriptor_; }
  const Matrix& Q() const { return *q_; }
  const Matrix& c() const { return *c_; }
  double offset() const { return offset_; }
  /// Unique minimizer (Q positive definite only).
  Vector minimizer() const;

  template <class V>
  V eval_impl(const V& x) const;
  template <class V>
  V grad_impl(const V& x) const;

 private:
  std::shared_ptr<const Matrix> q_;
  std::shared_ptr<const Matrix> c_;
  double offset_;
  std::string descriptor_;
};

/// Quadratic plus amplitude * sum_i (1 + sin(frequency * x_i)) minus a
/// constant shift. The "+1" keeps the function nonnegative when the
/// quadratic's minimum is 0; the shift lets a factory move inf f to 0.
class TrigPerturbedQuadratic : public ObjectiveBase<TrigPerturbedQuadratic> {
 public:
  TrigPerturbedQuadratic(std::shared_ptr<const QuadraticObjective> base, double amplitude, double frequency,
                         std::string descriptor = "", double shift = 0.0,
                         std::optional<double> lower_bound = std::nullopt);
  double shift() const { return shift_; }

  Index dim() const override { return base_->dim(); }
  std::string describe() const override { return descriptor_; }

  template <class V>
  V eval_impl(const V& x) const;
  template <class V>
  V grad_impl(const V& x) const;

 private:
  std::shared_ptr<const QuadraticObjective> base_;
  double amplitude_;
  double frequency_;
  std::string descriptor_;
  double shift_;
};

/// sum_{i<d-1} 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2
class RosenbrockObjective : public ObjectiveBase<RosenbrockObjective> {
 public:
  RosenbrockObjective(Index d, std::string descriptor = "");

  Index dim() const override { return d_; }
  std::string describe() const override { return descriptor_; }

  template <class V>
  V eval_impl(const V& x) const;
  template <class V>
  V grad_impl(const V& x) const;

 private:
  Index d_;
  std::string descriptor_;
};

/// f = sum_i f_i over explicit component objectives.
class SeparableObjective : public ObjectiveBase<SeparableObjective> {
 public:
  SeparableObjective(std::vector<ObjectivePtr> components, std::string descriptor = "");

  Index dim() const override { return components_.front()->dim(); }
  std::string describe() const override { return descriptor_; }
  std::size_t num_components() const override { return components_.size(); }
  const Objective& component(std::size_t i) const { return *components_.at(i); }

  template <class V>
  V eval_impl(const V& x) const;
  template <class V>
  V grad_impl(const V& x) const;
  template <class V>
  V component_eval_impl(std::size_t i, const V& x) const {
    return components_[i]->eval(x);
  }
  template <class V>
  V component_grad_impl(std::size_t i, const V& x) const {
    return components_[i]->grad(x);
  }

 private:
  std::vector<ObjectivePtr> components_;
  std::string descriptor_;
};

// ---- factories ----

/// Random SPD quadratic with eigenvalues in [1, condition_number] (both ends
/// attained when d >= 2), random linear term, and offset chosen so inf f = 0.
std::shared_ptr<const QuadraticObjective> make_quadratic(Index d, double condition_number, std::uint64_t seed);

enum class NonconvexKind { Rosenbrock, TrigPerturbedQuadratic };
NonconvexKind parse_nonconvex_kind(const std::string& name);

struct NonconvexOptions {
  double condition_number = 4.0;
  double amplitude = 0.1;
  double frequency = 2.0;
};

/// Rosenbrock (beta estimated on [-2, 2]^d) or trig-perturbed quadratic
/// (beta = beta_quad + amplitude * frequency^2). When amplitude *
/// frequency^2 < 1 the trig family is strongly convex and is shifted so
/// its minimum (found by Newton's method) is 0.
ObjectivePtr make_nonconvex_family(Index d, NonconvexKind kind, std::uint64_t seed, const NonconvexOptions& opts = {});

/// Least squares with M square blocks f_i = 1/2 |A_i x - b_i|^2, where the
/// eigenvalues of A_i^T A_i are drawn from [curvature_lo, curvature_hi] and
/// b_i = A_i x_p + noise * xi_i for a planted x_p ~ N(0, I / d), xi_i ~ N(0, I).
std::shared_ptr<const SeparableObjective> make_separable_least_squares(Index d, std::size_t components,
                                                                       double curvature_lo, double curvature_hi,
                                                                       std::uint64_t seed, double noise = 1.0);

/// Rebuilds an objective from a `describe()` string (synthetic families only).
ObjectivePtr objective_from_descriptor(const std::string& descriptor);

struct Box {
  Vector lower;
  Vector upper;
  static Box cube(Index d, double lo, double hi);
};

/// max over consecutive sampled pairs of |grad(x) - grad(y)| / |x - y|,
/// inflated by 1.5.
double estimate_beta(const Objective& obj, const Box& box, std::size_t samples, std::uint64_t seed);

// ---- template definitions ----

template <class V>
V QuadraticObjective::eval_impl(const V& x) const {
  const V Q = ops::constant_like(x, q_);
  const V c = ops::constant_like(x, c_);
  const V quad = ops::scale(ops::dot(x, ops::matmul(Q, x)), 0.5);
  return ops::add_scalar(ops::add(quad, ops::dot(c, x)), offset_);
}

template <class V>
V QuadraticObjective::grad_impl(const V& x) const {
  const V Q = ops::constant_like(x, q_);
  const V c = ops::constant_like(x, c_);
  return ops::add(ops::matmul(Q, x), c);
}

template <class V>
V TrigPerturbedQuadratic::eval_impl(const V& x) const {
  const V s = ops::sin(ops::scale(x, frequency_));
  const V trig = ops::scale(ops::add_scalar(s, 1.0), amplitude_);
  const V total = ops::add(base_->eval(x), ops::sum(trig));
  return shift_ == 0.0 ? total : ops::add_scalar(total, -shift_);
}

template <class V>
V TrigPerturbedQuadratic::grad_impl(const V& x) const {
  const V c = ops::cos(ops::scale(x, frequency_));
  return ops::add(base_->grad(x), ops::scale(c, amplitude_ * frequency_));
}

template <class V>
V RosenbrockObjective::eval_impl(const V& x) const {
  const V a = ops::slice(x, 0, d_ - 1);
  const V b = ops::slice(x, 1, d_ - 1);
  const V r = ops::sub(b, ops::mul(a, a));
  const V one_minus = ops::add_scalar(ops::scale(a, -1.0), 1.0);
  return ops::add(ops::scale(ops::squared_norm(r), 100.0), ops::squared_norm(one_minus));
}

template <class V>
V RosenbrockObjective::grad_impl(const V& x) const {
  const V a = ops::slice(x, 0, d_ - 1);
  const V b = ops::slice(x, 1, d_ - 1);
  const V r = ops::sub(b, ops::mul(a, a));
  const V one_minus = ops::add_scalar(ops::scale(a, -1.0), 1.0);
  const V ga = ops::sub(ops::scale(ops::mul(a, r), -400.0), ops::scale(one_minus, 2.0));
  const V gb = ops::scale(r, 200.0);
  const V zero = ops::constant_like(x, Matrix::Zero(1, 1));
  return ops::add(ops::vcat(ga, zero), ops::vcat(zero, gb));
}

template <class V>
V SeparableObjective::eval_impl(const V& x) const {
  V total = components_[0]->eval(x);
  for (std::size_t i = 1; i < components_.size(); ++i) total = ops::add(total, components_[i]->eval(x));
  return total;
}

template <class V>
V SeparableObjective::grad_impl(const V& x) const {
  V total = components_[0]->grad(x);
  for (std::size_t i = 1; i < components_.size(); ++i) total = ops::add(total, components_[i]->grad(x));
  return total;
}

}  // namespace cl2o
