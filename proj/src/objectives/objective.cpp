#include "cl2o/objectives/objective.hpp"

#include "cl2o/numcore/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace cl2o {

// ---- Objective ----

void Objective::check_component(std::size_t i) const {
  if (num_components() == 0) throw InvalidArgument(describe() + ": objective has no separable components");
  if (i >= num_components()) {
    throw InvalidArgument("component index " + std::to_string(i) + " out of range (M = " +
                          std::to_string(num_components()) + ")");
  }
}

double Objective::component_weight(std::size_t i) const {
  check_component(i);
  return 1.0 / static_cast<double>(num_components());
}

Matrix Objective::component_eval(std::size_t i, const Matrix&) const {
  check_component(i);
  throw InvalidArgument("component_eval not implemented");
}
ad::Var Objective::component_eval(std::size_t i, const ad::Var&) const {
  check_component(i);
  throw InvalidArgument("component_eval not implemented");
}
Matrix Objective::component_grad(std::size_t i, const Matrix&) const {
  check_component(i);
  throw InvalidArgument("component_grad not implemented");
}
ad::Var Objective::component_grad(std::size_t i, const ad::Var&) const {
  check_component(i);
  throw InvalidArgument("component_grad not implemented");
}

double Objective::value(const Vector& x) const { return eval(as_column(x))(0, 0); }
Vector Objective::gradient(const Vector& x) const { return as_vector(grad(as_column(x))); }
double Objective::component_value(std::size_t i, const Vector& x) const {
  return component_eval(i, as_column(x))(0, 0);
}
Vector Objective::component_gradient(std::size_t i, const Vector& x) const {
  return as_vector(component_grad(i, as_column(x)));
}

// ---- concrete objectives ----

QuadraticObjective::QuadraticObjective(Matrix Q, Vector c, double offset, std::optional<double> lower_bound,
                                       std::string descriptor)
    : offset_(offset), descriptor_(std::move(descriptor)) {
  if (Q.rows() != Q.cols() || Q.rows() == 0) throw InvalidArgument("quadratic: Q must be square and non-empty");
  if (c.size() != Q.rows()) throw InvalidArgument("quadratic: c has wrong dimension");
  if (!Q.isApprox(Q.transpose(), 1e-12)) throw InvalidArgument("quadratic: Q must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Q, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (lmin < -1e-12 * std::max(1.0, std::abs(lmax))) {
    throw InvalidArgument("quadratic: Q must be positive semidefinite");
  }
  smoothness_ = {lmax, BetaKind::Analytic};
  if (lower_bound) {
    lower_bound_ = lower_bound;
  } else if (lmin > 0.0) {
    const Vector xs = Q.ldlt().solve(-c);
    lower_bound_ = offset + 0.5 * c.dot(xs);
  }
  if (descriptor_.empty()) descriptor_ = "quadratic d=" + std::to_string(Q.rows());
  q_ = std::make_shared<const Matrix>(std::move(Q));
  c_ = std::make_shared<const Matrix>(as_column(c));
}

Vector QuadraticObjective::minimizer() const {
  return q_->ldlt().solve(-as_vector(*c_));
}

TrigPerturbedQuadratic::TrigPerturbedQuadratic(std::shared_ptr<const QuadraticObjective> base, double amplitude,
                                               double frequency, std::string descriptor, double shift,
                                               std::optional<double> lower_bound)
    : base_(std::move(base)),
      amplitude_(amplitude),
      frequency_(frequency),
      descriptor_(std::move(descriptor)),
      shift_(shift) {
  if (!(amplitude >= 0.0) || !std::isfinite(frequency)) {
    throw InvalidArgument("trig-perturbed quadratic: amplitude must be >= 0 and frequency finite");
  }
  smoothness_ = {base_->beta() + amplitude_ * frequency_ * frequency_, BetaKind::Analytic};
  if (lower_bound) {
    lower_bound_ = *lower_bound;
  } else if (base_->lower_bound()) {
    lower_bound_ = *base_->lower_bound() - shift_;
  }
  if (descriptor_.empty()) descriptor_ = "trig d=" + std::to_string(base_->dim());
}

RosenbrockObjective::RosenbrockObjective(Index d, std::string descriptor) : d_(d), descriptor_(std::move(descriptor)) {
  if (d < 2) throw InvalidArgument("rosenbrock requires d >= 2");
  if (descriptor_.empty()) descriptor_ = "rosenbrock d=" + std::to_string(d);
  lower_bound_ = 0.0;
  smoothness_ = {estimate_beta(*this, Box::cube(d, -2.0, 2.0), 4000, 0x5eed), BetaKind::Empirical};
}

SeparableObjective::SeparableObjective(std::vector<ObjectivePtr> components, std::string descriptor)
    : components_(std::move(components)), descriptor_(std::move(descriptor)) {
  if (components_.empty()) throw InvalidArgument("separable objective needs at least one component");
  double beta = 0.0;
  double lb = 0.0;
  bool have_lb = true;
  BetaKind kind = BetaKind::Analytic;
  for (const auto& c : components_) {
    if (c->dim() != components_.front()->dim()) throw InvalidArgument("separable objective: component dims differ");
    beta += c->beta();
    if (c->smoothness().kind == BetaKind::Empirical) kind = BetaKind::Empirical;
    if (c->lower_bound()) {
      lb += *c->lower_bound();
    } else {
      have_lb = false;
    }
    non_smooth_ = non_smooth_ || c->non_smooth();
  }
  smoothness_ = {beta, kind};
  if (have_lb) lower_bound_ = lb;
  if (descriptor_.empty()) descriptor_ = "separable M=" + std::to_string(components_.size());
}

// ---- factories ----

namespace {

Matrix random_orthogonal(Rng& rng, Index d) {
  Matrix g = random_normal(rng, d, d);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  // fix column signs so the draw is unique for a given Gaussian sample
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  return q;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Damped Newton on a strongly convex trig-perturbed quadratic.
double trig_minimum(const TrigPerturbedQuadratic& f, const Matrix& Q, double a, double w, Vector x) {
  double fx = f.value(x);
  for (int it = 0; it < 100; ++it) {
    const Vector g = f.gradient(x);
    if (g.norm() <= 1e-15 * std::max(1.0, std::abs(fx))) break;
    Matrix H = Q;
    for (Index i = 0; i < x.size(); ++i) H(i, i) -= a * w * w * std::sin(w * x[i]);
    const Vector step = H.ldlt().solve(-g);
    double t = 1.0;
    Vector next = x + step;
    double fn = f.value(next);
    while (fn > fx && t > 1e-12) {
      t *= 0.5;
      next = x + t * step;
      fn = f.value(next);
    }
    if (fn >= fx) break;
    x = next;
    fx = fn;
  }
  return fx;
}

}  // namespace

std::shared_ptr<const QuadraticObjective> make_quadratic(Index d, double condition_number, std::uint64_t seed) {
  if (d < 1) throw InvalidArgument("make_quadratic: d must be >= 1");
  if (!(condition_number >= 1.0)) throw InvalidArgument("make_quadratic: condition_number must be >= 1");
  Rng rng(derive_seed(seed, 0x9a));
  Vector lambda(d);
  lambda[0] = 1.0;
  if (d >= 2) {
    lambda[d - 1] = condition_number;
    std::uniform_real_distribution<double> u(0.0, std::log(condition_number));
    for (Index i = 1; i + 1 < d; ++i) lambda[i] = std::exp(u(rng));
  }
  const Matrix U = random_orthogonal(rng, d);
  Matrix Q = U * lambda.asDiagonal() * U.transpose();
  Q = 0.5 * (Q + Q.transpose()).eval();
  const Vector xstar = as_vector(random_normal(rng, d, 1, 1.0 / std::sqrt(static_cast<double>(d))));
  const Vector c = -Q * xstar;
  const double offset = 0.5 * xstar.dot(Q * xstar);
  std::string desc = "quadratic d=" + std::to_string(d) + " kappa=" + fmt_double(condition_number) +
                     " seed=" + std::to_string(seed);
  return std::make_shared<const QuadraticObjective>(std::move(Q), c, offset, 0.0, desc);
}

NonconvexKind parse_nonconvex_kind(const std::string& name) {
  if (name == "rosenbrock") return NonconvexKind::Rosenbrock;
  if (name == "trig" || name == "trig-perturbed-quadratic") return NonconvexKind::TrigPerturbedQuadratic;
  throw InvalidArgument("unknown nonconvex kind '" + name + "' (expected rosenbrock | trig-perturbed-quadratic)");
}

ObjectivePtr make_nonconvex_family(Index d, NonconvexKind kind, std::uint64_t seed, const NonconvexOptions& opts) {
  switch (kind) {
    case NonconvexKind::Rosenbrock:
      return std::make_shared<const RosenbrockObjective>(d);
    case NonconvexKind::TrigPerturbedQuadratic: {
      auto base = make_quadratic(d, opts.condition_number, seed);
      std::string desc = "trig d=" + std::to_string(d) + " kappa=" + fmt_double(opts.condition_number) +
                         " amplitude=" + fmt_double(opts.amplitude) + " frequency=" + fmt_double(opts.frequency) +
                         " seed=" + std::to_string(seed);
      const double curvature = opts.amplitude * opts.frequency * opts.frequency;
      double shift = 0.0;
      std::optional<double> lb;
      // eigenvalues of the base lie in [1, kappa]
      if (curvature < 1.0) {
        TrigPerturbedQuadratic raw(base, opts.amplitude, opts.frequency, desc);
        const double m = trig_minimum(raw, base->Q(), opts.amplitude, opts.frequency, base->minimizer());
        // keep f strictly above the declared bound despite rounding in m
        shift = m - 1e-12 * std::max(1.0, std::abs(m));
        lb = 0.0;
      }
      return std::make_shared<const TrigPerturbedQuadratic>(base, opts.amplitude, opts.frequency, desc, shift, lb);
    }
  }
  throw InvalidArgument("unknown nonconvex kind");
}

std::shared_ptr<const SeparableObjective> make_separable_least_squares(Index d, std::size_t components,
                                                                       double curvature_lo, double curvature_hi,
                                                                       std::uint64_t seed, double noise) {
  if (components < 1) throw InvalidArgument("least squares: need at least one component");
  if (!(noise >= 0.0)) throw InvalidArgument("least squares: noise must be >= 0");
  if (!(curvature_lo > 0.0) || !(curvature_hi >= curvature_lo)) {
    throw InvalidArgument("least squares: need 0 < curvature_lo <= curvature_hi");
  }
  Rng rng(derive_seed(seed, 0x15));
  std::uniform_real_distribution<double> u(curvature_lo, curvature_hi);
  const Vector planted = as_vector(random_normal(rng, d, 1, 1.0 / std::sqrt(static_cast<double>(d))));
  std::vector<ObjectivePtr> parts;
  for (std::size_t i = 0; i < components; ++i) {
    Vector sv(d);
    for (Index k = 0; k < d; ++k) sv[k] = std::sqrt(u(rng));
    const Matrix V = random_orthogonal(rng, d);
    const Matrix A = sv.asDiagonal() * V.transpose();
    const Vector b = A * planted + noise * as_vector(random_normal(rng, d, 1));
    Matrix H = A.transpose() * A;
    H = 0.5 * (H + H.transpose()).eval();
    parts.push_back(std::make_shared<const QuadraticObjective>(std::move(H), Vector(-A.transpose() * b),
                                                               0.5 * b.squaredNorm(), 0.0));
  }
  std::string desc = "least-squares d=" + std::to_string(d) + " components=" + std::to_string(components) +
                     " lo=" + fmt_double(curvature_lo) + " hi=" + fmt_double(curvature_hi) +
                     " seed=" + std::to_string(seed) + " noise=" + fmt_double(noise);
  return std::make_shared<const SeparableObjective>(std::move(parts), desc);
}

ObjectivePtr objective_from_descriptor(const std::string& descriptor) {
  std::istringstream is(descriptor);
  std::string kind;
  is >> kind;
  std::map<std::string, std::string> kv;
  std::string tok;
  while (is >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) throw InvalidArgument("objective descriptor: malformed token '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  auto need = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw InvalidArgument("objective descriptor '" + descriptor + "' lacks '" + k + "'");
    return it->second;
  };
  try {
    if (kind == "quadratic") {
      return make_quadratic(std::stol(need("d")), std::stod(need("kappa")), std::stoull(need("seed")));
    }
    if (kind == "trig") {
      NonconvexOptions o;
      o.condition_number = std::stod(need("kappa"));
      o.amplitude = std::stod(need("amplitude"));
      o.frequency = std::stod(need("frequency"));
      return make_nonconvex_family(std::stol(need("d")), NonconvexKind::TrigPerturbedQuadratic,
                                   std::stoull(need("seed")), o);
    }
    if (kind == "rosenbrock") {
      return make_nonconvex_family(std::stol(need("d")), NonconvexKind::Rosenbrock, 0);
    }
    if (kind == "least-squares") {
      return make_separable_least_squares(std::stol(need("d")), std::stoul(need("components")),
                                          std::stod(need("lo")), std::stod(need("hi")), std::stoull(need("seed")),
                                          kv.count("noise") ? std::stod(kv.at("noise")) : 1.0);
    }
  } catch (const std::logic_error&) {
    throw InvalidArgument("objective descriptor '" + descriptor + "' has a malformed number");
  }
  throw InvalidArgument("objective descriptor: unsupported kind '" + kind + "'");
}

// ---- beta estimation ----

Box Box::cube(Index d, double lo, double hi) {
  return Box{Vector::Constant(d, lo), Vector::Constant(d, hi)};
}

double estimate_beta(const Objective& obj, const Box& box, std::size_t samples, std::uint64_t seed) {
  if (samples < 2) throw InvalidArgument("estimate_beta: need at least 2 samples");
  const Index d = obj.dim();
  if (box.lower.size() != d || box.upper.size() != d) throw InvalidArgument("estimate_beta: box dimension mismatch");
  for (Index i = 0; i < d; ++i) {
    if (!(box.upper[i] > box.lower[i])) throw InvalidArgument("estimate_beta: degenerate box (zero volume)");
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto draw = [&] {
    Vector x(d);
    for (Index i = 0; i < d; ++i) x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * u(rng);
    return x;
  };
  Vector prev = draw();
  Vector gprev = obj.gradient(prev);
  double best = 0.0;
  for (std::size_t k = 1; k < samples; ++k) {
    Vector x = draw();
    Vector g = obj.gradient(x);
    const double dx = (x - prev).norm();
    if (dx > 0.0) best = std::max(best, (g - gprev).norm() / dx);
    prev = std::move(x);
    gprev = std::move(g);
  }
  return 1.5 * best;
}

}  // namespace cl2o
