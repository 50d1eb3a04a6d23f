#include "cl2o/numcore/random.hpp"
#include "cl2o/objectives/classifier.hpp"
#include "cl2o/objectives/objective.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>

using namespace cl2o;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Vector taped_gradient(const Objective& obj, const Vector& x) {
  ad::Tape tape;
  const ad::Var in = tape.input(Matrix(x));
  return as_vector(tape.gradient(obj.eval(in), in));
}

double rel_err(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

std::shared_ptr<const Dataset> tiny_dataset(Index n, Index p, int labels, std::uint64_t seed) {
  Rng rng(seed);
  auto d = std::make_shared<Dataset>();
  d->images = random_uniform(rng, n, p, 0.0, 1.0);
  d->num_labels = labels;
  for (Index i = 0; i < n; ++i) d->labels.push_back(static_cast<int>(i % labels));
  d->name = "tiny";
  return d;
}

// Independent cross-entropy over the whole dataset, one image at a time.
double oracle_mean_ce(const Dataset& data, Activation act, const Vector& x) {
  const Index L = data.num_labels, P = data.pixels();
  double total = 0.0;
  for (Index i = 0; i < data.size(); ++i) {
    std::vector<double> o(static_cast<std::size_t>(L));
    for (Index k = 0; k < L; ++k) {
      double pre = x[L * P + k];
      for (Index j = 0; j < P; ++j) pre += x[k * P + j] * data.images(i, j);
      o[k] = act == Activation::Tanh ? std::tanh(pre)
             : act == Activation::Sigmoid ? 1.0 / (1.0 + std::exp(-pre))
                                          : std::max(0.0, pre);
    }
    double mx = o[0];
    for (double v : o) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : o) z += std::exp(v - mx);
    total += -(o[static_cast<std::size_t>(data.labels[i])] - mx - std::log(z));
  }
  return total / static_cast<double>(data.size());
}

}  // namespace

TEST_CASE("scalar and diagonal quadratics") {
  const QuadraticObjective q(Matrix::Identity(1, 1), Vector::Zero(1));
  CHECK(q.value(vec({3.0})) == 4.5);
  CHECK(q.gradient(vec({3.0}))[0] == 3.0);
  CHECK(q.beta() == doctest::Approx(1.0));
  CHECK(*q.lower_bound() == doctest::Approx(0.0));

  Matrix Q = Matrix::Zero(2, 2);
  Q(0, 0) = 1.0;
  Q(1, 1) = 4.0;
  CHECK(QuadraticObjective(Q, Vector::Zero(2)).beta() == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("random quadratics are seed-stable with the requested spectrum") {
  const auto a = make_quadratic(6, 10.0, 42);
  const auto b = make_quadratic(6, 10.0, 42);
  CHECK(a->Q() == b->Q());
  CHECK(a->c() == b->c());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a->Q());
  CHECK(eig.eigenvalues().minCoeff() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(eig.eigenvalues().maxCoeff() == doctest::Approx(10.0).epsilon(1e-10));
  CHECK(a->value(a->minimizer()) == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  CHECK(make_quadratic(6, 10.0, 43)->Q() != a->Q());
}

TEST_CASE("Rosenbrock values at reference points") {
  const RosenbrockObjective r(2);
  CHECK(r.value(vec({1.0, 1.0})) == 0.0);
  CHECK(r.gradient(vec({1.0, 1.0})).isZero(0.0));
  CHECK(r.value(vec({0.0, 0.0})) == 1.0);
}

TEST_CASE("trig-perturbed quadratic smoothness") {
  auto base = std::make_shared<const QuadraticObjective>(Matrix::Identity(1, 1), Vector::Zero(1), 0.0);
  const TrigPerturbedQuadratic t(base, 0.1, 2.0);
  CHECK(t.beta() == doctest::Approx(1.4).epsilon(1e-12));
  // f'' = 1 - 0.4 sin(2x) attains 1.4 at x = -pi/4
  const double h = 1e-4, x = -std::numbers::pi / 4;
  const double second = (t.gradient(vec({x + h}))[0] - t.gradient(vec({x - h}))[0]) / (2 * h);
  CHECK(second == doctest::Approx(1.4).epsilon(1e-6));
}

TEST_CASE("empirical smoothness estimates") {
  const QuadraticObjective half(Matrix::Identity(1, 1), Vector::Zero(1));
  const double est = estimate_beta(half, Box::cube(1, -1.0, 1.0), 1000, 5);
  CHECK(est >= 1.0);
  CHECK(est <= 1.5 + 1e-12);

  const QuadraticObjective linear(Matrix::Zero(3, 3), vec({1.0, -2.0, 0.5}), 0.0, -1e9);
  CHECK(estimate_beta(linear, Box::cube(3, -1.0, 1.0), 1000, 6) <= 1e-12);

  auto base = std::make_shared<const QuadraticObjective>(Matrix::Identity(1, 1), Vector::Zero(1), 0.0);
  const TrigPerturbedQuadratic t(base, 0.1, 2.0);
  const double small = estimate_beta(t, Box::cube(1, -2.0, 2.0), 100, 7);
  const double large = estimate_beta(t, Box::cube(1, -2.0, 2.0), 20000, 7);
  CHECK(small >= 1.0);
  CHECK(large <= 1.4 * 1.5 + 1e-9);
  CHECK(large >= 2.0);  // close to 2.1 with many samples
}

TEST_CASE("hand-coded gradients agree with the tape") {
  std::vector<ObjectivePtr> objs = {
      make_quadratic(8, 10.0, 1),
      make_nonconvex_family(5, NonconvexKind::Rosenbrock, 2),
      make_nonconvex_family(6, NonconvexKind::TrigPerturbedQuadratic, 3),
      make_separable_least_squares(4, 3, 0.5, 2.0, 4),
  };
  for (Activation act : {Activation::Tanh, Activation::Sigmoid, Activation::Relu}) {
    objs.push_back(make_classifier_objective(tiny_dataset(23, 6, 3, 9), act, 5, 1));
  }
  for (const auto& obj : objs) {
    Rng rng(17);
    for (int k = 0; k < 100; ++k) {
      const Vector x = as_vector(random_uniform(rng, obj->dim(), 1, -1.5, 1.5));
      INFO(obj->describe());
      CHECK(rel_err(obj->gradient(x), taped_gradient(*obj, x)) <= 1e-8);
    }
  }
}

TEST_CASE("components add up to the objective") {
  const auto ls = make_separable_least_squares(5, 4, 0.5, 2.0, 21);
  const auto clf = make_classifier_objective(tiny_dataset(30, 4, 3, 22), Activation::Tanh, 7, 3);
  for (const Objective* obj : {static_cast<const Objective*>(ls.get()), static_cast<const Objective*>(clf.get())}) {
    Rng rng(23);
    const Vector x = as_vector(random_uniform(rng, obj->dim(), 1, -1.0, 1.0));
    double f = 0.0, w = 0.0;
    Vector g = Vector::Zero(obj->dim());
    for (std::size_t i = 0; i < obj->num_components(); ++i) {
      f += obj->component_value(i, x);
      g += obj->component_gradient(i, x);
      w += obj->component_weight(i);
    }
    CHECK(std::abs(f - obj->value(x)) <= 1e-10 * std::max(1.0, std::abs(f)));
    CHECK(rel_err(g, obj->gradient(x)) <= 1e-10);
    CHECK(w == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("declared smoothness holds on random pairs") {
  const std::vector<ObjectivePtr> objs = {make_quadratic(6, 10.0, 31),
                                          make_nonconvex_family(6, NonconvexKind::TrigPerturbedQuadratic, 32)};
  for (const auto& obj : objs) {
    Rng rng(33);
    int violations = 0;
    for (int k = 0; k < 10000; ++k) {
      const Vector x = as_vector(random_uniform(rng, obj->dim(), 1, -2.0, 2.0));
      const Vector y = as_vector(random_uniform(rng, obj->dim(), 1, -2.0, 2.0));
      if ((obj->gradient(x) - obj->gradient(y)).norm() > obj->beta() * (x - y).norm() * (1 + 1e-12)) ++violations;
    }
    CHECK(violations == 0);
  }
}

TEST_CASE("classifier at zero weights") {
  auto data = tiny_dataset(40, 8, 10, 41);
  const auto clf = make_classifier_objective(data, Activation::Tanh, 16, 2);
  const Vector zero = Vector::Zero(clf->dim());
  CHECK(clf->mean_loss(zero) == doctest::Approx(std::log(10.0)).epsilon(1e-14));
  for (std::size_t i = 0; i < clf->num_components(); ++i) {
    CHECK(clf->component_value(i, zero) == doctest::Approx(std::log(10.0)).epsilon(1e-14));
  }
}

TEST_CASE("cross-entropy vanishes with a large correct logit") {
  Matrix logits(1, 2);
  logits << 20.0, 0.0;
  Matrix y(1, 2);
  y << 1.0, 0.0;
  const double ce = kern::softmax_ce(logits, y)(0, 0);
  CHECK(ce <= 1e-8);
  CHECK(ce == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-12));

  // relu classifier on one image whose correct pre-activation is 20
  auto one = std::make_shared<Dataset>();
  one->images = Matrix::Ones(1, 1);
  one->labels = {0};
  one->num_labels = 2;
  const auto clf = make_classifier_objective(one, Activation::Relu, 1, 0);
  CHECK(clf->mean_loss(vec({20.0, 0.0, 0.0, 0.0})) <= 1e-8);
}

TEST_CASE("minibatch losses weighted by size reproduce the dataset loss") {
  auto data = tiny_dataset(53, 5, 4, 51);
  for (Activation act : {Activation::Tanh, Activation::Sigmoid, Activation::Relu}) {
    const auto clf = make_classifier_objective(data, act, 8, 52);
    Rng rng(53);
    const Vector x = as_vector(random_uniform(rng, clf->dim(), 1, -1.0, 1.0));
    const double oracle = oracle_mean_ce(*data, act, x);
    CHECK(clf->mean_loss(x) == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(clf->num_components() == 7);  // ceil(53 / 8)
    double weighted = 0.0;
    std::size_t rows = 0;
    for (std::size_t i = 0; i < clf->num_components(); ++i) {
      const std::size_t n_i = std::min<std::size_t>(8, 53 - rows);
      weighted += clf->component_value(i, x) * static_cast<double>(n_i) / 53.0;
      rows += n_i;
    }
    CHECK(weighted == doctest::Approx(oracle).epsilon(1e-10));
  }
}

TEST_CASE("relu classifiers are flagged non-smooth") {
  auto data = tiny_dataset(10, 3, 2, 61);
  CHECK(make_classifier_objective(data, Activation::Relu, 5, 0)->non_smooth());
  CHECK_FALSE(make_classifier_objective(data, Activation::Tanh, 5, 0)->non_smooth());
}

TEST_CASE("descriptors rebuild synthetic objectives") {
  const std::vector<ObjectivePtr> objs = {make_quadratic(4, 5.0, 71),
                                          make_nonconvex_family(3, NonconvexKind::Rosenbrock, 72),
                                          make_nonconvex_family(4, NonconvexKind::TrigPerturbedQuadratic, 73),
                                          make_separable_least_squares(3, 2, 0.5, 1.5, 74)};
  for (const auto& obj : objs) {
    const auto again = objective_from_descriptor(obj->describe());
    Rng rng(75);
    const Vector x = as_vector(random_uniform(rng, obj->dim(), 1, -1.0, 1.0));
    CHECK(again->value(x) == obj->value(x));
    CHECK(again->beta() == obj->beta());
  }
  CHECK_THROWS_AS(objective_from_descriptor("parabola d=2"), InvalidArgument);
}
