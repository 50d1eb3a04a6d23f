#include "cl2o/numcore/autodiff.hpp"
#include "cl2o/numcore/ops.hpp"
#include "cl2o/numcore/param_vector.hpp"
#include "cl2o/numcore/program.hpp"
#include "support/random_program.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

using namespace cl2o;

namespace {

ParamVector point(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return ParamVector(flat_layout(v.size()), v);
}

Vector gradient_of(const Program& p, const ParamVector& at) { return reverse_gradient(evaluate_with_tape(p, at)).entries(); }

}  // namespace

TEST_CASE("identity and tanh(0) evaluate exactly") {
  CHECK(evaluate_with_tape([](const ad::Var& x) { return ops::sum(x); }, point({3.0})).value == 3.0);
  CHECK(evaluate_with_tape([](const ad::Var& x) { return ops::sum(ops::tanh(x)); }, point({0.0})).value == 0.0);
}

TEST_CASE("hand-differentiated programs") {
  SUBCASE("x^2 / 2 at 1") {
    const Program half_square = [](const ad::Var& x) { return ops::scale(ops::squared_norm(x), 0.5); };
    CHECK(gradient_of(half_square, point({1.0}))[0] == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("a * b at (2, 3)") {
    const Program prod = [](const ad::Var& x) {
      return ops::sum(ops::mul(ops::slice(x, 0, 1), ops::slice(x, 1, 1)));
    };
    const Vector g = gradient_of(prod, point({2.0, 3.0}));
    CHECK(g[0] == 3.0);
    CHECK(g[1] == 2.0);
  }
  SUBCASE("constant function") {
    const Program constant = [](const ad::Var& x) {
      return ops::add_scalar(ops::scale(ops::sum(x), 0.0), 4.0);
    };
    CHECK(gradient_of(constant, point({1.0, -2.0, 5.0})).isZero(0.0));
  }
  SUBCASE("sum of squares at (1, 2)") {
    const Vector g = gradient_of([](const ad::Var& x) { return ops::squared_norm(x); }, point({1.0, 2.0}));
    CHECK(g[0] == 2.0);
    CHECK(g[1] == 4.0);
  }
}

TEST_CASE("relu and step have zero derivative at the kink") {
  const Vector g = gradient_of([](const ad::Var& x) { return ops::sum(ops::relu(x)); }, point({0.0, 1.0, -1.0}));
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 1.0);
  CHECK(g[2] == 0.0);
}

TEST_CASE("finite-difference check on exact cases") {
  const Program quadratic = [](const ad::Var& x) {
    return ops::add(ops::scale(ops::squared_norm(x), 1.5), ops::sum(x));
  };
  CHECK(finite_difference_check(quadratic, testing::random_point(20, 3), 1e-5) <= 1e-6);

  const Program linear = [](const ad::Var& x) { return ops::scale(ops::sum(x), -2.5); };
  // Dyadic points and steps keep every difference exactly representable.
  const ParamVector at = point({1.0, -2.0, 0.5, 3.25, -0.75});
  for (double step : {std::ldexp(1.0, -20), std::ldexp(1.0, -10), 1.0, 8.0}) {
    CHECK(finite_difference_check(linear, at, step) <= 1e-12);
  }
}

TEST_CASE("three-layer perceptron loss in dimension 50") {
  // Parameters of a 5 -> 4 -> 3 -> 2 network with 10 sample rows.
  Rng rng(11);
  auto inputs = std::make_shared<const Matrix>(random_uniform(rng, 10, 5, 0.0, 1.0));
  Matrix y = Matrix::Zero(10, 2);
  for (Index i = 0; i < 10; ++i) y(i, i % 2) = 1.0;
  auto targets = std::make_shared<const Matrix>(y);
  const Program mlp = [inputs, targets](const ad::Var& p) {
    using namespace ops;
    const ad::Var W1 = reshape(slice(p, 0, 20), 4, 5);
    const ad::Var b1 = slice(p, 20, 4);
    const ad::Var W2 = reshape(slice(p, 24, 12), 3, 4);
    const ad::Var b2 = slice(p, 36, 3);
    const ad::Var W3 = reshape(slice(p, 39, 6), 2, 3);
    const ad::Var b3 = slice(p, 45, 2);
    const ad::Var w = slice(p, 47, 3);
    const ad::Var S = constant_like(p, inputs);
    const ad::Var h1 = tanh(add_row(matmul_nt(S, W1), b1));
    const ad::Var h2 = sigmoid(add_row(matmul_nt(h1, W2), b2));
    const ad::Var o = add_row(matmul_nt(h2, W3), b3);
    return add(softmax_ce(o, constant_like(p, targets)), squared_norm(w));
  };
  CHECK(finite_difference_check(mlp, testing::random_point(50, 12, -1.0, 1.0), 1e-5) <= 1e-5);
}

TEST_CASE("every primitive matches central differences at random points") {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto rp = testing::make_random_program(1 + static_cast<Index>(s % 12), 4, 1000 + s);
    const double err = finite_difference_check(rp.program, testing::random_point(rp.dim, 2000 + s), 1e-5);
    INFO("program " << s);
    CHECK(err <= 1e-6);
  }
}

TEST_CASE("tape replay is deterministic") {
  const auto rp = testing::make_random_program(8, 6, 77);
  const ParamVector x = testing::random_point(8, 78);
  const auto a = evaluate_with_tape(rp.program, x);
  const auto b = evaluate_with_tape(rp.program, x);
  CHECK(std::memcmp(&a.value, &b.value, sizeof(double)) == 0);
  const Vector ga = reverse_gradient(a).entries();
  const Vector gb = reverse_gradient(b).entries();
  CHECK(std::memcmp(ga.data(), gb.data(), sizeof(double) * ga.size()) == 0);
}

TEST_CASE("gradient is linear in the program") {
  const auto f = testing::make_random_program(6, 5, 91).program;
  const auto g = testing::make_random_program(6, 5, 92).program;
  const double alpha = 0.7, beta = -1.3;
  const Program combo = [&](const ad::Var& x) { return ops::add(ops::scale(f(x), alpha), ops::scale(g(x), beta)); };
  const ParamVector x = testing::random_point(6, 93);
  const Vector lhs = gradient_of(combo, x);
  const Vector rhs = alpha * gradient_of(f, x) + beta * gradient_of(g, x);
  CHECK((lhs - rhs).norm() <= 1e-12 * std::max(1.0, rhs.norm()));
}

TEST_CASE("non-finite values are reported with the primitive") {
  const Program bad = [](const ad::Var& x) { return ops::sum(ops::log(x)); };
  CHECK_THROWS_AS(evaluate_with_tape(bad, point({-1.0})), ad::NonFiniteError);
  try {
    evaluate_with_tape(bad, point({-1.0}));
  } catch (const ad::NonFiniteError& e) {
    CHECK(e.op() == ad::Op::Log);
  }
}

TEST_CASE("parameter layout segments are contiguous") {
  ParamLayout layout;
  CHECK(layout.add("W", 2, 3) == 0);
  CHECK(layout.add("b", 2) == 6);
  CHECK(layout.size() == 8);
  ParamVector p(layout);
  Matrix W(2, 3);
  W << 1, 2, 3, 4, 5, 6;
  p.set("W", W);
  CHECK(p.entries()[1] == 2.0);  // row-major
  CHECK(p.entries()[3] == 4.0);
  CHECK(p.get("W") == W);
  CHECK_THROWS_AS(layout.at("missing"), InvalidArgument);
}
