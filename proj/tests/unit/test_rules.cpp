#include "cl2o/data/results.hpp"
#include "cl2o/numcore/random.hpp"
#include "cl2o/rules/update_rules.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>

using namespace cl2o;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

std::shared_ptr<const QuadraticObjective> half_square() {
  return std::make_shared<const QuadraticObjective>(Matrix::Identity(1, 1), Vector::Zero(1));
}

// f = f_0 + f_1, f_i(x) = x^2 / 4
std::shared_ptr<const SeparableObjective> split_half_square() {
  auto quarter = std::make_shared<const QuadraticObjective>(Matrix::Constant(1, 1, 0.5), Vector::Zero(1));
  return std::make_shared<const SeparableObjective>(std::vector<ObjectivePtr>{quarter, quarter});
}

bool same_bits(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size() || std::memcmp(a[i].data(), b[i].data(), sizeof(double) * a[i].size()) != 0)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("gradient descent on x^2/2 halves the iterate") {
  const auto f = half_square();
  FullGradientRule rule;
  rule.eta = 0.5;
  const Trajectory tr = rollout(rule, *f, vec({1.0}), 200);
  REQUIRE(tr.x.size() == 201);
  for (std::size_t t = 0; t <= 60; ++t) CHECK(tr.x[t][0] == std::ldexp(1.0, -static_cast<int>(t)));
  CHECK(tr.grad_energy.back() == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  for (const Vector& v : tr.v) CHECK(v.isZero(0.0));
}

TEST_CASE("a critical point is a fixed point") {
  const auto q = make_quadratic(4, 5.0, 1);
  FullGradientRule rule;
  rule.eta = 0.9 / q->beta();
  const Trajectory tr = rollout(rule, *q, q->minimizer(), 20);
  // the minimizer is exact up to rounding, so the iterate may move by a few ulp
  for (const Vector& x : tr.x) CHECK((x - tr.x[0]).norm() <= 1e-14);
}

TEST_CASE("certificate check at binding") {
  const auto q = make_quadratic(3, 4.0, 2);
  FullGradientRule rule;
  rule.eta = 1.0 / q->beta();
  CHECK_THROWS_AS(rollout(rule, *q, Vector::Zero(3), 5), CertificateViolation);
  rule.eta = 0.0;
  CHECK_THROWS_AS(rollout(rule, *q, Vector::Zero(3), 5), InvalidArgument);
  rule.eta = 2.0 / q->beta();
  rule.unsafe = true;
  CHECK_NOTHROW(rollout(rule, *q, Vector::Zero(3), 5));
}

TEST_CASE("overstepping with the unsafe flag trips the divergence flag") {
  const auto q = make_quadratic(3, 4.0, 3);
  FullGradientRule rule;
  rule.eta = 2.5 / q->beta();
  rule.unsafe = true;
  const Trajectory tr = rollout(rule, *q, vec({1.0, 1.0, 1.0}), 10000);
  CHECK(tr.diverged);
  REQUIRE(tr.diverged_at.has_value());
  CHECK(tr.steps < 10000);
  CHECK(tr.x.size() == tr.steps + 1);
  for (const Vector& x : tr.x) CHECK(x.norm() <= kDivergenceThreshold);
}

TEST_CASE("cyclic index arithmetic") {
  auto quarter = std::make_shared<const QuadraticObjective>(Matrix::Constant(1, 1, 0.5), Vector::Zero(1));
  const SeparableObjective three({quarter, quarter, quarter});
  CyclicRule rule;
  rule.schedule = StepsizeSchedule(0.3);
  RolloutState state(rule, three, vec({1.0}));
  StepRecord rec;
  for (int t = 0; t <= 7; ++t) rec = step_cyclic(state);
  CHECK(rec.component == 1);
  CHECK(rec.eta == 0.3 / 3.0);
}

TEST_CASE("cyclic rule on f_0 + f_1 with x^2/4 components") {
  const auto f = split_half_square();
  CyclicRule rule;
  rule.schedule = StepsizeSchedule(0.5, 1.0);
  const Trajectory tr = rollout(rule, *f, vec({1.0}), 2);
  CHECK(tr.x[1][0] == 0.75);
  CHECK(tr.x[2][0] == 0.5625);
}

TEST_CASE("a single component gives diminishing-stepsize gradient descent") {
  const auto q = make_quadratic(3, 4.0, 4);
  const SeparableObjective one({q});
  CyclicRule rule;
  rule.schedule = StepsizeSchedule(0.2, 0.75);
  const Vector x0 = vec({0.3, -0.2, 0.5});
  const Trajectory tr = rollout(rule, one, x0, 50);
  Vector x = x0;
  for (std::size_t t = 0; t < 50; ++t) {
    x = x - rule.schedule.at(t) * q->gradient(x);
    CHECK(tr.x[t + 1] == x);
  }
}

TEST_CASE("cyclic rules need components") {
  CyclicRule rule;
  CHECK_THROWS_AS(rollout(rule, *half_square(), vec({1.0}), 3), InvalidArgument);
}

TEST_CASE("shortest rollout") {
  FullGradientRule rule;
  rule.eta = 0.5;
  const Trajectory tr = rollout(rule, *half_square(), vec({1.0}), 1);
  CHECK(tr.x.size() == 2);
  CHECK(tr.u.size() == 1);
  CHECK(tr.steps == 1);
  CHECK_THROWS_AS(rollout(rule, *half_square(), vec({1.0}), 0), InvalidArgument);
}

TEST_CASE("certified rollouts converge with a Cauchy tail") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto q = make_quadratic(10, 10.0, 100 + s);
    FullGradientRule rule;
    rule.eta = 0.9 / q->beta();
    Rng rng(s);
    const Trajectory tr = rollout(rule, *q, as_vector(random_uniform(rng, 10, 1, -1.0, 1.0)), 10000);
    CHECK_FALSE(tr.diverged);
    const double total = tr.grad_energy.back();
    const double tail = total - tr.grad_energy[9000];
    CHECK(tail <= 1e-8 * total);
  }
}

TEST_CASE("identical configurations give bit-identical trajectories") {
  const auto q = make_nonconvex_family(6, NonconvexKind::TrigPerturbedQuadratic, 7);
  InnovationConfig cfg;
  cfg.d = 6;
  auto learned = std::make_shared<const LearnedInnovation>(LearnedInnovation{cfg, init_innovation_params(cfg, 8)});
  FullGradientRule rule;
  rule.eta = 0.9 / q->beta();
  rule.innovation = InnovationSource::from(learned);
  const Vector x0 = Vector::Constant(6, 0.5);
  const Trajectory a = rollout(rule, *q, x0, 300);
  const Trajectory b = rollout(rule, *q, x0, 300);
  CHECK(same_bits(a.x, b.x));
  CHECK(same_bits(a.u, b.u));
  CHECK(serialize_trajectory(a) == serialize_trajectory(b));
}

TEST_CASE("recorded updates decompose into gradient and innovation") {
  const auto ls = make_separable_least_squares(5, 3, 0.5, 2.0, 9);
  InnovationConfig cfg;
  cfg.d = 5;
  auto learned = std::make_shared<const LearnedInnovation>(LearnedInnovation{cfg, init_innovation_params(cfg, 10, 1.0)});
  const Vector x0 = Vector::Constant(5, 0.2);

  FullGradientRule full;
  full.eta = 0.9 / ls->beta();
  full.innovation = InnovationSource::from(learned);
  const Trajectory a = rollout(full, *ls, x0, 100);
  for (std::size_t t = 0; t < a.steps; ++t) {
    const Vector expect = -full.eta * ls->gradient(a.x[t]) + a.v[t];
    CHECK((a.u[t] - expect).norm() <= 1e-14 * std::max(1.0, a.u[t].norm()));
    CHECK(a.x[t + 1] == a.x[t] + a.u[t]);
  }

  CyclicRule cyc;
  cyc.schedule = StepsizeSchedule(0.1);
  cyc.innovation = InnovationSource::from(learned);
  const Trajectory b = rollout(cyc, *ls, x0, 99);
  for (std::size_t t = 0; t < b.steps; ++t) {
    const double eta = cyc.schedule.at(t / 3);
    CHECK(b.eta[t] == eta);
    const Vector expect = -eta * (ls->component_gradient(t % 3, b.x[t]) + b.v[t]);
    CHECK((b.u[t] - expect).norm() <= 1e-14 * std::max(1.0, b.u[t].norm()));
    CHECK(b.v_norm[t] == doctest::Approx(eta * b.z_norm[t]).epsilon(1e-15));
    CHECK(b.x[t + 1] == b.x[t] + b.u[t]);
  }
  // energies are nondecreasing partial sums
  for (std::size_t t = 1; t < b.update_energy.size(); ++t) CHECK(b.update_energy[t] >= b.update_energy[t - 1]);
}

TEST_CASE("cyclic runs probe the full gradient once per epoch") {
  const auto ls = make_separable_least_squares(4, 3, 0.5, 2.0, 11);
  CyclicRule rule;
  rule.schedule = StepsizeSchedule(0.1);
  const Trajectory tr = rollout(rule, *ls, Vector::Ones(4), 30);
  REQUIRE(tr.probes.size() == 11);
  for (std::size_t k = 0; k < tr.probes.size(); ++k) {
    CHECK(tr.probes[k].t == 3 * k);
    CHECK(tr.probes[k].grad == ls->gradient(tr.x[3 * k]));
  }
  CHECK(tr.full_grad_norm(6).has_value());
  CHECK_FALSE(tr.full_grad_norm(7).has_value());
}

TEST_CASE("schedule energies") {
  const StepsizeSchedule s(0.1, 1.0);
  CHECK(schedule_energy(s, 2).sum == doctest::Approx(0.15).epsilon(1e-15));
  const double limit = 0.01 * std::numbers::pi * std::numbers::pi / 6.0;
  CHECK(std::abs(schedule_energy(s, 1000000).sum_sq - limit) <= 1e-7);
  CHECK_THROWS_AS(StepsizeSchedule(0.0), InvalidArgument);
  CHECK_THROWS_AS(StepsizeSchedule(0.1, 0.5), InvalidArgument);
  CHECK_THROWS_AS(StepsizeSchedule(0.1, 1.5), InvalidArgument);
  for (std::size_t e : {0u, 10u, 1000u}) CHECK(s.at(e) > 0.0);
}

TEST_CASE("trajectory export") {
  const auto ls = make_separable_least_squares(3, 2, 0.5, 2.0, 12);
  CyclicRule rule;
  rule.schedule = StepsizeSchedule(0.1);
  const Trajectory tr = rollout(rule, *ls, Vector::Ones(3), 4);
  const CsvTable csv = CsvTable::parse(trajectory_csv(tr));
  CHECK(csv.header() == std::vector<std::string>{"t", "grad_norm", "f", "u_norm", "v_norm", "flags"});
  REQUIRE(csv.rows().size() == 5);
  CHECK(csv.rows()[0][5] == "probe");
  CHECK(csv.rows()[1][5] == "partial");
  CHECK(csv.rows()[4][3].empty());

  const std::string bytes = serialize_trajectory(tr);
  CHECK(bytes.substr(0, 4) == "CL2O");
  const Trajectory back = deserialize_trajectory(bytes);
  CHECK(same_bits(back.x, tr.x));
  CHECK(back.probes.size() == tr.probes.size());
  CHECK(serialize_trajectory(back) == bytes);
  std::string bad = bytes;
  bad[1] = 'X';
  CHECK_THROWS(deserialize_trajectory(bad));
}
