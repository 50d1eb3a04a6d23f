#include "cl2o/data/dataset.hpp"
#include "cl2o/numcore/random.hpp"
#include "cl2o/operators/checkpoint.hpp"
#include "cl2o/operators/innovation.hpp"

#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

using namespace cl2o;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

std::int64_t ulp_distance(double a, double b) {
  return std::abs(std::bit_cast<std::int64_t>(a) - std::bit_cast<std::int64_t>(b));
}

// One layer, one state, identity activation, zero bias; A_raw chosen so that
// A_eff = 0.95 a / (1 + a) = 0.5.
ParamVector scalar_linear(InnovationConfig& cfg) {
  cfg.d = 1;
  cfg.n = 1;
  cfg.r = 1;
  cfg.activation = StateActivation::Identity;
  ParamVector theta(innovation_layout(cfg));
  theta.set("z0.A", Matrix::Constant(1, 1, 0.5 / 0.45));
  theta.set("z0.B", Matrix::Ones(1, 1));
  theta.set("z.C", Matrix::Ones(1, 1));
  return theta;
}

}  // namespace

TEST_CASE("zero input from the zero state stays at zero") {
  InnovationConfig cfg;
  cfg.d = 4;
  const ParamVector theta = init_innovation_params(cfg, 3, 0.5);
  const Matrix th = theta.entries();
  const auto w = unpack_innovation<Matrix>(cfg, theta.layout(), th);
  auto state = zero_state<Matrix>(cfg, th);
  for (int t = 0; t < 5; ++t) CHECK(z_step<Matrix>(cfg, w, state, Matrix::Zero(4, 1)).isZero(0.0));
  CHECK_THROWS_AS(z_step<Matrix>(cfg, w, state, Matrix::Zero(3, 1)), InvalidArgument);
}

namespace {

// tail[t] = sum_{s >= t} e[s], accumulated backwards
std::vector<double> suffix_sums(const std::vector<double>& e) {
  std::vector<double> tail(e.size() + 1, 0.0);
  for (std::size_t t = e.size(); t-- > 0;) tail[t] = tail[t + 1] + e[t];
  return tail;
}

}  // namespace

TEST_CASE("scalar linear instance follows the geometric series") {
  InnovationConfig cfg;
  const ParamVector theta = scalar_linear(cfg);
  const auto e = impulse_energy(cfg, theta, vec({1.0}), 10000);
  for (std::size_t t = 0; t < 60; ++t) CHECK(std::sqrt(e[t]) == doctest::Approx(std::pow(0.5, double(t))).epsilon(1e-12));
  const auto tail = suffix_sums(e);
  CHECK(tail[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  for (std::size_t t = 0; t < 200; ++t) CHECK(tail[t] <= tail[0] * std::pow(0.95, 2.0 * double(t)));
}

TEST_CASE("impulse response energy has a geometric tail") {
  // Each stacked layer convolves with another geometric sequence, so the
  // envelope for r layers carries a (t + 1)^(2(r - 1)) factor. Once a state
  // is within an ulp of its bias, tanh(A h + b) - tanh(b) can settle on a
  // one-ulp fixed point, hence the 1e-24 relative floor.
  InnovationConfig cfg;
  cfg.d = 5;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const ParamVector theta = init_innovation_params(cfg, s, 1.0);
    Rng rng(s);
    const auto e = impulse_energy(cfg, theta, as_vector(random_normal(rng, 5, 1)), 10000);
    const auto tail = suffix_sums(e);
    REQUIRE(std::isfinite(tail[0]));
    REQUIRE(tail[0] > 0.0);
    for (std::size_t t = 0; t < e.size() && tail[t] > 0.0; ++t) {
      const double poly = std::pow(double(t + 1), 2.0 * double(cfg.r - 1));
      CHECK(tail[t] <= tail[0] * (std::pow(0.95, 2.0 * double(t)) * poly + 1e-24));
    }
    CHECK(tail[200] <= 1e-6 * tail[0]);
  }
}

TEST_CASE("contraction certificate for arbitrary raw matrices") {
  Rng rng(7);
  std::uniform_real_distribution<double> log_scale(-3.0, 3.0);
  for (int k = 0; k < 1000; ++k) {
    const Matrix raw = random_normal(rng, 3, 3, std::pow(10.0, log_scale(rng)));
    const Matrix eff = contract(raw, 0.95);
    CHECK(spectral_norm_estimate(eff, 200, k) <= 0.95);
    CHECK(eff.jacobiSvd().singularValues()(0) < 0.95);
  }
}

TEST_CASE("power iteration matches the singular value decomposition") {
  Rng rng(8);
  const Matrix m = random_normal(rng, 5, 4);
  CHECK(spectral_norm_estimate(m, 500) == doctest::Approx(m.jacobiSvd().singularValues()(0)).epsilon(1e-8));
}

TEST_CASE("full innovation keeps |z| and the direction of omega") {
  const Vector z = vec({2.0, 0.0});
  const Vector v = innovation_full(z, vec({3.0, 4.0}));
  CHECK(v[0] == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(1.6).epsilon(1e-15));
  CHECK(innovation_full(z, Vector::Zero(2)).isZero(0.0));
  CHECK(innovation_full(Vector::Zero(2), vec({3.0, 4.0})).isZero(0.0));
  CHECK(innovation_full(z, vec({1e-13, 0.0})).isZero(0.0));
}

TEST_CASE("batch innovation scales with the epoch stepsize") {
  const Vector z = vec({0.0, 2.0});
  const Vector v = innovation_batch(z, vec({3.0, 4.0}), 0.1);
  CHECK(v[0] == doctest::Approx(0.12).epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(0.16).epsilon(1e-15));
  CHECK(innovation_batch(z, Vector::Zero(2), 0.1).isZero(0.0));
  const Vector v2 = innovation_batch(z, vec({3.0, 4.0}), 0.2);
  CHECK(v2.norm() == 2.0 * v.norm());
  CHECK_THROWS_AS(innovation_batch(z, vec({3.0, 4.0}), 0.0), InvalidArgument);
}

TEST_CASE("innovation magnitudes within 4 ulp") {
  Rng rng(9);
  std::uniform_int_distribution<int> dim(1, 30);
  std::uniform_real_distribution<double> eta(1e-3, 1.0);
  std::int64_t worst = 0;
  for (int k = 0; k < 20000; ++k) {
    const Index d = dim(rng);
    const Vector z = as_vector(random_normal(rng, d, 1));
    const Vector w = as_vector(random_normal(rng, d, 1));
    const double e = eta(rng);
    worst = std::max(worst, ulp_distance(innovation_full(z, w).norm(), z.norm()));
    worst = std::max(worst, ulp_distance(innovation_batch(z, w, e).norm(), e * z.norm()));
  }
  CHECK(worst <= 4);
}

TEST_CASE("feature assembly") {
  const Vector x = vec({1.0, 2.0}), g = vec({3.0, 4.0});
  const Vector f0 = assemble_features(x, g, 5.0, Vector::Zero(2));
  CHECK(f0.size() == 3 * 2 + 1);
  CHECK(f0.segment(4, 2).isZero(0.0));
  CHECK(f0[6] == 5.0);
  CHECK(assemble_features(x, g, 5.0, vec({0.5, 0.5})) == assemble_features(x, g, 5.0, vec({0.5, 0.5})));
}

TEST_CASE("feature network output is finite") {
  InnovationConfig cfg;
  cfg.d = 6;
  const ParamVector theta = init_innovation_params(cfg, 11, 1.0);
  const Matrix th = theta.entries();
  const auto w = unpack_innovation<Matrix>(cfg, theta.layout(), th);
  Rng rng(12);
  for (double scale : {0.0, 1e-8, 1.0, 1e6}) {
    const Matrix feats = random_normal(rng, 3 * 6 + 1, 1, 1.0) * scale;
    const Matrix omega = feature_network(cfg, w, feats);
    CHECK(omega.rows() == 6);
    CHECK(omega.allFinite());
  }
}

TEST_CASE("checkpoint round trip and format errors") {
  Checkpoint ckpt;
  ckpt.config.d = 3;
  ckpt.config.input_scale = 2.5;
  ckpt.theta = init_innovation_params(ckpt.config, 13);
  ckpt.meta["rule.eta0"] = "0.25";
  const std::string bytes = serialize_checkpoint(ckpt);
  CHECK(bytes.substr(0, 4) == "CL2C");
  const Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(back.config == ckpt.config);
  CHECK(back.theta.entries() == ckpt.theta.entries());
  CHECK(back.theta.layout() == ckpt.theta.layout());
  CHECK(back.meta == ckpt.meta);
  CHECK(serialize_checkpoint(back) == bytes);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(bad), FormatError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), FormatError);
}
