#include "cl2o/operators/innovation.hpp"

#include "cl2o/numcore/random.hpp"

#include <cmath>

namespace cl2o {

void InnovationConfig::validate() const {
  if (d < 1) throw InvalidArgument("innovation: d must be >= 1");
  if (n < 1 || r < 1) throw InvalidArgument("innovation: state dimension and depth must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("innovation: gamma must lie in (0, 1)");
  if (hidden < 1) throw InvalidArgument("innovation: hidden width must be >= 1");
  if (!(input_scale > 0.0) || !std::isfinite(input_scale)) {
    throw InvalidArgument("innovation: input_scale must be positive and finite");
  }
}

ParamLayout innovation_layout(const InnovationConfig& cfg) {
  cfg.validate();
  ParamLayout layout;
  for (Index k = 0; k < cfg.r; ++k) {
    const std::string p = "z" + std::to_string(k) + ".";
    layout.add(p + "A", cfg.n, cfg.n);
    layout.add(p + "B", cfg.n, k == 0 ? cfg.d : cfg.n);
    layout.add(p + "b", cfg.n, 1);
  }
  layout.add("z.C", cfg.d, cfg.n);
  layout.add("omega.W1", cfg.hidden, 4);
  layout.add("omega.b1", cfg.hidden, 1);
  layout.add("omega.W2", cfg.hidden, cfg.hidden);
  layout.add("omega.b2", cfg.hidden, 1);
  layout.add("omega.w3", 1, cfg.hidden);
  layout.add("omega.skip", 1, 4);
  layout.add("omega.b3", 1, 1);
  return layout;
}

ParamVector init_innovation_params(const InnovationConfig& cfg, std::uint64_t seed, double scale) {
  if (!(scale >= 0.0)) throw InvalidArgument("init_innovation_params: scale must be >= 0");
  ParamVector theta(innovation_layout(cfg));
  Rng rng(derive_seed(seed, 0x1a17));
  for (const Segment& s : theta.layout().segments()) {
    const double sd = s.name == "z.C" ? scale / std::sqrt(static_cast<double>(cfg.d)) : scale;
    theta.set(s.name, random_normal(rng, s.rows, s.cols, sd));
  }
  return theta;
}

Vector innovation_full(const Vector& z, const Vector& omega) {
  return as_vector(innovation_full<Matrix>(z, omega));
}

Vector innovation_batch(const Vector& z, const Vector& omega, double eta) {
  return as_vector(innovation_batch<Matrix>(z, omega, eta));
}

Vector assemble_features(const Vector& x, const Vector& g, double f, const Vector& u_prev) {
  if (g.size() != x.size() || u_prev.size() != x.size()) {
    throw InvalidArgument("assemble_features: dimension mismatch");
  }
  return as_vector(assemble_features<Matrix>(x, g, Matrix::Constant(1, 1, f), u_prev));
}

double spectral_norm_estimate(const Matrix& m, int iterations, std::uint64_t seed) {
  if (m.size() == 0) return 0.0;
  Rng rng(derive_seed(seed, 0x5bec));
  Vector v = as_vector(random_normal(rng, m.cols(), 1));
  double sigma = 0.0;
  for (int i = 0; i < iterations; ++i) {
    const double nv = v.norm();
    if (nv == 0.0) return 0.0;
    v /= nv;
    const Vector mv = m * v;
    sigma = mv.norm();
    v = m.transpose() * mv;
  }
  return sigma;
}

std::vector<double> impulse_energy(const InnovationConfig& cfg, const ParamVector& theta, const Vector& x0,
                                   std::size_t steps) {
  if (x0.size() != cfg.d) throw InvalidArgument("impulse_energy: x0 dimension mismatch");
  const Matrix th = theta.entries();
  const auto w = unpack_innovation<Matrix>(cfg, theta.layout(), th);
  auto state = zero_state<Matrix>(cfg, th);
  std::vector<double> out;
  out.reserve(steps);
  const Matrix zero = Matrix::Zero(cfg.d, 1);
  for (std::size_t t = 0; t < steps; ++t) {
    const Matrix z = z_step<Matrix>(cfg, w, state, t == 0 ? Matrix(x0) : zero);
    out.push_back(z.squaredNorm());
  }
  return out;
}

}  // namespace cl2o
