#pragma once

#include "cl2o/numcore/ops.hpp"
#include "cl2o/numcore/param_vector.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cl2o {

enum class StateActivation { Tanh, Identity };

/// Shape of the learnable innovation source: a stacked contracting
/// recurrent operator Z (n states per layer, r layers) and a coordinatewise
/// feature network Omega with two hidden layers.
struct InnovationConfig {
  Index d = 1;
  Index n = 3;
  Index r = 3;
  double gamma = 0.95;
  Index hidden = 16;
  StateActivation activation = StateActivation::Tanh;
  /// Fixed gain applied to the impulse before it enters Z.
  double input_scale = 1.0;

  void validate() const;
  bool operator==(const InnovationConfig&) const = default;
};

/// Segments: z<k>.A (n x n), z<k>.B (n x in_k), z<k>.b (n), z.C (d x n),
/// omega.W1 (h x 4), omega.b1, omega.W2 (h x h), omega.b2, omega.w3 (1 x h),
/// omega.skip (1 x 4), omega.b3 (1).
ParamLayout innovation_layout(const InnovationConfig& cfg);

/// Random parameters: entries N(0, scale) except C, whose entries use
/// scale / sqrt(d) so |z| does not grow with the problem dimension.
ParamVector init_innovation_params(const InnovationConfig& cfg, std::uint64_t seed, double scale = 0.1);

/// gamma * A_raw / (1 + ||A_raw||_F); spectral norm < gamma for every A_raw.
template <ops::Value V>
V contract(const V& a_raw, double gamma) {
  const V denom = ops::add_scalar(ops::norm(a_raw), 1.0);
  return ops::div_scalar(ops::scale(a_raw, gamma), denom);
}

/// Parameters unpacked from a flat theta, on either backend.
template <ops::Value V>
struct InnovationWeights {
  struct Layer {
    V A;       // contracted
    V B;
    V b;
    V act_b;   // activation(b), subtracted so that 0 is a fixed point
  };
  std::vector<Layer> layers;
  V C;
  V W1, b1, W2, b2, w3, skip, b3;
};

template <ops::Value V>
InnovationWeights<V> unpack_innovation(const InnovationConfig& cfg, const ParamLayout& layout, const V& theta);

/// Per-layer hidden states, zero at t = 0.
template <ops::Value V>
struct RecurrentState {
  std::vector<V> h;
};

template <ops::Value V>
RecurrentState<V> zero_state(const InnovationConfig& cfg, const V& like);

/// One recurrent update through all layers:
///   h_k' = act(A_k h_k + B_k in_k + b_k) - act(b_k),  in_0 = input, in_k = h_{k-1}',
///   z = C h_{r-1}'.
template <ops::Value V>
V z_step(const InnovationConfig& cfg, const InnovationWeights<V>& w, RecurrentState<V>& state, const V& input);

/// [x; g; u_prev; f], length 3d + 1. A missing previous update is zero.
template <ops::Value V>
V assemble_features(const V& x, const V& g, const V& f, const V& u_prev);

/// Omega: the feature vector is split per coordinate into (x_i, g_i, u_i, f),
/// each block RMS-normalized (f through tanh), then
///   omega_i = w3 . tanh(W2 tanh(W1 F_i + b1) + b2) + skip . F_i + b3.
template <ops::Value V>
V feature_network(const InnovationConfig& cfg, const InnovationWeights<V>& w, const V& features);

inline constexpr double kDegenerateDirection = 1e-12;

/// v = |z| omega / |omega|; zero when |omega| <= 1e-12.
template <ops::Value V>
V innovation_full(const V& z, const V& omega);

/// v = eta |z| omega / |omega|; zero when |omega| <= 1e-12.
template <ops::Value V>
V innovation_batch(const V& z, const V& omega, double eta);

// Plain-vector conveniences.
Vector innovation_full(const Vector& z, const Vector& omega);
Vector innovation_batch(const Vector& z, const Vector& omega, double eta);
Vector assemble_features(const Vector& x, const Vector& g, double f, const Vector& u_prev);

/// Largest singular value by power iteration on M^T M.
double spectral_norm_estimate(const Matrix& m, int iterations = 200, std::uint64_t seed = 0);

/// Impulse response of Z: |z_t|^2 for t = 0..steps-1 given x0 at t = 0.
std::vector<double> impulse_energy(const InnovationConfig& cfg, const ParamVector& theta, const Vector& x0,
                                   std::size_t steps);

// ---- template definitions ----

template <ops::Value V>
InnovationWeights<V> unpack_innovation(const InnovationConfig& cfg, const ParamLayout& layout, const V& theta) {
  auto seg = [&](const std::string& name) {
    const Segment& s = layout.at(name);
    return ops::reshape(ops::slice(theta, s.offset, s.size()), s.rows, s.cols);
  };
  auto act = [&](const V& a) {
    return cfg.activation == StateActivation::Tanh ? ops::tanh(a) : a;
  };
  InnovationWeights<V> w;
  for (Index k = 0; k < cfg.r; ++k) {
    const std::string p = "z" + std::to_string(k) + ".";
    typename InnovationWeights<V>::Layer layer;
    layer.A = contract(seg(p + "A"), cfg.gamma);
    layer.B = seg(p + "B");
    layer.b = seg(p + "b");
    layer.act_b = act(layer.b);
    w.layers.push_back(std::move(layer));
  }
  w.C = seg("z.C");
  w.W1 = seg("omega.W1");
  w.b1 = seg("omega.b1");
  w.W2 = seg("omega.W2");
  w.b2 = seg("omega.b2");
  w.w3 = seg("omega.w3");
  w.skip = seg("omega.skip");
  w.b3 = seg("omega.b3");
  return w;
}

template <ops::Value V>
RecurrentState<V> zero_state(const InnovationConfig& cfg, const V& like) {
  RecurrentState<V> s;
  for (Index k = 0; k < cfg.r; ++k) s.h.push_back(ops::constant_like(like, Matrix::Zero(cfg.n, 1)));
  return s;
}

template <ops::Value V>
V z_step(const InnovationConfig& cfg, const InnovationWeights<V>& w, RecurrentState<V>& state, const V& input) {
  if (ops::value(input).rows() != cfg.d || ops::value(input).cols() != 1) {
    throw InvalidArgument("z_step: input must be a column of length " + std::to_string(cfg.d));
  }
  if (static_cast<Index>(state.h.size()) != cfg.r) throw InvalidArgument("z_step: state depth mismatch");
  V in = ops::scale(input, cfg.input_scale);
  for (Index k = 0; k < cfg.r; ++k) {
    const auto& L = w.layers[static_cast<std::size_t>(k)];
    V pre = ops::add(ops::add(ops::matmul(L.A, state.h[k]), ops::matmul(L.B, in)), L.b);
    if (cfg.activation == StateActivation::Tanh) pre = ops::tanh(pre);
    state.h[k] = ops::sub(pre, L.act_b);
    in = state.h[k];
  }
  return ops::matmul(w.C, in);
}

template <ops::Value V>
V assemble_features(const V& x, const V& g, const V& f, const V& u_prev) {
  return ops::vcat(ops::vcat(ops::vcat(x, g), u_prev), f);
}

namespace detail {
// a / rms(a), with a small floor inside the norm so zero blocks stay zero
template <ops::Value V>
V rms_normalize(const V& a) {
  const Index d = ops::value(a).rows();
  const V floor = ops::constant_like(a, Matrix::Constant(1, 1, 1e-8));
  const V r = ops::scale(ops::norm(ops::vcat(a, floor)), 1.0 / std::sqrt(static_cast<double>(d)));
  return ops::div_scalar(a, r);
}
}  // namespace detail

template <ops::Value V>
V feature_network(const InnovationConfig& cfg, const InnovationWeights<V>& w, const V& features) {
  const Index d = cfg.d;
  if (ops::value(features).rows() != 3 * d + 1) {
    throw InvalidArgument("feature_network: expected " + std::to_string(3 * d + 1) + " features");
  }
  const V x = detail::rms_normalize(ops::slice(features, 0, d));
  const V g = detail::rms_normalize(ops::slice(features, d, d));
  const V u = detail::rms_normalize(ops::slice(features, 2 * d, d));
  const V f = ops::broadcast(ops::tanh(ops::slice(features, 3 * d, 1)), d, 1);
  const V F = ops::hcat(ops::hcat(ops::hcat(x, g), u), f);  // d x 4
  const V h1 = ops::tanh(ops::add_row(ops::matmul_nt(F, w.W1), w.b1));
  const V h2 = ops::tanh(ops::add_row(ops::matmul_nt(h1, w.W2), w.b2));
  const V out = ops::add(ops::matmul_nt(h2, w.w3), ops::matmul_nt(F, w.skip));
  return ops::add_row(out, w.b3);
}

template <ops::Value V>
V innovation_full(const V& z, const V& omega) {
  if (ops::value(z).rows() != ops::value(omega).rows()) throw InvalidArgument("innovation: dimension mismatch");
  const V w_norm = ops::norm(omega);
  if (ops::scalar(w_norm) <= kDegenerateDirection) {
    return ops::constant_like(z, Matrix::Zero(ops::value(z).rows(), 1));
  }
  return ops::mul_scalar(ops::div_scalar(omega, w_norm), ops::norm(z));
}

template <ops::Value V>
V innovation_batch(const V& z, const V& omega, double eta) {
  if (!(eta > 0.0)) throw InvalidArgument("innovation_batch: eta must be positive");
  if (ops::value(z).rows() != ops::value(omega).rows()) throw InvalidArgument("innovation: dimension mismatch");
  const V w_norm = ops::norm(omega);
  if (ops::scalar(w_norm) <= kDegenerateDirection) {
    return ops::constant_like(z, Matrix::Zero(ops::value(z).rows(), 1));
  }
  return ops::mul_scalar(ops::div_scalar(omega, w_norm), ops::scale(ops::norm(z), eta));
}

}  // namespace cl2o
