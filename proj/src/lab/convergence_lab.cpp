#include "cl2o/lab/convergence_lab.hpp"

#include "cl2o/numcore/random.hpp"

#include <algorithm>
#include <cmath>

namespace cl2o {

namespace {

double tail_sum(const std::vector<double>& terms, double fraction) {
  if (terms.empty()) return 0.0;
  const auto n = terms.size();
  const auto start = static_cast<std::size_t>(std::floor((1.0 - fraction) * static_cast<double>(n)));
  double s = 0.0;
  for (std::size_t i = std::min(start, n - 1); i < n; ++i) s += terms[i];
  return s;
}

// Least-squares line y ~ a + b x.
std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  if (x.empty()) return {0.0, 0.0};
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double b = sxx > 0.0 ? sxy / sxx : 0.0;
  return {my - b * mx, b};
}

}  // namespace

KeyValues ConvergenceReport::summary() const {
  KeyValues kv;
  kv.set("records", static_cast<double>(grad_energy.size()));
  kv.set("grad_energy_total", grad_total);
  kv.set("update_energy_total", update_total);
  kv.set("grad_tail_ratio", grad_tail_ratio());
  kv.set("update_tail_ratio", update_tail_ratio());
  kv.set("tail_fraction", tail_fraction);
  kv.set("tail_tolerance", tail_tolerance);
  kv.set("square_summable", square_summable ? "true" : "false");
  kv.set("diverged", diverged ? "true" : "false");
  return kv;
}

CsvTable ConvergenceReport::csv() const {
  CsvTable t({"t", "grad_energy", "update_energy"});
  for (std::size_t i = 0; i < grad_energy.size(); ++i) {
    const std::size_t ti = grad_times[i];
    t.add_row({std::to_string(ti), CsvTable::cell(grad_energy[i]),
               ti < update_energy.size() ? CsvTable::cell(update_energy[ti]) : std::string()});
  }
  return t;
}

ConvergenceReport square_sum_diagnostics(const Trajectory& traj, double tail_fraction, double tail_tolerance) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) throw InvalidArgument("tail fraction must lie in (0, 1]");
  ConvergenceReport rep;
  rep.tail_fraction = tail_fraction;
  rep.tail_tolerance = tail_tolerance;
  rep.diverged = traj.diverged;
  std::vector<double> g_terms;
  if (traj.kind == RuleKind::Full) {
    for (std::size_t t = 0; t < traj.grad_norm.size(); ++t) {
      g_terms.push_back(traj.grad_norm[t] * traj.grad_norm[t]);
      rep.grad_times.push_back(t);
    }
  } else {
    if (traj.probes.empty()) throw InvalidArgument("square_sum_diagnostics: cyclic run without full-gradient probes");
    for (const auto& p : traj.probes) {
      g_terms.push_back(p.grad.squaredNorm());
      rep.grad_times.push_back(p.t);
    }
  }
  std::vector<double> u_terms;
  for (double un : traj.u_norm) u_terms.push_back(un * un);
  double acc = 0.0;
  for (double g : g_terms) rep.grad_energy.push_back(acc += g);
  acc = 0.0;
  for (double u : u_terms) rep.update_energy.push_back(acc += u);
  rep.grad_total = rep.grad_energy.empty() ? 0.0 : rep.grad_energy.back();
  rep.update_total = rep.update_energy.empty() ? 0.0 : rep.update_energy.back();
  rep.grad_tail = tail_sum(g_terms, tail_fraction);
  rep.update_tail = tail_sum(u_terms, tail_fraction);
  rep.square_summable = !traj.diverged && rep.grad_tail <= tail_tolerance * rep.grad_total &&
                        rep.update_tail <= tail_tolerance * rep.update_total;
  return rep;
}

KeyValues DescentReport::summary() const {
  KeyValues kv;
  kv.set("eps", eps);
  kv.set("eps_threshold", threshold);
  kv.set("rho", rho);
  kv.set("lhs", lhs);
  kv.set("rhs", rhs);
  kv.set("f0", f0);
  kv.set("f_min", f_min);
  kv.set("f_min_kind", surrogate ? "surrogate" : "declared");
  kv.set("v_energy", v_energy);
  kv.set("holds", holds ? "true" : "false");
  return kv;
}

DescentReport descent_monitor(const Trajectory& traj, double beta, double eta, std::optional<double> eps,
                            std::optional<double> lower_bound) {
  if (!(beta > 0.0) || !(eta > 0.0) || !(eta * beta < 1.0)) {
    throw InvalidArgument("descent_monitor: requires 0 < eta < 1/beta");
  }
  if (traj.kind != RuleKind::Full) throw InvalidArgument("descent_monitor: needs a full-gradient trajectory");
  if (traj.v_norm.size() != traj.steps || traj.grad_norm.size() < traj.steps) {
    throw InvalidArgument("descent_monitor: trajectory lacks innovation or gradient records");
  }
  DescentReport rep;
  const double c = 1.0 - beta * eta;
  rep.threshold = 1.0 / (2.0 * eta * c);
  rep.eps = eps.value_or(2.0 * rep.threshold);
  if (!(rep.eps > rep.threshold)) {
    throw InvalidArgument("descent_monitor: eps must exceed 1/(2 eta (1 - beta eta)) = " +
                          format_double(rep.threshold));
  }
  rep.rho = 2.0 * eta * rep.eps * c - 1.0;
  const std::size_t T = traj.steps;
  for (std::size_t t = 0; t < T; ++t) {
    rep.lhs += traj.grad_norm[t] * traj.grad_norm[t];
    rep.v_energy += traj.v_norm[t] * traj.v_norm[t];
  }
  rep.f0 = traj.f.front();
  if (lower_bound) {
    rep.f_min = *lower_bound;
  } else {
    rep.f_min = *std::min_element(traj.f.begin(), traj.f.end());
    rep.surrogate = true;
  }
  rep.rhs = (2.0 * rep.eps / rep.rho) * (rep.f0 - rep.f_min) +
            (rep.eps / rep.rho) * (rep.eps + 2.0 * beta) * rep.v_energy;
  rep.holds = rep.lhs <= rep.rhs;
  return rep;
}

ScriptedInnovation ReconstructedInnovation::as_scripted() const {
  auto seq = std::make_shared<const std::vector<Vector>>(V);
  return [seq](std::size_t t, const Vector& x, const Vector&) -> Vector {
    if (t >= seq->size()) return Vector::Zero(x.size());
    return (*seq)[t];
  };
}

double ReconstructedInnovation::energy() const {
  double e = 0.0;
  for (const Vector& v : V) e += v.squaredNorm();
  return e;
}

ReconstructedInnovation reconstruct_innovation(const Trajectory& source, double eta) {
  if (source.kind != RuleKind::Full) {
    throw InvalidArgument("reconstruct_innovation: needs full-gradient records (cyclic runs carry partial gradients)");
  }
  if (source.x.empty() || source.u.size() != source.steps || source.g.size() < source.steps) {
    throw InvalidArgument("reconstruct_innovation: source trajectory lacks state, update or gradient records");
  }
  ReconstructedInnovation rec;
  rec.eta = eta;
  rec.x0 = source.x.front();
  rec.V.reserve(source.steps);
  for (std::size_t t = 0; t < source.steps; ++t) rec.V.push_back(eta * source.g[t] + source.u[t]);
  return rec;
}

EquivalenceReport equivalence_test(const Trajectory& source, const ReconstructedInnovation& V, const Objective& obj,
                                   double eta, double tol) {
  if (source.x.size() != source.steps + 1) throw InvalidArgument("equivalence_test: source states not recorded");
  if (V.V.size() != source.steps) throw InvalidArgument("equivalence_test: innovation length mismatch");
  FullGradientRule rule;
  rule.eta = eta;
  rule.unsafe = true;  // replay harness, not a certified run
  rule.innovation = InnovationSource::from(V.as_scripted());
  RecordOptions rec;
  rec.updates = rec.gradients = false;
  const Trajectory replay = rollout(rule, obj, V.x0, source.steps, rec);
  EquivalenceReport rep;
  const std::size_t n = std::min(replay.x.size(), source.x.size());
  for (std::size_t t = 0; t < n; ++t) {
    const double dev = (replay.x[t] - source.x[t]).norm();
    rep.deviation.push_back(dev);
    rep.max_deviation = std::max(rep.max_deviation, dev);
    if (!rep.first_violation && !(dev <= tol)) rep.first_violation = t;
  }
  if (replay.x.size() != source.x.size()) {
    rep.max_deviation = std::numeric_limits<double>::infinity();
    if (!rep.first_violation) rep.first_violation = n;
  }
  rep.equivalent = !rep.first_violation;
  return rep;
}

AssumptionFit gradient_growth_probe(const Objective& obj, const Box& box, std::size_t samples,
                                        std::uint64_t seed) {
  const std::size_t m = obj.num_components();
  if (m == 0) throw InvalidArgument("gradient_growth_probe: objective has no components");
  if (samples < 2) throw InvalidArgument("gradient_growth_probe: need at least two samples");
  if (box.lower.size() != obj.dim() || box.upper.size() != obj.dim()) {
    throw InvalidArgument("gradient_growth_probe: box dimension mismatch");
  }
  Rng rng(derive_seed(seed, 0x7e02));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> xs, ys;
  for (std::size_t s = 0; s < samples; ++s) {
    Vector x(obj.dim());
    for (Index i = 0; i < x.size(); ++i) x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * unit(rng);
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) worst = std::max(worst, obj.component_gradient(i, x).norm());
    xs.push_back(obj.gradient(x).norm());
    ys.push_back(worst);
  }
  AssumptionFit fit;
  std::tie(fit.A, fit.B) = fit_line(xs, ys);
  for (std::size_t s = 0; s < xs.size(); ++s) {
    fit.max_residual = std::max(fit.max_residual, std::abs(ys[s] - (fit.A + fit.B * xs[s])));
  }
  fit.samples = samples;
  return fit;
}

InnovationBoundReport innovation_bound_compliance(const Trajectory& traj) {
  InnovationBoundReport rep;
  for (double z : traj.z_norm) rep.C = std::max(rep.C, z);
  for (std::size_t t = 0; t < traj.v_norm.size(); ++t) {
    const double bound = traj.eta[t] * (rep.C + 1e-12);
    if (traj.v_norm[t] > bound) ++rep.violations;
    if (traj.eta[t] * rep.C > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, traj.v_norm[t] / (traj.eta[t] * rep.C));
  }
  rep.compliant = rep.violations == 0;
  return rep;
}

MStepReport mstep_recursion_residual(const Trajectory& traj, const Objective& obj) {
  if (traj.kind != RuleKind::Cyclic) throw InvalidArgument("mstep_recursion_residual: needs a cyclic trajectory");
  const std::size_t M = traj.components;
  if (M == 0 || traj.u.size() != traj.steps) {
    throw InvalidArgument("mstep_recursion_residual: trajectory lacks update records");
  }
  MStepReport rep;
  for (std::size_t e = 0; (e + 1) * M <= traj.steps; ++e) {
    const std::size_t t = e * M;
    Vector grad;
    for (const auto& p : traj.probes) {
      if (p.t == t) grad = p.grad;
    }
    if (grad.size() == 0) {
      if (traj.x.size() <= t) throw InvalidArgument("mstep_recursion_residual: no probe or state at epoch start");
      grad = obj.gradient(traj.x[t]);
    }
    const double eta = traj.eta[t];
    Vector sum_u = traj.u[t];
    for (std::size_t i = 1; i < M; ++i) sum_u += traj.u[t + i];
    Vector r = sum_u + eta * grad;
    rep.residual_norm.push_back(r.norm());
    rep.scaled.push_back(r.norm() / eta);
    rep.grad_norm.push_back(grad.norm());
    rep.max_scaled = std::max(rep.max_scaled, r.norm() / eta);
    rep.residual.push_back(std::move(r));
  }
  std::tie(rep.envelope_a, rep.envelope_b) = fit_line(rep.grad_norm, rep.scaled);
  return rep;
}

}  // namespace cl2o
