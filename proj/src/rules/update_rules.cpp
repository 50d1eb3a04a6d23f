#include "cl2o/rules/update_rules.hpp"

#include "cl2o/data/binary_io.hpp"
#include "cl2o/data/results.hpp"

#include <sstream>

namespace cl2o {

StepsizeSchedule::StepsizeSchedule(double eta0, double p) : eta0_(eta0), p_(p) {
  if (!(eta0 > 0.0) || !std::isfinite(eta0)) throw InvalidArgument("stepsize schedule: eta0 must be > 0");
  if (!(p > 0.5 && p <= 1.0)) throw InvalidArgument("stepsize schedule: exponent p must lie in (0.5, 1]");
}

double StepsizeSchedule::at(std::size_t epoch) const {
  const double e1 = static_cast<double>(epoch) + 1.0;
  return p_ == 1.0 ? eta0_ / e1 : eta0_ / std::pow(e1, p_);
}

ScheduleEnergy schedule_energy(const StepsizeSchedule& schedule, std::size_t horizon) {
  if (horizon < 1) throw InvalidArgument("schedule_energy: horizon must be >= 1");
  // Neumaier summation
  double s = 0.0, cs = 0.0, q = 0.0, cq = 0.0;
  auto add = [](double& sum, double& comp, double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  };
  for (std::size_t e = 0; e < horizon; ++e) {
    const double eta = schedule.at(e);
    add(s, cs, eta);
    add(q, cq, eta * eta);
  }
  return {q + cq, s + cs};
}

void check_binding(const FullGradientRule& rule, const Objective& obj) {
  if (!(rule.eta > 0.0) || !std::isfinite(rule.eta)) throw InvalidArgument("full-gradient rule: eta must be > 0");
  if (rule.innovation.learned && rule.innovation.learned->config.d != obj.dim()) {
    throw InvalidArgument("full-gradient rule: innovation dimension does not match the objective");
  }
  if (rule.unsafe) return;
  if (obj.non_smooth()) {
    throw CertificateViolation("objective '" + obj.describe() +
                               "' has a non-Lipschitz gradient; no convergence certificate (use the unsafe flag)");
  }
  const Smoothness& s = obj.smoothness();
  if (s.kind == BetaKind::Empirical && s.beta <= 0.0) {
    throw CertificateViolation("smoothness constant of '" + obj.describe() + "' is unknown; estimate it first");
  }
  if (s.beta > 0.0 && rule.eta * s.beta >= 1.0) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "stepsize eta=" << rule.eta << " violates eta < 1/beta = " << 1.0 / s.beta
        << " (beta=" << s.beta << "); refusing without the unsafe flag";
    throw CertificateViolation(msg.str());
  }
}

void check_binding(const CyclicRule& rule, const Objective& obj) {
  if (obj.num_components() == 0) {
    throw InvalidArgument("cyclic rule: objective '" + obj.describe() + "' has no separable components");
  }
  if (rule.innovation.learned && rule.innovation.learned->config.d != obj.dim()) {
    throw InvalidArgument("cyclic rule: innovation dimension does not match the objective");
  }
}

std::optional<double> Trajectory::full_grad_norm(std::size_t t) const {
  if (kind == RuleKind::Full) {
    if (t < grad_norm.size()) return grad_norm[t];
    return std::nullopt;
  }
  for (const Probe& p : probes) {
    if (p.t == t) return p.grad.norm();
  }
  return std::nullopt;
}

RolloutState::RolloutState(const FullGradientRule& rule, const Objective& obj, const Vector& x0)
    : learned_(rule.innovation.learned), scripted_(rule.innovation.scripted) {
  check_binding(rule, obj);
  if (learned_) weights_ = unpack_innovation<Matrix>(learned_->config, learned_->theta.layout(),
                                                     Matrix(learned_->theta.entries()));
  stepper_ = std::make_unique<Stepper<Matrix>>(RuleKind::Full, rule.eta, std::nullopt, obj,
                                               learned_ ? &learned_->config : nullptr,
                                               weights_ ? &*weights_ : nullptr, &scripted_, Matrix(x0));
}

RolloutState::RolloutState(const CyclicRule& rule, const Objective& obj, const Vector& x0)
    : learned_(rule.innovation.learned), scripted_(rule.innovation.scripted) {
  check_binding(rule, obj);
  if (learned_) weights_ = unpack_innovation<Matrix>(learned_->config, learned_->theta.layout(),
                                                     Matrix(learned_->theta.entries()));
  stepper_ = std::make_unique<Stepper<Matrix>>(RuleKind::Cyclic, 0.0, rule.schedule, obj,
                                               learned_ ? &learned_->config : nullptr,
                                               weights_ ? &*weights_ : nullptr, &scripted_, Matrix(x0));
}

namespace {

StepRecord do_step(RolloutState& state) {
  auto& s = state.stepper();
  const StepEval<Matrix> e = s.evaluate();
  const StepResult<Matrix> r = s.advance(e);
  StepRecord rec;
  rec.g = as_vector(e.g);
  rec.f = e.f(0, 0);
  rec.u = as_vector(r.u);
  rec.v = as_vector(r.v);
  rec.eta = e.eta;
  rec.component = e.component;
  rec.z_norm = r.z_norm;
  return rec;
}

bool healthy(const Matrix& x) { return x.allFinite() && x.norm() <= kDivergenceThreshold; }

class StepperLoop final : public ClosedLoop {
 public:
  explicit StepperLoop(Stepper<Matrix>& s) : s_(s) {}
  const Matrix& x() const override { return s_.x(); }
  StepEval<Matrix> evaluate() const override { return s_.evaluate(); }
  StepResult<Matrix> advance(const StepEval<Matrix>& e) override { return s_.advance(e); }

 private:
  Stepper<Matrix>& s_;
};

}  // namespace

Trajectory drive(ClosedLoop& s, RuleKind kind, const Objective& obj, std::size_t steps, const RecordOptions& rec) {
  if (steps < 1) throw InvalidArgument("rollout: horizon must be >= 1");
  Trajectory tr;
  tr.kind = kind;
  tr.objective = obj.describe();
  tr.dim = obj.dim();
  tr.components = kind == RuleKind::Cyclic ? obj.num_components() : 0;
  const std::size_t probe_every =
      kind == RuleKind::Cyclic ? (rec.probe_every == 0 ? tr.components : rec.probe_every) : 0;

  if (!healthy(s.x())) throw InvalidArgument("rollout: x0 must be finite");
  double g_energy = 0.0;
  double u_energy = 0.0;
  for (std::size_t t = 0;; ++t) {
    const StepEval<Matrix> e = s.evaluate();
    const double f = e.f(0, 0);
    const double gn = e.g.norm();
    if (!std::isfinite(f) || !std::isfinite(gn)) {
      if (t == 0) throw InvalidArgument("rollout: objective is not finite at x0");
      // drop the update that led here so the stored records stay consistent
      tr.diverged = true;
      tr.diverged_at = t;
      if (rec.states) tr.x.pop_back();
      if (rec.updates) {
        tr.u.pop_back();
        tr.v.pop_back();
      }
      tr.u_norm.pop_back();
      tr.v_norm.pop_back();
      tr.z_norm.pop_back();
      tr.eta.pop_back();
      tr.update_energy.pop_back();
      if (!tr.probes.empty() && tr.probes.back().t == t) tr.probes.pop_back();
      --tr.steps;
      break;
    }
    if (rec.states) tr.x.push_back(as_vector(s.x()));
    if (rec.gradients) tr.g.push_back(as_vector(e.g));
    tr.f.push_back(f);
    tr.grad_norm.push_back(gn);
    g_energy += gn * gn;
    tr.grad_energy.push_back(g_energy);
    if (probe_every != 0 && t % probe_every == 0) {
      const Vector xv = as_vector(s.x());
      tr.probes.push_back({t, obj.value(xv), obj.gradient(xv)});
    }
    if (t == steps) break;

    const StepResult<Matrix> r = s.advance(e);
    if (!healthy(s.x())) {
      tr.diverged = true;
      tr.diverged_at = t + 1;
      break;
    }
    const double un = r.u.norm();
    if (rec.updates) {
      tr.u.push_back(as_vector(r.u));
      tr.v.push_back(as_vector(r.v));
    }
    tr.u_norm.push_back(un);
    tr.v_norm.push_back(r.v.norm());
    tr.z_norm.push_back(r.z_norm);
    tr.eta.push_back(e.eta);
    u_energy += un * un;
    tr.update_energy.push_back(u_energy);
    ++tr.steps;
  }
  return tr;
}

StepRecord step_full(RolloutState& state) { return do_step(state); }
StepRecord step_cyclic(RolloutState& state) { return do_step(state); }

Trajectory rollout(const FullGradientRule& rule, const Objective& obj, const Vector& x0, std::size_t steps,
                   const RecordOptions& record) {
  RolloutState state(rule, obj, x0);
  StepperLoop loop(state.stepper());
  return drive(loop, RuleKind::Full, obj, steps, record);
}

Trajectory rollout(const CyclicRule& rule, const Objective& obj, const Vector& x0, std::size_t steps,
                   const RecordOptions& record) {
  RolloutState state(rule, obj, x0);
  StepperLoop loop(state.stepper());
  return drive(loop, RuleKind::Cyclic, obj, steps, record);
}

// ---- export ----

std::string trajectory_csv(const Trajectory& tr) {
  CsvTable table({"t", "grad_norm", "f", "u_norm", "v_norm", "flags"});
  const std::size_t rows = tr.f.size();
  std::size_t probe = 0;
  for (std::size_t t = 0; t < rows; ++t) {
    std::string flags;
    auto flag = [&](const char* s) {
      if (!flags.empty()) flags += ';';
      flags += s;
    };
    double gn = tr.grad_norm[t];
    if (tr.kind == RuleKind::Cyclic) {
      while (probe < tr.probes.size() && tr.probes[probe].t < t) ++probe;
      if (probe < tr.probes.size() && tr.probes[probe].t == t) {
        gn = tr.probes[probe].grad.norm();
        flag("probe");
      } else {
        flag("partial");
      }
    }
    if (tr.diverged && t + 1 == rows) flag("diverged");
    table.add_row({CsvTable::cell(static_cast<double>(t)), CsvTable::cell(gn), CsvTable::cell(tr.f[t]),
                   t < tr.u_norm.size() ? CsvTable::cell(tr.u_norm[t]) : std::string(),
                   t < tr.v_norm.size() ? CsvTable::cell(tr.v_norm[t]) : std::string(), flags});
  }
  return table.str();
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  bin::write_file_bytes(path, trajectory_csv(traj));
}

namespace {
constexpr char kTrajMagic[4] = {'C', 'L', '2', 'O'};
constexpr std::uint16_t kTrajVersion = 1;

void put_vectors(bin::Writer& w, const std::vector<Vector>& vs) {
  w.put<std::uint64_t>(vs.size());
  for (const Vector& v : vs)
    for (Index i = 0; i < v.size(); ++i) w.put<double>(v[i]);
}
void put_doubles(bin::Writer& w, const std::vector<double>& xs) {
  w.put<std::uint64_t>(xs.size());
  for (double x : xs) w.put<double>(x);
}
std::vector<Vector> get_vectors(bin::Reader& r, Index d) {
  const auto n = r.get<std::uint64_t>();
  std::vector<Vector> out;
  for (std::uint64_t k = 0; k < n; ++k) {
    Vector v(d);
    for (Index i = 0; i < d; ++i) v[i] = r.get<double>();
    out.push_back(std::move(v));
  }
  return out;
}
std::vector<double> get_doubles(bin::Reader& r) {
  const auto n = r.get<std::uint64_t>();
  std::vector<double> out;
  for (std::uint64_t k = 0; k < n; ++k) out.push_back(r.get<double>());
  return out;
}
}  // namespace

std::string serialize_trajectory(const Trajectory& tr) {
  if (tr.x.size() != tr.steps + 1 || tr.u.size() != tr.steps || tr.g.size() != tr.steps + 1) {
    throw InvalidArgument("serialize_trajectory: states, updates and gradients must be recorded");
  }
  bin::Writer w;
  w.raw(kTrajMagic, 4);
  w.put<std::uint16_t>(kTrajVersion);
  w.put<std::uint8_t>(tr.kind == RuleKind::Full ? 0 : 1);
  w.put<std::uint8_t>(tr.diverged ? 1 : 0);
  w.str(tr.objective);
  w.put<std::int64_t>(tr.dim);
  w.put<std::uint64_t>(tr.components);
  w.put<std::uint64_t>(tr.steps);
  w.put<std::int64_t>(tr.diverged_at ? static_cast<std::int64_t>(*tr.diverged_at) : -1);
  put_vectors(w, tr.x);
  put_vectors(w, tr.u);
  put_vectors(w, tr.v);
  put_vectors(w, tr.g);
  put_doubles(w, tr.f);
  put_doubles(w, tr.z_norm);
  put_doubles(w, tr.eta);
  w.put<std::uint64_t>(tr.probes.size());
  for (const auto& p : tr.probes) {
    w.put<std::uint64_t>(p.t);
    w.put<double>(p.f);
    for (Index i = 0; i < p.grad.size(); ++i) w.put<double>(p.grad[i]);
  }
  return w.bytes();
}

Trajectory deserialize_trajectory(const std::string& bytes) {
  bin::Reader r(bytes, "trajectory");
  if (r.raw(4) != std::string(kTrajMagic, 4)) throw FormatError("trajectory: bad magic (expected CL2O)");
  const auto version = r.get<std::uint16_t>();
  if (version != kTrajVersion) throw FormatError("trajectory: unsupported version " + std::to_string(version));
  Trajectory tr;
  const auto kind = r.get<std::uint8_t>();
  if (kind > 1) throw FormatError("trajectory: unknown rule kind");
  tr.kind = kind == 0 ? RuleKind::Full : RuleKind::Cyclic;
  tr.diverged = r.get<std::uint8_t>() != 0;
  tr.objective = r.str();
  tr.dim = r.get<std::int64_t>();
  if (tr.dim < 1) throw FormatError("trajectory: invalid dimension");
  tr.components = r.get<std::uint64_t>();
  tr.steps = r.get<std::uint64_t>();
  const auto at = r.get<std::int64_t>();
  if (at >= 0) tr.diverged_at = static_cast<std::size_t>(at);
  tr.x = get_vectors(r, tr.dim);
  tr.u = get_vectors(r, tr.dim);
  tr.v = get_vectors(r, tr.dim);
  tr.g = get_vectors(r, tr.dim);
  tr.f = get_doubles(r);
  tr.z_norm = get_doubles(r);
  tr.eta = get_doubles(r);
  const auto np = r.get<std::uint64_t>();
  for (std::uint64_t k = 0; k < np; ++k) {
    Trajectory::Probe p;
    p.t = r.get<std::uint64_t>();
    p.f = r.get<double>();
    p.grad.resize(tr.dim);
    for (Index i = 0; i < tr.dim; ++i) p.grad[i] = r.get<double>();
    tr.probes.push_back(std::move(p));
  }
  if (!r.done()) throw FormatError("trajectory: trailing bytes");
  const std::size_t T = tr.steps;
  if (tr.x.size() != T + 1 || tr.u.size() != T || tr.v.size() != T || tr.g.size() != T + 1 || tr.f.size() != T + 1 ||
      tr.eta.size() != T || tr.z_norm.size() != T) {
    throw FormatError("trajectory: record lengths do not match the step count");
  }
  // derived columns
  double ge = 0.0, ue = 0.0;
  for (std::size_t t = 0; t <= T; ++t) {
    const double gn = tr.g[t].norm();
    tr.grad_norm.push_back(gn);
    ge += gn * gn;
    tr.grad_energy.push_back(ge);
    if (t < T) {
      const double un = tr.u[t].norm();
      tr.u_norm.push_back(un);
      tr.v_norm.push_back(tr.v[t].norm());
      ue += un * un;
      tr.update_energy.push_back(ue);
    }
  }
  return tr;
}

void save_trajectory(const Trajectory& traj, const std::string& path) {
  bin::write_file_bytes(path, serialize_trajectory(traj));
}

Trajectory load_trajectory(const std::string& path) { return deserialize_trajectory(bin::read_file_bytes(path)); }

}  // namespace cl2o
