#include "cl2o/baselines/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cl2o {

BaselineKind parse_baseline(const std::string& name) {
  if (name == "gd") return BaselineKind::GD;
  if (name == "sgd") return BaselineKind::SGD;
  if (name == "heavy-ball" || name == "heavyball" || name == "momentum") return BaselineKind::HeavyBall;
  if (name == "nag") return BaselineKind::NAG;
  if (name == "adam") return BaselineKind::Adam;
  if (name == "rmsprop") return BaselineKind::RMSprop;
  throw InvalidArgument("unknown baseline '" + name + "' (expected gd | sgd | heavy-ball | nag | adam | rmsprop)");
}

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::GD: return "gd";
    case BaselineKind::SGD: return "sgd";
    case BaselineKind::HeavyBall: return "heavy-ball";
    case BaselineKind::NAG: return "nag";
    case BaselineKind::Adam: return "adam";
    case BaselineKind::RMSprop: return "rmsprop";
  }
  return "?";
}

std::vector<BaselineKind> parse_baseline_list(const std::string& list) {
  std::vector<BaselineKind> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(parse_baseline(item));
  }
  return out;
}

BaselineState init_baseline_state(const BaselineOptimizer&, Index dim, std::size_t components) {
  if (components == 0) throw InvalidArgument("baseline state: component count must be >= 1");
  BaselineState s;
  s.m = Vector::Zero(dim);
  s.s = Vector::Zero(dim);
  s.components = components;
  return s;
}

Vector baseline_step(const BaselineOptimizer& opt, const Vector& g, BaselineState& st) {
  const BaselineHyper& h = opt.hyper;
  if (g.size() != st.m.size()) throw InvalidArgument("baseline_step: gradient dimension does not match the state");
  Vector u;
  switch (opt.kind) {
    case BaselineKind::GD:
      u = -h.lr * g;
      break;
    case BaselineKind::SGD: {
      const double e1 = static_cast<double>(st.t / st.components) + 1.0;
      const double lr_e = h.sgd_power == 1.0 ? h.lr / e1 : h.lr / std::pow(e1, h.sgd_power);
      u = -lr_e * g;
      break;
    }
    case BaselineKind::HeavyBall:
      u = -h.lr * g + h.momentum * st.m;
      st.m = u;
      break;
    case BaselineKind::NAG: {
      const Vector step = -h.lr * g;
      const Vector s = st.m + step;
      st.m = h.momentum * s;
      u = step + st.m;
      break;
    }
    case BaselineKind::Adam: {
      st.m = h.beta1 * st.m + (1.0 - h.beta1) * g;
      st.s = h.beta2 * st.s + (1.0 - h.beta2) * g.cwiseProduct(g);
      const double k = static_cast<double>(st.t + 1);
      const double c1 = 1.0 - std::pow(h.beta1, k);
      const double c2 = 1.0 - std::pow(h.beta2, k);
      u = -h.lr * ((st.m / c1).array() / ((st.s / c2).array().sqrt() + h.eps)).matrix();
      break;
    }
    case BaselineKind::RMSprop:
      st.s = h.rms_decay * st.s + (1.0 - h.rms_decay) * g.cwiseProduct(g);
      u = -h.lr * (g.array() / (st.s.array().sqrt() + h.eps)).matrix();
      break;
  }
  ++st.t;
  return u;
}

namespace {

class BaselineLoop final : public ClosedLoop {
 public:
  BaselineLoop(const BaselineOptimizer& opt, const Objective& obj, const Vector& x0, GradientMode mode)
      : opt_(opt), obj_(obj), mode_(mode), x_(x0) {
    m_ = mode == GradientMode::Cyclic ? obj.num_components() : 1;
    if (m_ == 0) throw InvalidArgument("baseline: cyclic gradients need an objective with components");
    state_ = init_baseline_state(opt, obj.dim(), m_);
  }
  const Matrix& x() const override { return x_; }
  StepEval<Matrix> evaluate() const override {
    StepEval<Matrix> e;
    if (mode_ == GradientMode::Full) {
      e.g = obj_.grad(x_);
      e.f = obj_.eval(x_);
    } else {
      e.component = state_.t % m_;
      e.g = obj_.component_grad(e.component, x_);
      e.f = obj_.component_eval(e.component, x_);
      e.weight = obj_.component_weight(e.component);
    }
    e.eta = opt_.hyper.lr;
    return e;
  }
  StepResult<Matrix> advance(const StepEval<Matrix>& e) override {
    StepResult<Matrix> r;
    r.u = baseline_step(opt_, as_vector(e.g), state_);
    r.v = Matrix::Zero(x_.rows(), 1);
    x_ = x_ + r.u;
    return r;
  }

 private:
  const BaselineOptimizer& opt_;
  const Objective& obj_;
  GradientMode mode_;
  Matrix x_;
  BaselineState state_;
  std::size_t m_ = 1;
};

}  // namespace

Trajectory run_baseline(const BaselineOptimizer& opt, const Objective& obj, const Vector& x0, std::size_t steps,
                        GradientMode mode, const RecordOptions& record) {
  if (x0.size() != obj.dim()) throw InvalidArgument("run_baseline: x0 dimension mismatch");
  BaselineLoop loop(opt, obj, x0, mode);
  Trajectory tr = drive(loop, mode == GradientMode::Full ? RuleKind::Full : RuleKind::Cyclic, obj, steps, record);
  // baselines carry no innovation; eta records the nominal rate
  return tr;
}

std::vector<double> default_lr_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 12; ++k) grid.push_back(std::pow(10.0, -4.0 + k / 3.0));
  return grid;
}

TuneResult tune_learning_rate(const BaselineOptimizer& base, const Objective& obj, const std::vector<double>& grid,
                              std::size_t budget, const std::vector<Vector>& starts, GradientMode mode) {
  std::vector<TuneProblem> problems;
  for (const Vector& x0 : starts) problems.push_back({&obj, x0});
  return tune_learning_rate(base, problems, grid, budget, mode);
}

TuneResult tune_learning_rate(const BaselineOptimizer& base, const std::vector<TuneProblem>& problems,
                              const std::vector<double>& grid, std::size_t budget, GradientMode mode) {
  if (grid.empty()) throw InvalidArgument("tune_learning_rate: empty grid");
  if (problems.empty()) throw InvalidArgument("tune_learning_rate: no starting points");
  std::vector<std::size_t> order(grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grid[a] < grid[b]; });

  TuneResult res;
  res.grid_losses.assign(grid.size(), std::numeric_limits<double>::infinity());
  bool found = false;
  RecordOptions rec;
  rec.states = rec.updates = rec.gradients = false;
  for (std::size_t idx : order) {
    BaselineOptimizer opt = base;
    opt.hyper.lr = grid[idx];
    double total = 0.0;
    bool ok = true;
    for (const auto& [obj_ptr, x0] : problems) {
      const Objective& obj = *obj_ptr;
      BaselineLoop loop(opt, obj, x0, mode);
      const Trajectory tr = drive(loop, RuleKind::Full, obj, budget, rec);
      if (tr.diverged) {
        ok = false;
        break;
      }
      const double f = obj.value(as_vector(loop.x()));
      if (!std::isfinite(f)) {
        ok = false;
        break;
      }
      total += f;
    }
    if (!ok) continue;
    const double mean = total / static_cast<double>(problems.size());
    res.grid_losses[idx] = mean;
    if (!found || mean < res.mean_final_loss) {
      found = true;
      res.lr = grid[idx];
      res.mean_final_loss = mean;
    }
  }
  if (!found) {
    std::ostringstream msg;
    msg << "tune_learning_rate: every grid point diverged for " << to_string(base.kind) << " (grid:";
    for (double g : grid) msg << ' ' << g;
    msg << ')';
    throw Error(msg.str());
  }
  return res;
}

}  // namespace cl2o
