#include "cl2o/numcore/program.hpp"

#include <algorithm>
#include <cmath>

namespace cl2o {

TapedEvaluation evaluate_with_tape(const Program& program, const ParamVector& inputs) {
  TapedEvaluation ev;
  ev.tape = std::make_unique<ad::Tape>();
  ev.layout = inputs.layout();
  ev.input = ev.tape->input(Matrix(inputs.entries()));
  ev.output = program(ev.input);
  const Matrix& out = ev.output.value();
  ev.value = out.size() == 1 ? out(0, 0) : 0.0;
  return ev;
}

ParamVector reverse_gradient(const TapedEvaluation& evaluation) {
  Matrix g = evaluation.tape->gradient(evaluation.output, evaluation.input);
  return ParamVector(evaluation.layout, as_vector(g));
}

double finite_difference_check(const Program& program, const ParamVector& point, double step) {
  if (!(step > 0.0)) throw InvalidArgument("finite_difference_check: step must be positive");
  const TapedEvaluation ev = evaluate_with_tape(program, point);
  const Vector ad_grad = reverse_gradient(ev).entries();

  auto eval_at = [&](const Vector& x) {
    ad::Tape tape;
    ad::Var in = tape.constant(Matrix(x));
    ad::Var out = program(in);
    return out.value()(0, 0);
  };

  double worst = 0.0;
  Vector x = point.entries();
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double fp = eval_at(x);
    x[i] = saved - step;
    const double fm = eval_at(x);
    x[i] = saved;
    const double fd = (fp - fm) / (2.0 * step);
    const double err = std::abs(ad_grad[i] - fd) / std::max(1.0, std::abs(ad_grad[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace cl2o
