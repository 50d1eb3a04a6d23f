#pragma once

#include "cl2o/numcore/autodiff.hpp"
#include "cl2o/numcore/param_vector.hpp"

#include <functional>
#include <memory>

namespace cl2o {

/// A differentiable computation from a flat input column to a scalar.
using Program = std::function<ad::Var(const ad::Var& input)>;

struct TapedEvaluation {
  double value = 0.0;
  std::unique_ptr<ad::Tape> tape;
  ad::Var input;
  ad::Var output;
  ParamLayout layout;
};

TapedEvaluation evaluate_with_tape(const Program& program, const ParamVector& inputs);

/// d value / d inputs, laid out like the evaluated inputs.
ParamVector reverse_gradient(const TapedEvaluation& evaluation);

/// Max over coordinates of |ad - fd| / max(1, |ad|) with central differences.
double finite_difference_check(const Program& program, const ParamVector& point, double step);

}  // namespace cl2o
