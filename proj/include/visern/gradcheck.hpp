#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "visern/matrix.hpp"

namespace visern {

struct GradReport {
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::vector<std::pair<std::string, double>> per_parameter_errors;
  bool passed = true;
};

/// A parameter under test: the live value (perturbed in place and restored)
/// and the analytic gradient to compare against.
struct GradCheckParam {
  std::string name;
  Matrix* value;
  const Matrix* analytic;
};

inline constexpr double kDefaultFiniteDiffStep = 1e-5;
inline constexpr double kDefaultGradTolerance = 1e-5;

/// Relative error used throughout: |a - n| / max(1e-8, |a| + |n|).
double grad_relative_error(double analytic, double numeric);

/// Central-difference check of every entry of every parameter. `loss` must
/// read the parameters through the pointers in `params`. Throws
/// EvaluationError if `loss` returns a non-finite value.
GradReport finite_diff_grad(const std::function<double()>& loss,
                            std::span<const GradCheckParam> params,
                            double h = kDefaultFiniteDiffStep,
                            double tolerance = kDefaultGradTolerance);

}  // namespace visern
