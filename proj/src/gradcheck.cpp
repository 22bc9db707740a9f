#include "visern/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "visern/error.hpp"

namespace visern {

double grad_relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradReport finite_diff_grad(const std::function<double()>& loss,
                            std::span<const GradCheckParam> params, double h,
                            double tolerance) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_grad: step must be positive");
  auto eval = [&](const std::string& name, std::size_t index) {
    const double v = loss();
    if (!std::isfinite(v)) {
      throw EvaluationError("finite_diff_grad: non-finite loss while perturbing " + name +
                            "[" + std::to_string(index) + "]");
    }
    return v;
  };

  GradReport report;
  report.tolerance = tolerance;
  for (const auto& p : params) {
    if (!p.value->same_shape(*p.analytic)) {
      throw ShapeError("finite_diff_grad: " + p.name + " is " + p.value->shape_string() +
                       " but its gradient is " + p.analytic->shape_string());
    }
    double worst = 0.0;
    auto& values = p.value->data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = eval(p.name, i);
      values[i] = saved - h;
      const double down = eval(p.name, i);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      worst = std::max(worst, grad_relative_error(p.analytic->data()[i], numeric));
    }
    report.per_parameter_errors.emplace_back(p.name, worst);
    report.max_rel_error = std::max(report.max_rel_error, worst);
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace visern
