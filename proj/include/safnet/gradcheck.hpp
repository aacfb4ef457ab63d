#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "safnet/matrix.hpp"

namespace safnet {

struct TensorCheck {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  double tolerance = 0.0;
  std::vector<TensorCheck> tensors;

  bool passed() const {
    return std::all_of(tensors.begin(), tensors.end(), [](const TensorCheck& t) { return t.passed; });
  }
};

inline constexpr double kGradCheckStep = 1e-6;
// Below this magnitude entries are compared by absolute difference.
inline constexpr double kGradCheckAbsFloor = 1e-10;

/// Compares analytic gradients with central differences of loss(params).
/// Params must expose tensors() and kTensorNames; loss is any callable taking
/// const Params&.
template <class Params, class LossFn>
GradCheckReport grad_check(Params params, const Params& analytic, LossFn&& loss,
                           double rel_tolerance, double step = kGradCheckStep) {
  GradCheckReport report;
  report.tolerance = rel_tolerance;
  auto values = params.tensors();
  auto grads = analytic.tensors();
  for (std::size_t t = 0; t < values.size(); ++t) {
    TensorCheck check;
    check.name = std::string(Params::kTensorNames[t]);
    Matrix& m = *values[t];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double saved = m[i];
      m[i] = saved + step;
      const double up = loss(static_cast<const Params&>(params));
      m[i] = saved - step;
      const double down = loss(static_cast<const Params&>(params));
      m[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double exact = (*grads[t])[i];
      const double abs_err = std::abs(numeric - exact);
      const double magnitude = std::max(std::abs(numeric), std::abs(exact));
      check.max_abs_error = std::max(check.max_abs_error, abs_err);
      if (magnitude < kGradCheckAbsFloor) {
        if (abs_err > kGradCheckAbsFloor) check.passed = false;
        continue;
      }
      const double rel = abs_err / magnitude;
      check.max_rel_error = std::max(check.max_rel_error, rel);
    }
    if (check.max_rel_error > rel_tolerance) check.passed = false;
    report.tensors.push_back(std::move(check));
  }
  return report;
}

}  // namespace safnet
