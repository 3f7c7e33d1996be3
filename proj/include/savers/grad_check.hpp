#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "savers/tensor.hpp"

namespace savers {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::int64_t components_checked = 0;
  std::int64_t kink_excluded = 0;
  double tolerance = 0.0;
  bool pass = false;
};

// Central finite differences of a scalarized forward map, compared
// per-component against the supplied analytic gradients.
//
// `scalar_forward` evaluates the operation under test at the given
// inputs and reduces its output to one number (typically a sum).
// `kink_filter(input_index, element_index)` marks components where the
// map is not differentiable (e.g. a ReLU input at exactly 0); those are
// counted as kink-excluded instead of failing.
inline GradCheckReport grad_check(
    const std::function<double(const std::vector<Tensor>&)>& scalar_forward,
    const std::vector<Tensor>& inputs,
    const std::vector<Tensor>& analytic_grads, double step, double tolerance,
    const std::function<bool(std::size_t, std::int64_t)>& kink_filter = {}) {
  GradCheckReport report;
  report.tolerance = tolerance;
  std::vector<Tensor> work = inputs;
  for (std::size_t t = 0; t < work.size(); ++t) {
    for (std::int64_t i = 0; i < work[t].size(); ++i) {
      if (kink_filter && kink_filter(t, i)) {
        ++report.kink_excluded;
        continue;
      }
      const double saved = work[t][i];
      work[t][i] = saved + step;
      const double up = scalar_forward(work);
      work[t][i] = saved - step;
      const double down = scalar_forward(work);
      work[t][i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = analytic_grads[t][i];
      const double denom = std::max(std::abs(fd), std::abs(an));
      const double err =
          denom < 1e-7 ? std::abs(fd - an) : std::abs(fd - an) / denom;
      report.max_rel_error = std::max(report.max_rel_error, err);
      ++report.components_checked;
    }
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

}  // namespace savers
