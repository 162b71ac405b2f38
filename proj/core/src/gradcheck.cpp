#include "hypomimia/gradcheck.hpp"

#include <cmath>

#include "hypomimia/errors.hpp"

namespace hypomimia {

GradCheckResult gradient_check(ParameterStore& store,
                               std::span<const ParamId> params,
                               const std::function<double()>& loss_fn,
                               double epsilon) {
  if (!(epsilon > 0.0) || epsilon > 1e-3) {
    throw ConfigError("gradient_check: epsilon must lie in (0, 1e-3]");
  }
  // Snapshot the analytic gradients up front; probes below mutate values
  // but every coordinate is restored before the next one.
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (ParamId id : params) analytic.push_back(store.grad(id));

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& val = store.value(params[p]);
    for (std::size_t i = 0; i < val.numel(); ++i) {
      double saved = val[i];
      val[i] = saved + epsilon;
      double up = loss_fn();
      val[i] = saved - epsilon;
      double down = loss_fn();
      val[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("gradient_check: non-finite loss at parameter " +
                           store.name(params[p]));
      }
      double g_fd = (up - down) / (2.0 * epsilon);
      double g = analytic[p][i];
      double rel = std::abs(g_fd - g) /
                   std::max({1.0, std::abs(g_fd), std::abs(g)});
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = store.name(params[p]);
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace hypomimia
