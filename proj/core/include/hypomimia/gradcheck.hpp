#pragma once

#include <functional>
#include <span>
#include <string>

#include "hypomimia/parameters.hpp"

namespace hypomimia {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

/// Compares the analytic gradients currently held in the store against
/// central finite differences of loss_fn, coordinate by coordinate over the
/// listed parameters. Reports max |g_fd - g| / max(1, |g_fd|, |g|).
///
/// The caller runs one forward/backward pass to populate store gradients
/// before calling; loss_fn must re-evaluate the same deterministic loss
/// from the current parameter values. Parameter values are restored after
/// every probe. epsilon must lie in (0, 1e-3]; a non-finite loss aborts
/// with a numeric error.
GradCheckResult gradient_check(ParameterStore& store,
                               std::span<const ParamId> params,
                               const std::function<double()>& loss_fn,
                               double epsilon);

}  // namespace hypomimia
