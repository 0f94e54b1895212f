#pragma once

#include <functional>
#include <vector>

#include "scis/tensor.hpp"

namespace scis {

/// Compares reverse-mode gradients of a scalar function against central
/// finite differences.
///
/// Returns max over components of |analytic - numeric| / max(1, |numeric|).
/// f is evaluated twice at x first; any bitwise difference is reported as a
/// ContractError since finite differences are meaningless for a
/// non-deterministic f. eps must lie in (0, 1e-3].
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double eps = 1e-6);

/// Same check over several parameter leaves at once. `loss` rebuilds the graph
/// from the current values of `params` on every call; the values are perturbed
/// in place and restored before returning.
double grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                  double eps = 1e-6);

}  // namespace scis
