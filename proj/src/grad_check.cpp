#include "scis/grad_check.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <string>

namespace scis {

namespace {

void check_eps(double eps) {
  if (!(eps > 0.0 && eps <= 1e-3)) {
    throw ContractError("grad_check: eps must lie in (0, 1e-3], got " + std::to_string(eps));
  }
}

double scalar_of(const Tensor& t) {
  if (t.numel() != 1) throw ContractError("grad_check: function must return a scalar");
  return t[0];
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  Tensor leaf = x.clone(true);
  return grad_check([&] { return f(leaf); }, std::vector<Tensor>{leaf}, eps);
}

double grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> params, double eps) {
  check_eps(eps);
  for (auto& p : params) {
    if (!p.requires_grad() || !p.is_leaf()) {
      throw ContractError("grad_check: parameters must be requires_grad leaves");
    }
    p.zero_grad();
  }

  Tensor first = loss();
  const double v0 = scalar_of(first);
  const double v1 = scalar_of(loss());
  if (std::bit_cast<std::uint64_t>(v0) != std::bit_cast<std::uint64_t>(v1)) {
    throw ContractError("grad_check: function is not deterministic");
  }
  first.backward();

  double worst = 0.0;
  for (auto& p : params) {
    std::vector<double> analytic(p.numel(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = scalar_of(loss());
      values[i] = saved - eps;
      const double down = scalar_of(loss());
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace scis
