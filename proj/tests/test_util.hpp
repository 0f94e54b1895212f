#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "scis/rng.hpp"
#include "scis/tensor.hpp"

namespace scis::test {

inline Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false, double stddev = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal(0.0, stddev);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// Keeps every entry at least `gap` away from zero so ReLU kinks stay out of reach
// of finite differences.
inline Tensor random_off_kink(Shape shape, Rng& rng, double gap = 0.05, bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) {
    const double m = rng.uniform(gap, 1.5);
    x = rng.bernoulli(0.5) ? m : -m;
  }
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// Plain triple loop, no library ops.
inline std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                        std::size_t n, std::size_t k, std::size_t m) {
  std::vector<double> c(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t t = 0; t < k; ++t) c[i * m + j] += a[i * k + t] * b[t * m + j];
  return c;
}

inline std::vector<double> to_vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  return true;
}

}  // namespace scis::test
