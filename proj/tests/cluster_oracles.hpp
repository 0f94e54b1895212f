#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "scis/rng.hpp"
#include "scis/tensor.hpp"

namespace scis::test {

struct PointSet {
  std::size_t n = 0, d = 0;
  std::vector<double> x;  // row-major
  double at(std::size_t i, std::size_t j) const { return x[i * d + j]; }
  Tensor tensor() const { return Tensor({n, d}, x); }
};

inline double dist2(const PointSet& p, std::size_t i, const std::vector<double>& c) {
  double s = 0.0;
  for (std::size_t j = 0; j < p.d; ++j) s += (p.at(i, j) - c[j]) * (p.at(i, j) - c[j]);
  return s;
}

// Minimum within-cluster SSE over every assignment of points to k labels.
inline double brute_force_means_sse(const PointSet& p, std::size_t k) {
  std::vector<std::size_t> label(p.n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<std::vector<double>> sums(k, std::vector<double>(p.d, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < p.n; ++i) {
      ++counts[label[i]];
      for (std::size_t j = 0; j < p.d; ++j) sums[label[i]][j] += p.at(i, j);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < p.n; ++i) {
      std::vector<double> c = sums[label[i]];
      for (auto& v : c) v /= static_cast<double>(counts[label[i]]);
      total += dist2(p, i, c);
    }
    best = std::min(best, total);
    std::size_t i = 0;
    while (i < p.n && ++label[i] == k) label[i++] = 0;
    if (i == p.n) break;
  }
  return best;
}

// Minimum SSE when centers must be k distinct data points.
inline double brute_force_medoid_sse(const PointSet& p, std::size_t k) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<bool> pick(p.n, false);
  std::fill(pick.begin(), pick.begin() + static_cast<long>(k), true);
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < p.n; ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < p.n; ++m) {
        if (!pick[m]) continue;
        std::vector<double> c(p.x.begin() + static_cast<long>(m * p.d),
                              p.x.begin() + static_cast<long>((m + 1) * p.d));
        nearest = std::min(nearest, dist2(p, i, c));
      }
      total += nearest;
    }
    best = std::min(best, total);
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

// Small clustered fixtures: blobs, a line, and a set with duplicates.
inline std::vector<PointSet> small_fixtures(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PointSet> out;
  for (std::size_t f = 0; f < count; ++f) {
    PointSet p;
    p.n = 4 + rng.index(9);  // 4..12
    p.d = 1 + rng.index(3);
    const std::size_t blobs = 1 + rng.index(4);
    std::vector<std::vector<double>> centers(blobs, std::vector<double>(p.d));
    for (auto& c : centers)
      for (auto& v : c) v = rng.uniform(-5.0, 5.0);
    for (std::size_t i = 0; i < p.n; ++i) {
      const auto& c = centers[rng.index(blobs)];
      for (std::size_t j = 0; j < p.d; ++j) p.x.push_back(c[j] + rng.normal(0.0, 1.0));
    }
    if (f % 5 == 4) {  // duplicate a couple of rows
      std::copy(p.x.begin(), p.x.begin() + static_cast<long>(p.d), p.x.end() - static_cast<long>(p.d));
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace scis::test
