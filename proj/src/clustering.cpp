#include "scis/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scis/rng.hpp"

namespace scis {

std::string to_string(Domain d) {
  switch (d) {
    case Domain::object: return "object";
    case Domain::map: return "map";
    case Domain::agent: return "agent";
  }
  return "?";
}

Domain domain_from_string(const std::string& s) {
  if (s == "object") return Domain::object;
  if (s == "map") return Domain::map;
  if (s == "agent") return Domain::agent;
  throw std::invalid_argument("unknown domain '" + s + "'");
}

std::string to_string(ClusterAlgo a) {
  switch (a) {
    case ClusterAlgo::kmeans: return "kmeans";
    case ClusterAlgo::kmeans_pp: return "kmeans_pp";
    case ClusterAlgo::kmedoids: return "kmedoids";
  }
  return "?";
}

ClusterAlgo cluster_algo_from_string(const std::string& s) {
  if (s == "kmeans") return ClusterAlgo::kmeans;
  if (s == "kmeans_pp" || s == "kmeans++") return ClusterAlgo::kmeans_pp;
  if (s == "kmedoids") return ClusterAlgo::kmedoids;
  throw std::invalid_argument("unknown clustering algorithm '" + s + "'");
}

double squared_distance(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

namespace {

struct View {
  const double* data;
  std::size_t n;
  std::size_t d;
  const double* row(std::size_t i) const { return data + i * d; }
};

View view_of(const Tensor& points) {
  if (points.rank() != 2) throw ShapeError("clustering expects [N, D] points, got " +
                                           shape_str(points.shape()));
  return {points.data().data(), points.dim(0), points.dim(1)};
}

void check_capacity(std::size_t k, std::size_t n) {
  if (k == 0) throw CapacityError("cluster count must be positive");
  if (k > n) {
    throw CapacityError("requested " + std::to_string(k) + " clusters from " + std::to_string(n) +
                        " points");
  }
}

Tensor rows_to_tensor(const View& v, const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  out.reserve(idx.size() * v.d);
  for (auto i : idx) out.insert(out.end(), v.row(i), v.row(i) + v.d);
  return Tensor({idx.size(), v.d}, std::move(out));
}

std::vector<std::size_t> kmeans_pp_indices(const View& v, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> chosen{rng.index(v.n)};
  std::vector<bool> taken(v.n, false);
  taken[chosen[0]] = true;
  std::vector<double> nearest(v.n);
  for (std::size_t i = 0; i < v.n; ++i) nearest[i] = squared_distance(v.row(i), v.row(chosen[0]), v.d);
  while (chosen.size() < k) {
    std::vector<double> weights(v.n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < v.n; ++i) {
      if (!taken[i]) weights[i] = nearest[i];
      total += weights[i];
    }
    if (!(total > 0.0)) {
      // Only duplicates of chosen rows remain: pick uniformly among them.
      for (std::size_t i = 0; i < v.n; ++i) weights[i] = taken[i] ? 0.0 : 1.0;
    }
    const std::size_t next = rng.categorical(weights);
    chosen.push_back(next);
    taken[next] = true;
    for (std::size_t i = 0; i < v.n; ++i)
      nearest[i] = std::min(nearest[i], squared_distance(v.row(i), v.row(next), v.d));
  }
  return chosen;
}

std::vector<std::size_t> uniform_indices(const View& v, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> all(v.n);
  for (std::size_t i = 0; i < v.n; ++i) all[i] = i;
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) std::swap(all[i], all[i + rng.index(v.n - i)]);
  all.resize(k);
  return all;
}

// Nearest center per point; ties go to the lowest center index.
double assign(const View& v, const std::vector<double>& centers, std::size_t k,
              std::vector<std::size_t>& assignment, std::vector<double>& dist) {
  double total = 0.0;
  for (std::size_t i = 0; i < v.n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double d2 = squared_distance(v.row(i), centers.data() + c * v.d, v.d);
      if (d2 < best) {
        best = d2;
        arg = c;
      }
    }
    assignment[i] = arg;
    dist[i] = best;
    total += best;
  }
  return total;
}

double objective_of(const View& v, const std::vector<double>& centers,
                    const std::vector<std::size_t>& assignment) {
  double total = 0.0;
  for (std::size_t i = 0; i < v.n; ++i)
    total += squared_distance(v.row(i), centers.data() + assignment[i] * v.d, v.d);
  return total;
}

// Moves the globally farthest point into each empty cluster.
void repair_empty(const View& v, std::vector<double>& centers, std::size_t k,
                  std::vector<std::size_t>& assignment, std::vector<std::size_t>& counts,
                  std::vector<std::size_t>* medoids) {
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] != 0) continue;
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < v.n; ++i) {
      if (counts[assignment[i]] < 2) continue;
      const double d2 = squared_distance(v.row(i), centers.data() + assignment[i] * v.d, v.d);
      if (d2 > far_d) {
        far_d = d2;
        far = i;
      }
    }
    --counts[assignment[far]];
    assignment[far] = c;
    counts[c] = 1;
    std::copy_n(v.row(far), v.d, centers.data() + c * v.d);
    if (medoids) (*medoids)[c] = far;
  }
}

// False when the step did not lower the objective, i.e. only round-off moved it.
// Anything beyond round-off is a bug.
bool record(std::vector<double>& trace, double value) {
  if (!trace.empty()) {
    const double prev = trace.back();
    if (value > prev + 1e-9 * (1.0 + std::abs(prev))) {
      throw std::logic_error("clustering objective increased from " + std::to_string(prev) +
                             " to " + std::to_string(value));
    }
    if (value > prev) return false;
  }
  trace.push_back(value);
  return true;
}

}  // namespace

double sse(const Tensor& points, const Tensor& centers) {
  const View v = view_of(points);
  const View c = view_of(centers);
  if (c.d != v.d) throw ShapeError("sse: dimension mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < v.n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c.n; ++j) best = std::min(best, squared_distance(v.row(i), c.row(j), v.d));
    total += best;
  }
  return total;
}

Tensor kmeans_pp_init(const Tensor& points, std::size_t k, std::uint64_t seed) {
  const View v = view_of(points);
  check_capacity(k, v.n);
  return rows_to_tensor(v, kmeans_pp_indices(v, k, seed));
}

Tensor kmeans_pp_init(const EmbeddingStore& store, std::size_t k, std::uint64_t seed) {
  return kmeans_pp_init(store.rows, k, seed);
}

ClusterResult cluster(const Tensor& points, std::size_t k, ClusterAlgo algo, std::uint64_t seed,
                      std::size_t max_iter) {
  const View v = view_of(points);
  check_capacity(k, v.n);
  if (max_iter == 0) throw std::invalid_argument("cluster: iteration budget must be positive");

  std::vector<std::size_t> medoids = algo == ClusterAlgo::kmeans_pp ? kmeans_pp_indices(v, k, seed)
                                                                    : uniform_indices(v, k, seed);
  std::vector<double> centers;
  centers.reserve(k * v.d);
  for (auto i : medoids) centers.insert(centers.end(), v.row(i), v.row(i) + v.d);

  ClusterResult result;
  std::vector<std::size_t> assignment(v.n, k);  // k = "unassigned" sentinel
  std::vector<std::size_t> next(v.n);
  std::vector<double> dist(v.n);
  std::vector<std::size_t> counts(k);

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    const double assigned = assign(v, centers, k, next, dist);
    if (next == assignment) {
      result.converged = true;
      break;
    }
    if (!record(result.objective_trace, assigned)) {
      result.converged = true;
      break;
    }
    assignment = next;
    ++result.iterations;

    const std::vector<double> previous = centers;
    const std::vector<std::size_t> previous_medoids = medoids;
    const std::vector<std::size_t> previous_assignment = assignment;
    std::fill(counts.begin(), counts.end(), 0);
    for (auto a : assignment) ++counts[a];
    repair_empty(v, centers, k, assignment, counts,
                 algo == ClusterAlgo::kmedoids ? &medoids : nullptr);

    if (algo == ClusterAlgo::kmedoids) {
      // Best member of each cluster under the squared-distance objective.
      for (std::size_t c = 0; c < k; ++c) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = medoids[c];
        for (std::size_t i = 0; i < v.n; ++i) {
          if (assignment[i] != c) continue;
          double cost = 0.0;
          for (std::size_t j = 0; j < v.n; ++j)
            if (assignment[j] == c) cost += squared_distance(v.row(i), v.row(j), v.d);
          if (cost < best) {
            best = cost;
            arg = i;
          }
        }
        medoids[c] = arg;
        std::copy_n(v.row(arg), v.d, centers.data() + c * v.d);
      }
    } else {
      std::vector<double> sums(k * v.d, 0.0);
      for (std::size_t i = 0; i < v.n; ++i)
        for (std::size_t j = 0; j < v.d; ++j) sums[assignment[i] * v.d + j] += v.row(i)[j];
      for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < v.d; ++j)
          centers[c * v.d + j] = sums[c * v.d + j] / static_cast<double>(counts[c]);
    }
    if (!record(result.objective_trace, objective_of(v, centers, assignment))) {
      centers = previous;
      medoids = previous_medoids;
      assignment = previous_assignment;
      result.converged = true;
      break;
    }
  }

  result.assignment = assignment;
  result.centers = Tensor({k, v.d}, std::move(centers));
  return result;
}

ClusterResult cluster(const EmbeddingStore& store, std::size_t k, ClusterAlgo algo,
                      std::uint64_t seed, std::size_t max_iter) {
  return cluster(store.rows, k, algo, seed, max_iter);
}

}  // namespace scis
