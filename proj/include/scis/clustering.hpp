#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scis/tensor.hpp"

namespace scis {

enum class Domain { object, map, agent };

std::string to_string(Domain d);
Domain domain_from_string(const std::string& s);

/// Query embeddings collected for one domain, one row per (scene, query).
struct EmbeddingStore {
  Domain domain = Domain::object;
  Tensor rows;  // [N, D]
  std::vector<std::pair<std::size_t, std::size_t>> provenance;  // (scene id, query index)

  std::size_t size() const { return rows.rank() == 2 ? rows.dim(0) : 0; }
  std::size_t dim() const { return rows.rank() == 2 ? rows.dim(1) : 0; }
};

enum class ClusterAlgo { kmeans, kmeans_pp, kmedoids };

std::string to_string(ClusterAlgo a);
ClusterAlgo cluster_algo_from_string(const std::string& s);

/// Requested more clusters than there are points.
class CapacityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ClusterResult {
  Tensor centers;                       // [k, D]
  std::vector<std::size_t> assignment;  // cluster index per point
  std::vector<double> objective_trace;  // SSE after every iteration
  std::size_t iterations = 0;
  bool converged = false;

  double objective() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
};

double squared_distance(const double* a, const double* b, std::size_t d);

/// Sum of squared distances from each point to its nearest center.
double sse(const Tensor& points, const Tensor& centers);

/// k-means++ seeding: first center uniform over rows, each next one drawn with
/// probability proportional to squared distance to the nearest chosen center.
Tensor kmeans_pp_init(const Tensor& points, std::size_t k, std::uint64_t seed);
Tensor kmeans_pp_init(const EmbeddingStore& store, std::size_t k, std::uint64_t seed);

/// Lloyd iterations (kmeans: uniform distinct-row init; kmeans_pp: k-means++
/// init) or Voronoi-iteration k-medoids (centers are data rows). Stops when
/// assignments stop changing or after max_iter iterations. The objective is
/// checked to be non-increasing every iteration; empty clusters are repaired
/// by moving the point farthest from its center into them.
ClusterResult cluster(const Tensor& points, std::size_t k, ClusterAlgo algo, std::uint64_t seed,
                      std::size_t max_iter = 100);
ClusterResult cluster(const EmbeddingStore& store, std::size_t k, ClusterAlgo algo,
                      std::uint64_t seed, std::size_t max_iter = 100);

}  // namespace scis
