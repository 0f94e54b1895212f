#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scis/driving.hpp"
#include "scis/planner.hpp"
#include "scis/tensor.hpp"

namespace scis {

/// Input-side perturbation applied before prediction; scoring always uses the
/// clean scene.
struct Condition {
  VelocityPerturbation velocity;
  std::optional<ContextBlock> context_block;
  double context_magnitude = 0.0;
  std::uint64_t noise_seed = 0;

  static Condition clean() { return {}; }
  static Condition ego(VelocityPerturbation v) { return {v, std::nullopt, 0.0, 0}; }
  static Condition context(ContextBlock b, double m, std::uint64_t seed) {
    return {VelocityPerturbation::none(), b, m, seed};
  }
  std::string label() const;
  Scene apply(const Scene& scene) const;
};

struct SceneRecord {
  std::uint64_t scene_id = 0;
  std::array<double, 3> l2{};  // at 1s, 2s, 3s
  bool collided = false;
  friend bool operator==(const SceneRecord&, const SceneRecord&) = default;
};

struct MetricsReport {
  std::string model;      // display name
  std::string model_hash;
  std::string condition;
  std::string split;
  std::size_t scene_count = 0;
  std::uint64_t seed = 0;
  std::array<double, 3> l2{};  // at 1s, 2s, 3s
  double l2_avg = 0.0;
  double collision_rate = 0.0;
  std::vector<SceneRecord> scenes;
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Mean Euclidean error over the first `waypoints` waypoints.
double l2_upto(const std::array<Vec2, kHorizon>& pred, const std::array<Vec2, kHorizon>& truth,
               std::size_t waypoints);
/// True when any waypoint lies within kCollisionRadius of an agent's
/// constant-velocity extrapolation at the same time step.
bool collides(const std::array<Vec2, kHorizon>& plan, const std::vector<AgentState>& agents);

/// Scores arbitrary per-scene trajectories; `trajectories[i]` belongs to scenes[i].
MetricsReport score(const std::vector<std::array<Vec2, kHorizon>>& trajectories,
                    const Dataset& data);

MetricsReport evaluate(const PlannerModel& model, const Dataset& data,
                       const Condition& condition = Condition::clean(),
                       const std::string& model_name = "model");

/// Summary columns, one row per report.
inline constexpr const char* kReportCsvHeader =
    "model,model_hash,condition,split,scenes,seed,l2_1s,l2_2s,l2_3s,l2_avg,collision_rate";
inline constexpr const char* kSceneCsvHeader = "model,condition,scene_id,l2_1s,l2_2s,l2_3s,collided";

std::string format_number(double v);
std::string report_csv(const std::vector<MetricsReport>& reports);
std::string scene_csv(const std::vector<MetricsReport>& reports);
nlohmann::json to_json(const MetricsReport& r);
MetricsReport metrics_report_from_json(const nlohmann::json& j);

/// Projects rows onto their top-2 principal components. Returns [N, 2] and
/// the explained variance of each component.
struct Projection {
  Tensor coords;
  std::array<double, 2> variance{};
};
Projection pca_project(const Tensor& rows, std::size_t components = 2);

}  // namespace scis
