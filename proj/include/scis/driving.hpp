#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace scis {

inline constexpr std::size_t kFeatureDim = 16;
inline constexpr std::size_t kHorizon = 6;          // waypoints
inline constexpr double kStepSeconds = 0.5;         // waypoint spacing
inline constexpr std::size_t kHistorySteps = 2;
inline constexpr std::size_t kObjectClasses = 4;    // car, pedestrian, stroller, cone
inline constexpr std::size_t kMapClasses = 3;       // divider, crossing, boundary
inline constexpr double kMaxSpeed = 5.0;            // toy units / s
inline constexpr double kMaxCurvature = 0.15;       // 1 / toy unit
inline constexpr double kCollisionRadius = 1.0;

enum class Context { straight = 0, left = 1, right = 2 };
inline constexpr std::size_t kContexts = 3;

std::string to_string(Context c);
Context context_from_string(const std::string& s);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct ScenarioConfig {
  std::array<double, kContexts> context_prior{0.75, 0.125, 0.125};
  double shortcut_strength = 0.9;
  double cooccurrence_strength = 0.8;
  double cut_in_rate = 0.3;
  std::size_t n_objects = 4;
  std::size_t n_map_elems = 3;
  std::size_t n_agents = 3;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when an invariant fails.
  void validate() const;
};

nlohmann::json to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_config_from_json(const nlohmann::json& j);

struct AgentState {
  Vec2 pos;
  Vec2 vel;
  friend bool operator==(const AgentState&, const AgentState&) = default;
};

/// Every random draw behind one scene. Rendering is a pure function of
/// (noise, context), which is what makes counterfactual edits exact.
struct ExogenousNoise {
  double u_context = 0.0;
  bool cooccurrence = false;
  double speed_limit = 3.0;      // lane speed, toy units / s
  double curvature_scale = 1.0;  // multiplies the nominal turn curvature
  bool cut_in = false;
  double cut_side = 1.0;         // +1: from the left, -1: from the right
  double cut_distance = 8.0;
  double cut_speed = 2.0;
  double cut_lateral_speed = 1.0;
  std::vector<std::array<double, 3>> agent_draws;   // (longitudinal, lateral, speed) per agent
  std::vector<double> object_class_draws;
  std::vector<std::vector<double>> object_noise;    // n_objects x kFeatureDim
  std::vector<double> map_class_draws;
  std::vector<std::vector<double>> map_noise;       // n_map_elems x kFeatureDim
  std::array<double, 4> history_decoy{};            // independent (u_ctx, speed, curvature, cut) draw
  std::array<double, 2 * kHistorySteps> history_noise{};
  friend bool operator==(const ExogenousNoise&, const ExogenousNoise&) = default;
};

struct Scene {
  std::uint64_t id = 0;
  Context context = Context::straight;
  bool cooccurrence = false;
  std::vector<std::vector<double>> object_features;  // n_objects x kFeatureDim
  std::vector<int> object_labels;
  std::vector<std::vector<double>> map_features;     // n_map_elems x kFeatureDim
  std::vector<int> map_labels;
  std::vector<AgentState> agents;
  std::array<Vec2, kHistorySteps> ego_history{};     // past velocities, oldest first
  std::array<Vec2, kHorizon> expert{};               // future waypoints, ego frame
  ExogenousNoise noise;
  friend bool operator==(const Scene&, const Scene&) = default;
};

enum class Split { train, val };
std::string to_string(Split s);

struct Dataset {
  std::vector<Scene> scenes;
  ScenarioConfig config;
  Split split = Split::train;

  std::size_t size() const { return scenes.size(); }
  bool empty() const { return scenes.empty(); }
};

/// Samples the exogenous noise of scene `index` from its derived seed.
ExogenousNoise sample_noise(const ScenarioConfig& cfg, std::uint64_t scene_seed);
Context context_from_noise(const ScenarioConfig& cfg, const ExogenousNoise& noise);

/// Renders features, agents, expert trajectory and ego history under a context.
Scene render_scene(const ScenarioConfig& cfg, const ExogenousNoise& noise, Context context,
                   std::uint64_t id);

/// The rule-based expert: follows lane curvature at the lane speed and brakes
/// for a cutting-in agent.
std::array<Vec2, kHorizon> expert_trajectory(Context context, double speed_limit,
                                             double curvature_scale, bool cut_in);
double nominal_curvature(Context context, double curvature_scale);

/// Per-scene seeds are derive_seed(derive_seed(cfg.seed, split), i), so train
/// and val draw from disjoint streams and generation order is irrelevant.
Dataset generate_dataset(const ScenarioConfig& cfg, std::size_t n, Split split = Split::train);

// ---- editors (all return modified copies) -----------------------------------------

struct VelocityPerturbation {
  enum class Mode { none, scale, absolute } mode = Mode::none;
  double value = 1.0;

  static VelocityPerturbation none() { return {}; }
  static VelocityPerturbation scaled(double r) { return {Mode::scale, r}; }
  static VelocityPerturbation absolute(double v) { return {Mode::absolute, v}; }
  std::string label() const;
};

Scene perturb_ego_velocity(const Scene& scene, const VelocityPerturbation& p);

enum class ContextBlock { agent, map };
std::string to_string(ContextBlock b);

/// Adds U[-m, m] * feature_scale noise to one block; feature_scale is 1 toy unit
/// for agent kinematics and 1 feature unit for map features.
Scene perturb_context_features(const Scene& scene, ContextBlock target, double magnitude,
                               std::uint64_t seed);

/// Re-renders map, agents and expert under a new context with the exogenous
/// noise held fixed. The ego history is left untouched.
Scene counterfactual_context(const ScenarioConfig& cfg, const Scene& scene, Context context);

// ---- checks -----------------------------------------------------------------------------

/// Per-step displacement <= kMaxSpeed * dt and discrete curvature <= kMaxCurvature.
bool kinematically_feasible(const std::array<Vec2, kHorizon>& trajectory);

/// Constant-velocity extrapolation of an agent at waypoint index k (t = (k+1) dt).
Vec2 extrapolate(const AgentState& agent, std::size_t k);

// ---- I/O (JSON lines, one scene per line) -------------------------------------------------

nlohmann::json to_json(const Scene& s);
Scene scene_from_json(const nlohmann::json& j);
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace scis
