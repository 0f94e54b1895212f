#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scis/dictionary.hpp"
#include "scis/driving.hpp"
#include "scis/intervention.hpp"
#include "scis/tensor.hpp"

namespace scis {

/// Loss became non-finite during training.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct ScisFlags {
  bool pdm = false;
  bool idm = false;
  bool any() const { return pdm || idm; }
  friend bool operator==(const ScisFlags&, const ScisFlags&) = default;
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  double w_classification = 1.0;
  double w_motion = 1.0;
  double w_planning = 1.0;
  ScisFlags flags;
  double gate_bias = -2.0;   // initial IDM gate is sigmoid(gate_bias)
  bool warm_start = false;   // copy the baseline backbone instead of a fresh init

  /// Throws ConfigError on a non-positive or non-finite hyperparameter.
  /// A zero learning rate is allowed.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Named parameter tensors in a fixed (lexicographic) order.
class ParamStore {
 public:
  void add(const std::string& name, Tensor t);
  const Tensor& operator[](const std::string& name) const;
  Tensor& operator[](const std::string& name);
  bool contains(const std::string& name) const { return tensors_.contains(name); }
  std::size_t size() const { return tensors_.size(); }
  std::size_t numel() const;
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }
  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }

  /// Copies every tensor into a fresh leaf that requires a gradient.
  ParamStore fresh_leaves() const;

 private:
  std::map<std::string, Tensor> tensors_;
};

struct PlannerOutput {
  Tensor object_logits;  // [n_objects, kObjectClasses]
  Tensor map_logits;     // [n_map_elems, kMapClasses]
  Tensor agent_motion;   // [n_agents, 2 * kHorizon], displacement per waypoint
  Tensor ego_plan;       // [kHorizon, 2]
  // Query embeddings at the final layer of each stage.
  Tensor object_queries;
  Tensor map_queries;
  Tensor agent_queries;
  Tensor ego_query;
};

struct LossBreakdown {
  double classification = 0.0;
  double motion = 0.0;
  double planning = 0.0;
  double total = 0.0;
};

/// Toy sequential planner: perception heads over object and map queries,
/// an agent interaction block with a motion head, and a learned ego query
/// attending over agents and maps before the waypoint head. Ego status (velocity
/// and history) is folded into the scene encoding the ego query reads. With SCIS flags set it
/// installs two PDM instances on the perception logits and four IDM instances
/// in front of the two interaction blocks.
class PlannerModel {
 public:
  static constexpr std::size_t kDim = kFeatureDim;
  static constexpr std::size_t kHeads = 2;
  static constexpr std::size_t kHidden = 32;

  /// Backbone parameters come from `seed`; SCIS parameters from a separate
  /// stream, so the backbone is identical with or without SCIS.
  PlannerModel(std::uint64_t seed, ScisFlags flags = {},
               std::optional<PrototypeDictionary> dict = std::nullopt, double gate_bias = -2.0);

  const ScisFlags& flags() const { return flags_; }
  const std::optional<PrototypeDictionary>& dictionary() const { return dict_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }

  /// Test hook forwarded to every IDM instance: G = 0.
  bool clamp_gates = false;

  PlannerOutput forward(const Scene& scene) const;
  PlannerOutput forward(const Scene& scene, const ParamStore& params) const;

  /// Weighted training loss for one scene (a scalar tensor).
  Tensor loss(const Scene& scene, const ParamStore& params, const TrainConfig& cfg,
              LossBreakdown* parts = nullptr) const;

  std::size_t backbone_param_count() const;
  std::size_t scis_param_count() const;
  std::size_t pdm_instances() const { return flags_.pdm ? 2 : 0; }
  std::size_t idm_instances() const { return flags_.idm ? 4 : 0; }

  /// SHA-256 over flags, dictionary hash and every parameter.
  std::string identity_hash() const;

  TrainConfig train_config;          // recorded by the training entry points
  std::vector<double> loss_history;  // mean batch loss per epoch
  double initial_loss = 0.0;         // full-pass loss before the first update

 private:
  ScisFlags flags_;
  std::optional<PrototypeDictionary> dict_;
  ParamStore params_;
};

bool is_scis_param(const std::string& name);

/// Stage 1: trains the plain planner. Asserts the training loss decreased
/// whenever the learning rate is positive.
PlannerModel pretrain_baseline(const Dataset& data, const TrainConfig& cfg);

/// Stage 2: trains a fresh planner with SCIS against a frozen dictionary.
/// With cfg.warm_start the backbone starts from `warm` instead.
PlannerModel train_causal(const Dataset& data, const PrototypeDictionary& dict,
                          const TrainConfig& cfg, const PlannerModel* warm = nullptr);

/// Mean per-scene loss without updating anything.
double dataset_loss(const PlannerModel& model, const Dataset& data, const TrainConfig& cfg);

/// Detached outputs for one scene.
PlannerOutput predict(const PlannerModel& model, const Scene& scene);
std::array<Vec2, kHorizon> predicted_waypoints(const PlannerModel& model, const Scene& scene);

/// Object, map and agent query embeddings over a dataset, ready for clustering.
std::array<EmbeddingStore, 3> collect_embeddings(const PlannerModel& model, const Dataset& data);

// Checkpoint: {"flags", "train_config", "dict_hash", "params": {name: tensor}, "hash"}.
nlohmann::json to_json(const PlannerModel& model);
/// A causal checkpoint needs the dictionary it was trained with; a hash
/// mismatch is an error.
PlannerModel planner_from_json(const nlohmann::json& j,
                               std::optional<PrototypeDictionary> dict = std::nullopt);
void save_checkpoint(const PlannerModel& model, const std::filesystem::path& path);
PlannerModel load_checkpoint(const std::filesystem::path& path,
                             std::optional<PrototypeDictionary> dict = std::nullopt);

}  // namespace scis
