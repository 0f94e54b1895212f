#include "scis/planner.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "scis/hash.hpp"
#include "scis/parallel.hpp"
#include "scis/rng.hpp"

namespace scis {

namespace {

constexpr double kPositionScale = 5.0;   // waypoint outputs are in units of 5 toy units
constexpr double kAgentPosScale = 10.0;
constexpr double kVelocityScale = 3.0;
constexpr std::uint64_t kScisStream = 0x5c15;

}  // namespace

// ---- TrainConfig ---------------------------------------------------------------------

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be finite and nonnegative");
  }
  for (double w : {w_classification, w_motion, w_planning}) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be positive");
  }
  if (!std::isfinite(gate_bias)) throw ConfigError("gate bias must be finite");
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"learning_rate", cfg.learning_rate},
          {"seed", cfg.seed},
          {"w_classification", cfg.w_classification},
          {"w_motion", cfg.w_motion},
          {"w_planning", cfg.w_planning},
          {"use_pdm", cfg.flags.pdm},
          {"use_idm", cfg.flags.idm},
          {"gate_bias", cfg.gate_bias},
          {"warm_start", cfg.warm_start}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.w_classification = j.value("w_classification", cfg.w_classification);
  cfg.w_motion = j.value("w_motion", cfg.w_motion);
  cfg.w_planning = j.value("w_planning", cfg.w_planning);
  cfg.flags.pdm = j.value("use_pdm", false);
  cfg.flags.idm = j.value("use_idm", false);
  cfg.gate_bias = j.value("gate_bias", cfg.gate_bias);
  cfg.warm_start = j.value("warm_start", false);
  cfg.validate();
  return cfg;
}

// ---- ParamStore --------------------------------------------------------------------------

void ParamStore::add(const std::string& name, Tensor t) {
  if (!tensors_.emplace(name, std::move(t)).second) {
    throw std::invalid_argument("duplicate parameter '" + name + "'");
  }
}

const Tensor& ParamStore::operator[](const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no parameter '" + name + "'");
  return it->second;
}

Tensor& ParamStore::operator[](const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::numel() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_) n += t.numel();
  return n;
}

ParamStore ParamStore::fresh_leaves() const {
  ParamStore out;
  for (const auto& [name, t] : tensors_) out.tensors_.emplace(name, t.clone(true));
  return out;
}

bool is_scis_param(const std::string& name) {
  return name.starts_with("pdm_") || name.starts_with("idm_");
}

// ---- construction ----------------------------------------------------------------------------

namespace {

Tensor gaussian(Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal(0.0, stddev);
  return Tensor(std::move(shape), std::move(v));
}

void add_mlp(ParamStore& p, const std::string& name, std::vector<std::size_t> widths, Rng& rng) {
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool followed_by_relu = i + 2 < widths.size();
    const double gain = followed_by_relu ? 2.0 : 1.0;
    const std::string prefix = name + "." + std::to_string(i);
    p.add(prefix + ".w", gaussian({widths[i], widths[i + 1]},
                                  std::sqrt(gain / static_cast<double>(widths[i])), rng));
    p.add(prefix + ".b", Tensor::zeros({widths[i + 1]}));
  }
}

MlpParams mlp_view(const ParamStore& p, const std::string& name) {
  MlpParams m;
  for (std::size_t i = 0;; ++i) {
    const std::string prefix = name + "." + std::to_string(i);
    if (!p.contains(prefix + ".w")) break;
    m.layers.push_back({p[prefix + ".w"], p[prefix + ".b"]});
  }
  return m;
}

void add_attention(ParamStore& p, const std::string& name, std::size_t dim, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  for (const char* m : {".wq", ".wk", ".wv", ".wo"}) p.add(name + m, gaussian({dim, dim}, s, rng));
}

Tensor attend(const ParamStore& p, const std::string& name, const Tensor& q, const Tensor& kv) {
  return multi_head_cross_attention(q, kv, p[name + ".wq"], p[name + ".wk"], p[name + ".wv"],
                                    p[name + ".wo"], PlannerModel::kHeads);
}

void add_idm(ParamStore& p, const std::string& name, double gate_bias, Rng& rng) {
  IdmParams idm = make_idm_params(PlannerModel::kDim, PlannerModel::kHeads, rng, gate_bias);
  p.add(name + ".wq", idm.w_query.detach());
  p.add(name + ".wk", idm.w_key.detach());
  p.add(name + ".wv", idm.w_value.detach());
  p.add(name + ".wo", idm.w_out.detach());
  for (std::size_t i = 0; i < idm.gate.layers.size(); ++i) {
    const std::string prefix = name + ".gate." + std::to_string(i);
    p.add(prefix + ".w", idm.gate.layers[i].weight.detach());
    p.add(prefix + ".b", idm.gate.layers[i].bias.detach());
  }
}

IdmParams idm_view(const ParamStore& p, const std::string& name, bool clamp) {
  IdmParams idm;
  idm.w_query = p[name + ".wq"];
  idm.w_key = p[name + ".wk"];
  idm.w_value = p[name + ".wv"];
  idm.w_out = p[name + ".wo"];
  idm.heads = PlannerModel::kHeads;
  idm.gate = mlp_view(p, name + ".gate");
  idm.clamp_gate_closed = clamp;
  return idm;
}

void add_pdm(ParamStore& p, const std::string& name, std::size_t k, std::size_t classes, Rng& rng) {
  PdmParams pdm = make_pdm_params(k, classes, PlannerModel::kDim, rng);
  p.add(name + ".b_proto", pdm.b_proto.detach());
  p.add(name + ".lambda", pdm.lambda.detach());
}

PdmParams pdm_view(const ParamStore& p, const std::string& name) {
  PdmParams pdm;
  pdm.b_proto = p[name + ".b_proto"];
  pdm.lambda = p[name + ".lambda"];
  pdm.scale = std::sqrt(static_cast<double>(PlannerModel::kDim));
  return pdm;
}

Tensor rows_tensor(const std::vector<std::vector<double>>& rows, std::size_t width) {
  std::vector<double> flat;
  flat.reserve(rows.size() * width);
  for (const auto& r : rows) {
    if (r.size() != width) {
      throw ShapeError("feature row has width " + std::to_string(r.size()) + ", expected " +
                       std::to_string(width));
    }
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), width}, std::move(flat));
}

Tensor agent_inputs(const Scene& s) {
  std::vector<double> v;
  v.reserve(s.agents.size() * 4);
  for (const auto& a : s.agents) {
    v.insert(v.end(), {a.pos.x / kAgentPosScale, a.pos.y / kAgentPosScale, a.vel.x / kVelocityScale,
                       a.vel.y / kVelocityScale});
  }
  return Tensor({s.agents.size(), 4}, std::move(v));
}

Tensor history_inputs(const Scene& s) {
  std::vector<double> v;
  for (const auto& h : s.ego_history) v.insert(v.end(), {h.x / kVelocityScale, h.y / kVelocityScale});
  return Tensor({1, 2 * kHistorySteps}, std::move(v));
}

Tensor motion_targets(const Scene& s) {
  std::vector<double> v;
  v.reserve(s.agents.size() * 2 * kHorizon);
  for (const auto& a : s.agents) {
    for (std::size_t k = 0; k < kHorizon; ++k) {
      const double t = static_cast<double>(k + 1) * kStepSeconds;
      v.insert(v.end(), {a.vel.x * t / kPositionScale, a.vel.y * t / kPositionScale});
    }
  }
  return Tensor({s.agents.size(), 2 * kHorizon}, std::move(v));
}

Tensor plan_targets(const Scene& s) {
  std::vector<double> v;
  for (const auto& w : s.expert) v.insert(v.end(), {w.x / kPositionScale, w.y / kPositionScale});
  return Tensor({1, 2 * kHorizon}, std::move(v));
}

}  // namespace

PlannerModel::PlannerModel(std::uint64_t seed, ScisFlags flags,
                           std::optional<PrototypeDictionary> dict, double gate_bias)
    : flags_(flags), dict_(std::move(dict)) {
  train_config.seed = seed;
  if (flags_.any()) {
    if (!dict_) throw ConfigError("SCIS modules need a prototype dictionary");
    if (dict_->dim() != kDim || dict_->z_map.dim(1) != kDim || dict_->z_agent.dim(1) != kDim) {
      throw ConfigError("dictionary dimension " + std::to_string(dict_->dim()) +
                        " does not match model dimension " + std::to_string(kDim));
    }
    dict_->verify();
  }

  Rng rng(seed);
  add_mlp(params_, "obj_enc", {kFeatureDim, kHidden, kDim}, rng);
  add_mlp(params_, "map_enc", {kFeatureDim, kHidden, kDim}, rng);
  add_mlp(params_, "obj_cls", {kDim, kObjectClasses}, rng);
  add_mlp(params_, "map_cls", {kDim, kMapClasses}, rng);
  add_mlp(params_, "agent_enc", {4, kHidden, kDim}, rng);
  add_attention(params_, "agent_attn", kDim, rng);
  add_mlp(params_, "motion", {kDim, 2 * kHorizon}, rng);
  add_mlp(params_, "ego_enc", {2 * kHistorySteps, kHidden, kDim}, rng);
  params_.add("ego_query", gaussian({1, kDim}, 1.0 / std::sqrt(static_cast<double>(kDim)), rng));
  add_attention(params_, "ego_attn", kDim, rng);
  add_mlp(params_, "plan", {kDim, kHidden, 2 * kHorizon}, rng);

  Rng scis_rng(derive_seed(seed, kScisStream));
  if (flags_.pdm) {
    add_pdm(params_, "pdm_obj", dict_->z_object.dim(0), kObjectClasses, scis_rng);
    add_pdm(params_, "pdm_map", dict_->z_map.dim(0), kMapClasses, scis_rng);
  }
  if (flags_.idm) {
    for (const char* name : {"idm_obj", "idm_map_pred", "idm_agent", "idm_map_plan"}) {
      add_idm(params_, name, gate_bias, scis_rng);
    }
  }
}

PlannerOutput PlannerModel::forward(const Scene& scene) const { return forward(scene, params_); }

PlannerOutput PlannerModel::forward(const Scene& scene, const ParamStore& p) const {
  if (scene.object_features.empty() || scene.map_features.empty() || scene.agents.empty()) {
    throw ShapeError("scene needs at least one object, map element and agent");
  }
  PlannerOutput out;

  // Perception. The ego-status embedding conditions the shared scene encoding,
  // so every downstream query can carry it.
  Tensor status = reshape(mlp_forward(mlp_view(p, "ego_enc"), history_inputs(scene)), {kDim});
  Tensor q_obj = mlp_forward(mlp_view(p, "obj_enc"),
                             add_lastdim(rows_tensor(scene.object_features, kFeatureDim), status));
  Tensor q_map = mlp_forward(mlp_view(p, "map_enc"),
                             add_lastdim(rows_tensor(scene.map_features, kFeatureDim), status));
  Tensor obj_logits = mlp_forward(mlp_view(p, "obj_cls"), q_obj);
  Tensor map_logits = mlp_forward(mlp_view(p, "map_cls"), q_map);
  if (flags_.pdm) {
    obj_logits = pdm_forward(q_obj, obj_logits, dict_->z_object, pdm_view(p, "pdm_obj"));
    map_logits = pdm_forward(q_map, map_logits, dict_->z_map, pdm_view(p, "pdm_map"));
  }

  // Prediction: agents attend over de-confounded perception queries.
  Tensor obj_for_pred = q_obj, map_for_pred = q_map;
  if (flags_.idm) {
    obj_for_pred = idm_forward(q_obj, dict_->z_map, idm_view(p, "idm_obj", clamp_gates));
    map_for_pred = idm_forward(q_map, dict_->z_object, idm_view(p, "idm_map_pred", clamp_gates));
  }
  Tensor a0 = mlp_forward(mlp_view(p, "agent_enc"), agent_inputs(scene));
  Tensor agents = add(a0, attend(p, "agent_attn", a0, concat_rows(obj_for_pred, map_for_pred)));
  Tensor motion = mlp_forward(mlp_view(p, "motion"), agents);

  // Planning: the ego query attends over de-confounded agents and maps.
  Tensor agents_for_plan = agents, map_for_plan = q_map;
  if (flags_.idm) {
    agents_for_plan = idm_forward(agents, dict_->z_map, idm_view(p, "idm_agent", clamp_gates));
    map_for_plan = idm_forward(q_map, dict_->z_agent, idm_view(p, "idm_map_plan", clamp_gates));
  }
  Tensor e0 = p["ego_query"];
  Tensor ego = add(e0, attend(p, "ego_attn", e0, concat_rows(agents_for_plan, map_for_plan)));
  Tensor plan = mlp_forward(mlp_view(p, "plan"), ego);

  out.object_logits = obj_logits;
  out.map_logits = map_logits;
  out.agent_motion = motion;
  out.ego_plan = plan;
  out.object_queries = q_obj;
  out.map_queries = q_map;
  out.agent_queries = agents;
  out.ego_query = ego;
  return out;
}

Tensor PlannerModel::loss(const Scene& scene, const ParamStore& p, const TrainConfig& cfg,
                          LossBreakdown* parts) const {
  const PlannerOutput out = forward(scene, p);
  Tensor cls = add(cross_entropy(out.object_logits, scene.object_labels),
                   cross_entropy(out.map_logits, scene.map_labels));
  Tensor mot = mse(out.agent_motion, motion_targets(scene));
  Tensor pln = mse(out.ego_plan, plan_targets(scene));
  Tensor total = add_scalars({scale(cls, cfg.w_classification), scale(mot, cfg.w_motion),
                              scale(pln, cfg.w_planning)});
  if (parts) *parts = {cls.item(), mot.item(), pln.item(), total.item()};
  return total;
}

std::size_t PlannerModel::backbone_param_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_)
    if (!is_scis_param(name)) n += t.numel();
  return n;
}

std::size_t PlannerModel::scis_param_count() const { return params_.numel() - backbone_param_count(); }

std::string PlannerModel::identity_hash() const {
  ContentHasher h;
  h.add(std::string_view(flags_.pdm ? "pdm" : "-"));
  h.add(std::string_view(flags_.idm ? "idm" : "-"));
  h.add(std::string_view(dict_ ? dict_->hash : std::string("-")));
  for (const auto& [name, t] : params_) {
    h.add(std::string_view(name));
    h.add(t.data());
  }
  return h.hex();
}

// ---- training ------------------------------------------------------------------------------

namespace {

void check_dictionary(const PlannerModel& model) {
  if (!model.dictionary()) return;
  const auto& d = *model.dictionary();
  for (const Tensor* z : {&d.z_object, &d.z_map, &d.z_agent}) {
    if (z->has_grad()) throw FrozenDictionaryError("a gradient reached the prototype dictionary");
  }
  d.verify();
}

void run_training(PlannerModel& model, const Dataset& data, const TrainConfig& cfg) {
  if (data.empty()) throw ContractError("cannot train on an empty dataset");
  model.train_config = cfg;
  model.initial_loss = dataset_loss(model, data, cfg);
  model.loss_history.clear();

  std::vector<std::string> names;
  for (const auto& [name, _] : model.params()) names.push_back(name);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffler(derive_seed(cfg.seed, 0xe90c + epoch));
    shuffler.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      std::vector<std::vector<std::vector<double>>> grads(count);
      std::vector<double> losses(count);
      parallel_for(count, [&](std::size_t b) {
        const ParamStore leaves = model.params().fresh_leaves();
        Tensor l = model.loss(data.scenes[order[start + b]], leaves, cfg);
        backward(l);
        losses[b] = l.item();
        auto& g = grads[b];
        g.reserve(names.size());
        for (const auto& name : names) {
          const Tensor& t = leaves[name];
          g.emplace_back(t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                      : std::vector<double>(t.numel(), 0.0));
        }
      });
      // Reduction in batch order keeps results independent of the thread count.
      double batch_loss = 0.0;
      for (double l : losses) batch_loss += l;
      batch_loss /= static_cast<double>(count);
      if (!std::isfinite(batch_loss)) throw TrainingError("training loss is not finite", step);
      check_dictionary(model);
      const double step_size = cfg.learning_rate / static_cast<double>(count);
      for (std::size_t i = 0; i < names.size(); ++i) {
        auto w = model.params()[names[i]].mutable_data();
        std::vector<double> total(w.size(), 0.0);
        for (std::size_t b = 0; b < count; ++b)
          for (std::size_t j = 0; j < w.size(); ++j) total[j] += grads[b][i][j];
        for (std::size_t j = 0; j < w.size(); ++j) w[j] -= step_size * total[j];
      }
      epoch_loss += batch_loss;
      ++batches;
    }
    model.loss_history.push_back(epoch_loss / static_cast<double>(batches));
  }
  if (cfg.learning_rate > 0.0 && !(model.loss_history.back() < model.initial_loss)) {
    throw TrainingError("training loss did not decrease (initial " +
                            std::to_string(model.initial_loss) + ", final " +
                            std::to_string(model.loss_history.back()) + ")",
                        step);
  }
}

}  // namespace

PlannerModel pretrain_baseline(const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.flags.any()) {
    throw ConfigError("pretrain_baseline trains the plain planner; use train_causal for SCIS flags");
  }
  PlannerModel model(cfg.seed);
  run_training(model, data, cfg);
  return model;
}

PlannerModel train_causal(const Dataset& data, const PrototypeDictionary& dict,
                          const TrainConfig& cfg, const PlannerModel* warm) {
  cfg.validate();
  if (!cfg.flags.any()) {
    throw ConfigError("train_causal needs --pdm and/or --idm; without them use pretrain_baseline");
  }
  PlannerModel model(cfg.seed, cfg.flags, dict, cfg.gate_bias);
  if (cfg.warm_start) {
    if (!warm) throw ConfigError("warm start requested without a baseline checkpoint");
    for (const auto& [name, t] : warm->params()) {
      if (is_scis_param(name)) continue;
      model.params()[name] = t.detach();
    }
  }
  run_training(model, data, cfg);
  return model;
}

double dataset_loss(const PlannerModel& model, const Dataset& data, const TrainConfig& cfg) {
  if (data.empty()) throw ContractError("cannot evaluate a loss on an empty dataset");
  std::vector<double> losses(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    losses[i] = model.loss(data.scenes[i], model.params(), cfg).item();
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(data.size());
}

PlannerOutput predict(const PlannerModel& model, const Scene& scene) {
  PlannerOutput out = model.forward(scene);
  out.ego_plan = scale(reshape(out.ego_plan, {kHorizon, 2}), kPositionScale);
  out.agent_motion = scale(out.agent_motion, kPositionScale);
  return out;
}

std::array<Vec2, kHorizon> predicted_waypoints(const PlannerModel& model, const Scene& scene) {
  const Tensor plan = predict(model, scene).ego_plan;
  std::array<Vec2, kHorizon> w;
  for (std::size_t k = 0; k < kHorizon; ++k) w[k] = {plan.at(k, 0), plan.at(k, 1)};
  return w;
}

std::array<EmbeddingStore, 3> collect_embeddings(const PlannerModel& model, const Dataset& data) {
  if (data.empty()) throw ContractError("cannot collect embeddings from an empty dataset");
  std::vector<PlannerOutput> outs(data.size());
  parallel_for(data.size(), [&](std::size_t i) { outs[i] = model.forward(data.scenes[i]); });
  std::array<EmbeddingStore, 3> stores{EmbeddingStore{Domain::object, {}, {}},
                                       EmbeddingStore{Domain::map, {}, {}},
                                       EmbeddingStore{Domain::agent, {}, {}}};
  std::array<std::vector<double>, 3> flat;
  for (std::size_t i = 0; i < outs.size(); ++i) {
    const std::array<const Tensor*, 3> q{&outs[i].object_queries, &outs[i].map_queries,
                                         &outs[i].agent_queries};
    for (std::size_t d = 0; d < 3; ++d) {
      const auto values = q[d]->data();
      flat[d].insert(flat[d].end(), values.begin(), values.end());
      for (std::size_t r = 0; r < q[d]->dim(0); ++r) stores[d].provenance.emplace_back(data.scenes[i].id, r);
    }
  }
  for (std::size_t d = 0; d < 3; ++d) {
    const std::size_t rows = stores[d].provenance.size();
    stores[d].rows = Tensor({rows, PlannerModel::kDim}, std::move(flat[d]));
  }
  return stores;
}

// ---- checkpoints ----------------------------------------------------------------------------

nlohmann::json to_json(const PlannerModel& model) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : model.params()) params[name] = to_json(t);
  nlohmann::json j{{"flags", {{"pdm", model.flags().pdm}, {"idm", model.flags().idm}}},
                   {"train_config", to_json(model.train_config)},
                   {"dict_hash", model.dictionary() ? nlohmann::json(model.dictionary()->hash)
                                                    : nlohmann::json(nullptr)},
                   {"initial_loss", model.initial_loss},
                   {"loss_history", model.loss_history},
                   {"params", params},
                   {"hash", model.identity_hash()}};
  return j;
}

PlannerModel planner_from_json(const nlohmann::json& j, std::optional<PrototypeDictionary> dict) {
  ScisFlags flags{j.at("flags").at("pdm").get<bool>(), j.at("flags").at("idm").get<bool>()};
  const TrainConfig cfg = train_config_from_json(j.at("train_config"));
  if (flags.any()) {
    if (!dict) throw ConfigError("this checkpoint was trained with a dictionary; pass it with --dict");
    const auto recorded = j.at("dict_hash").get<std::string>();
    if (recorded != dict->hash) {
      throw FrozenDictionaryError("checkpoint expects dictionary " + recorded + ", got " + dict->hash);
    }
  } else {
    dict.reset();
  }
  PlannerModel model(cfg.seed, flags, std::move(dict), cfg.gate_bias);
  model.train_config = cfg;
  const auto& params = j.at("params");
  if (params.size() != model.params().size()) {
    throw ConfigError("checkpoint has " + std::to_string(params.size()) + " parameters, model has " +
                      std::to_string(model.params().size()));
  }
  for (auto& [name, t] : model.params()) {
    Tensor loaded = tensor_from_json(params.at(name));
    if (loaded.shape() != t.shape()) {
      throw ShapeError("parameter " + name + ": checkpoint " + shape_str(loaded.shape()) +
                       " vs model " + shape_str(t.shape()));
    }
    t = loaded.detach();
  }
  model.initial_loss = j.value("initial_loss", 0.0);
  model.loss_history = j.value("loss_history", std::vector<double>{});
  if (j.contains("hash") && j.at("hash").get<std::string>() != model.identity_hash()) {
    throw ConfigError("checkpoint content does not match its recorded hash");
  }
  return model;
}

void save_checkpoint(const PlannerModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(model).dump() << '\n';
}

PlannerModel load_checkpoint(const std::filesystem::path& path,
                             std::optional<PrototypeDictionary> dict) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return planner_from_json(nlohmann::json::parse(in), std::move(dict));
}

}  // namespace scis
