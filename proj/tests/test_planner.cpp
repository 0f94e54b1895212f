#include <gtest/gtest.h>

#include <cstdlib>
#include <numeric>

#include "scis/grad_check.hpp"
#include "scis/metrics.hpp"
#include "scis/planner.hpp"
#include "test_util.hpp"

using namespace scis;

namespace {

struct Small {
  Dataset train, val;
  PlannerModel baseline{0};
  PrototypeDictionary dict;
};

TrainConfig quick(std::uint64_t seed = 3, std::size_t epochs = 2) {
  TrainConfig c;
  c.seed = seed;
  c.epochs = epochs;
  return c;
}

const Small& small() {
  static const Small s = [] {
    Small out;
    ScenarioConfig sc;
    sc.seed = 21;
    out.train = generate_dataset(sc, 160);
    out.val = generate_dataset(sc, 60, Split::val);
    out.baseline = pretrain_baseline(out.train, quick());
    out.dict = build_dictionary(collect_embeddings(out.baseline, out.train), {}, ClusterAlgo::kmeans_pp, 4);
    return out;
  }();
  return s;
}

bool same_params(const ParamStore& a, const ParamStore& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, t] : a)
    if (!b.contains(name) || !test::bit_equal(t, b[name])) return false;
  return true;
}

struct ThreadsEnv {
  explicit ThreadsEnv(const char* v) { setenv("SCIS_THREADS", v, 1); }
  ~ThreadsEnv() { unsetenv("SCIS_THREADS"); }
};

}  // namespace

TEST(Planner, ParameterCensus) {
  const auto& s = small();
  const PlannerModel base(5);
  const PlannerModel full(5, {true, true}, s.dict);
  const PlannerModel pdm_only(5, {true, false}, s.dict);
  EXPECT_EQ(full.pdm_instances(), 2u);
  EXPECT_EQ(full.idm_instances(), 4u);
  EXPECT_EQ(pdm_only.idm_instances(), 0u);
  EXPECT_EQ(base.scis_param_count(), 0u);
  // Same backbone with or without the extra modules.
  EXPECT_EQ(full.backbone_param_count(), base.backbone_param_count());
  for (const auto& [name, t] : base.params()) EXPECT_TRUE(test::bit_equal(t, full.params()[name])) << name;

  const std::size_t d = PlannerModel::kDim;
  const std::size_t pdm = (s.dict.z_object.dim(0) * kObjectClasses + kObjectClasses) +
                          (s.dict.z_map.dim(0) * kMapClasses + kMapClasses);
  const std::size_t idm = 4 * d * d + (2 * d * d + d) + (d * d + d);
  EXPECT_EQ(full.scis_param_count(), pdm + 4 * idm);
  EXPECT_EQ(pdm_only.scis_param_count(), pdm);
  EXPECT_EQ(full.params().numel(), full.backbone_param_count() + full.scis_param_count());
}

TEST(Planner, IdentityAtInitialization) {
  const auto& s = small();
  const PlannerModel base(9);
  PlannerModel causal(9, {true, true}, s.dict);
  causal.clamp_gates = true;
  for (const auto& scene : s.val.scenes) {
    const PlannerOutput a = base.forward(scene), b = causal.forward(scene);
    EXPECT_TRUE(test::bit_equal(a.ego_plan, b.ego_plan));
    EXPECT_TRUE(test::bit_equal(a.agent_motion, b.agent_motion));
    EXPECT_TRUE(test::bit_equal(a.object_logits, b.object_logits));
    EXPECT_TRUE(test::bit_equal(a.map_logits, b.map_logits));
  }
  const MetricsReport ra = evaluate(base, s.val), rb = evaluate(causal, s.val);
  EXPECT_NEAR(ra.l2_avg, rb.l2_avg, 1e-9);
  EXPECT_NEAR(ra.collision_rate, rb.collision_rate, 1e-9);
}

TEST(Planner, UnclampedGateChangesOutput) {
  const auto& s = small();
  const PlannerModel base(9);
  const PlannerModel causal(9, {false, true}, s.dict);
  EXPECT_FALSE(test::bit_equal(base.forward(s.val.scenes[0]).ego_plan, causal.forward(s.val.scenes[0]).ego_plan));
}

TEST(Planner, ZeroLearningRateLeavesParameters) {
  const auto& s = small();
  TrainConfig c = quick(4, 1);
  c.learning_rate = 0.0;
  const PlannerModel trained = pretrain_baseline(s.train, c);
  EXPECT_TRUE(same_params(trained.params(), PlannerModel(4).params()));
  EXPECT_NEAR(trained.loss_history.back(), trained.initial_loss, 1e-12);
}

TEST(Planner, SameSeedSameHash) {
  const auto& s = small();
  EXPECT_EQ(pretrain_baseline(s.train, quick(6, 1)).identity_hash(), pretrain_baseline(s.train, quick(6, 1)).identity_hash());
  EXPECT_NE(pretrain_baseline(s.train, quick(6, 1)).identity_hash(), pretrain_baseline(s.train, quick(7, 1)).identity_hash());
}

TEST(Planner, ThreadCountDoesNotChangeTraining) {
  const auto& s = small();
  TrainConfig c = quick(8, 1);
  c.flags = {true, true};
  std::string one, four;
  {
    ThreadsEnv env("1");
    one = train_causal(s.train, s.dict, c).identity_hash();
  }
  {
    ThreadsEnv env("4");
    four = train_causal(s.train, s.dict, c).identity_hash();
  }
  EXPECT_EQ(one, four);
}

TEST(Planner, CausalTrainingKeepsDictionaryFrozen) {
  const auto& s = small();
  TrainConfig c = quick(10, 1);
  c.flags = {true, true};
  const PlannerModel m = train_causal(s.train, s.dict, c);
  ASSERT_TRUE(m.dictionary());
  EXPECT_EQ(m.dictionary()->hash, s.dict.hash);
  EXPECT_NO_THROW(m.dictionary()->verify());
  // Every SCIS parameter moved.
  const PlannerModel init(10, {true, true}, s.dict);
  for (const auto& [name, t] : m.params())
    if (is_scis_param(name)) EXPECT_FALSE(test::bit_equal(t, init.params()[name])) << name;
}

TEST(Planner, EntryPointPreconditions) {
  const auto& s = small();
  TrainConfig c = quick();
  EXPECT_THROW(train_causal(s.train, s.dict, c), ConfigError);
  c.flags = {true, false};
  EXPECT_THROW(pretrain_baseline(s.train, c), ConfigError);
  EXPECT_THROW(PlannerModel(0, {true, true}), ConfigError);

  PrototypeDictionary narrow = s.dict;
  narrow.z_object = Tensor::zeros({3, 8});
  narrow.z_map = Tensor::zeros({3, 8});
  narrow.z_agent = Tensor::zeros({3, 8});
  narrow.hash = narrow.content_hash();
  EXPECT_THROW(PlannerModel(0, {true, true}, narrow), ConfigError);

  TrainConfig bad;
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.learning_rate = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.w_motion = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Planner, DivergenceReportsStep) {
  const auto& s = small();
  TrainConfig c = quick(11, 3);
  c.learning_rate = 1e8;
  try {
    pretrain_baseline(s.train, c);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
    EXPECT_LT(e.step(), 3 * (s.train.size() / c.batch_size + 1));
  }
}

TEST(Planner, PredictShapesAndZeroFeatureScene) {
  const auto& s = small();
  const PlannerModel m(12, {true, true}, s.dict);
  Scene blank = s.val.scenes[0];
  for (auto& f : blank.object_features) std::fill(f.begin(), f.end(), 0.0);
  for (auto& f : blank.map_features) std::fill(f.begin(), f.end(), 0.0);
  for (auto& a : blank.agents) a = {};
  for (auto& h : blank.ego_history) h = {};
  const PlannerOutput out = predict(m, blank);
  EXPECT_EQ(out.ego_plan.shape(), (Shape{kHorizon, 2}));
  EXPECT_EQ(out.agent_motion.shape(), (Shape{blank.agents.size(), 2 * kHorizon}));
  EXPECT_EQ(out.object_logits.shape(), (Shape{blank.object_features.size(), kObjectClasses}));
  EXPECT_EQ(out.map_logits.shape(), (Shape{blank.map_features.size(), kMapClasses}));
  for (const Tensor* t : {&out.ego_plan, &out.agent_motion, &out.object_logits, &out.map_logits})
    for (double v : t->data()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_EQ(predicted_waypoints(m, blank).size(), 6u);

  Scene empty = blank;
  empty.agents.clear();
  EXPECT_THROW(m.forward(empty), ShapeError);
}

TEST(Planner, PredictIsInvariantToJointDictionaryPermutation) {
  const auto& s = small();
  TrainConfig c = quick(13, 1);
  c.flags = {true, true};
  const PlannerModel trained = train_causal(s.train, s.dict, c);

  auto permute_rows = [](const Tensor& t, const std::vector<std::size_t>& perm) {
    const std::size_t w = t.dim(1);
    std::vector<double> v;
    for (auto r : perm) v.insert(v.end(), t.data().begin() + r * w, t.data().begin() + (r + 1) * w);
    return Tensor(t.shape(), std::move(v));
  };
  auto reversed = [](std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.rbegin(), p.rend(), 0);
    return p;
  };
  PrototypeDictionary dict = s.dict;
  const auto po = reversed(dict.z_object.dim(0)), pm = reversed(dict.z_map.dim(0)), pa = reversed(dict.z_agent.dim(0));
  dict.z_object = permute_rows(dict.z_object, po);
  dict.z_map = permute_rows(dict.z_map, pm);
  dict.z_agent = permute_rows(dict.z_agent, pa);
  dict.hash = dict.content_hash();

  PlannerModel permuted(13, {true, true}, dict);
  for (auto& [name, t] : permuted.params()) t = trained.params()[name].clone();
  permuted.params()["pdm_obj.b_proto"] = permute_rows(trained.params()["pdm_obj.b_proto"], po);
  permuted.params()["pdm_map.b_proto"] = permute_rows(trained.params()["pdm_map.b_proto"], pm);

  for (const auto& scene : s.val.scenes) {
    const PlannerOutput a = predict(trained, scene), b = predict(permuted, scene);
    for (std::size_t i = 0; i < a.ego_plan.numel(); ++i) EXPECT_NEAR(a.ego_plan[i], b.ego_plan[i], 1e-12);
    for (std::size_t i = 0; i < a.object_logits.numel(); ++i)
      EXPECT_NEAR(a.object_logits[i], b.object_logits[i], 1e-12);
  }
}

TEST(Planner, EndToEndGradientCheck) {
  const auto& s = small();
  PlannerModel m(14, {true, true}, s.dict, 0.0);
  // Nonzero lambda so the PDM path carries gradient into B_proto.
  Rng rng(14);
  m.params()["pdm_obj.lambda"] = test::random_tensor({kObjectClasses}, rng);
  m.params()["pdm_map.lambda"] = test::random_tensor({kMapClasses}, rng);
  const ParamStore leaves = m.params().fresh_leaves();
  std::vector<Tensor> list;
  for (const auto& [name, t] : leaves) list.push_back(t);
  const Scene& scene = s.train.scenes[3];
  const TrainConfig cfg;
  EXPECT_LT(grad_check([&] { return m.loss(scene, leaves, cfg); }, list), 1e-4);
}

TEST(Planner, CheckpointRoundTripAndMismatch) {
  const auto& s = small();
  TrainConfig c = quick(15, 1);
  c.flags = {true, true};
  const PlannerModel m = train_causal(s.train, s.dict, c);
  const nlohmann::json j = nlohmann::json::parse(to_json(m).dump());
  const PlannerModel back = planner_from_json(j, s.dict);
  EXPECT_EQ(back.identity_hash(), m.identity_hash());
  EXPECT_EQ(back.loss_history, m.loss_history);
  EXPECT_TRUE(test::bit_equal(predict(back, s.val.scenes[0]).ego_plan, predict(m, s.val.scenes[0]).ego_plan));

  EXPECT_THROW(planner_from_json(j), ConfigError);
  PrototypeDictionary other = build_dictionary(collect_embeddings(s.baseline, s.train), {}, ClusterAlgo::kmeans, 99);
  EXPECT_THROW(planner_from_json(j, other), FrozenDictionaryError);

  nlohmann::json tampered = j;
  tampered["params"]["plan.0.b"]["data"][0] = 1.0;
  EXPECT_THROW(planner_from_json(tampered, s.dict), ConfigError);

  const PlannerModel base = planner_from_json(nlohmann::json::parse(to_json(s.baseline).dump()));
  EXPECT_EQ(base.identity_hash(), s.baseline.identity_hash());
}

TEST(Planner, WarmStartCopiesBackbone) {
  const auto& s = small();
  TrainConfig c = quick(16, 1);
  c.flags = {false, true};
  c.warm_start = true;
  EXPECT_THROW(train_causal(s.train, s.dict, c), ConfigError);
  c.learning_rate = 0.0;
  const PlannerModel m = train_causal(s.train, s.dict, c, &s.baseline);
  for (const auto& [name, t] : s.baseline.params()) EXPECT_TRUE(test::bit_equal(t, m.params()[name])) << name;
}

TEST(Planner, EmbeddingsCarryProvenance) {
  const auto& s = small();
  const auto stores = collect_embeddings(s.baseline, s.val);
  std::size_t objects = 0;
  for (const auto& scene : s.val.scenes) objects += scene.object_features.size();
  EXPECT_EQ(stores[0].size(), objects);
  EXPECT_EQ(stores[0].dim(), PlannerModel::kDim);
  EXPECT_EQ(stores[0].provenance.front(), (std::pair<std::size_t, std::size_t>{0, 0}));
  EXPECT_EQ(stores[2].provenance.size(), stores[2].size());
}

// The reference run: 2k scenes, 20 epochs.
TEST(Planner, ReferenceConfigRegressionBounds) {
  ScenarioConfig sc;
  sc.seed = 7;
  const Dataset train = generate_dataset(sc, 2000);
  const Dataset val = generate_dataset(sc, 500, Split::val);
  TrainConfig c;
  c.seed = 1;
  const PlannerModel m = pretrain_baseline(train, c);
  EXPECT_LT(m.loss_history.back(), 0.5 * m.initial_loss);
  EXPECT_LT(evaluate(m, val).l2_avg, 0.5);
  for (std::size_t e = 1; e < m.loss_history.size(); ++e) EXPECT_TRUE(std::isfinite(m.loss_history[e]));
}
