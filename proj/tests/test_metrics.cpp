#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "scis/experiments.hpp"
#include "scis/metrics.hpp"
#include "test_util.hpp"

using namespace scis;

namespace {

const Dataset& data() {
  static const Dataset d = [] {
    ScenarioConfig c;
    c.seed = 31;
    return generate_dataset(c, 120, Split::val);
  }();
  return d;
}

struct Models {
  PlannerModel baseline{1};
  PlannerModel causal{0};
  PrototypeDictionary dict;
};

const Models& models() {
  static const Models m = [] {
    Models out;
    out.dict = build_dictionary(collect_embeddings(out.baseline, data()), {5, 2, 3}, ClusterAlgo::kmeans_pp, 2);
    out.causal = PlannerModel(2, {true, true}, out.dict, 0.0);
    return out;
  }();
  return m;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Metrics, ExpertOracleScoresZero) {
  std::vector<std::array<Vec2, kHorizon>> plans;
  double collided = 0;
  for (const auto& s : data().scenes) {
    plans.push_back(s.expert);
    bool hit = false;
    for (std::size_t k = 0; k < kHorizon; ++k)
      for (const auto& a : s.agents) {
        const double t = (k + 1) * 0.5;
        hit = hit || std::hypot(s.expert[k].x - a.pos.x - a.vel.x * t, s.expert[k].y - a.pos.y - a.vel.y * t) < 1.0;
      }
    collided += hit;
  }
  const MetricsReport r = score(plans, data());
  EXPECT_EQ(r.l2_avg, 0.0);
  for (double v : r.l2) EXPECT_EQ(v, 0.0);
  EXPECT_DOUBLE_EQ(r.collision_rate, collided / data().size());
}

TEST(Metrics, ZeroPlanScoresMeanWaypointNorm) {
  std::vector<std::array<Vec2, kHorizon>> plans(data().size());
  std::array<double, 3> want{};
  const std::array<std::size_t, 3> upto{2, 4, 6};
  for (const auto& s : data().scenes)
    for (std::size_t h = 0; h < 3; ++h) {
      double m = 0;
      for (std::size_t k = 0; k < upto[h]; ++k) m += std::hypot(s.expert[k].x, s.expert[k].y);
      want[h] += m / upto[h] / data().size();
    }
  const MetricsReport r = score(plans, data());
  for (std::size_t h = 0; h < 3; ++h) EXPECT_NEAR(r.l2[h], want[h], 1e-12);
}

TEST(Metrics, ReportInvariants) {
  const MetricsReport r = evaluate(models().baseline, data());
  EXPECT_NEAR(r.l2_avg, (r.l2[0] + r.l2[1] + r.l2[2]) / 3.0, 1e-12);
  EXPECT_GE(r.collision_rate, 0.0);
  EXPECT_LE(r.collision_rate, 1.0);
  EXPECT_EQ(r.scene_count, data().size());
  // Averages recomputable from the per-scene rows.
  std::array<double, 3> sums{};
  for (const auto& s : r.scenes)
    for (std::size_t h = 0; h < 3; ++h) sums[h] += s.l2[h];
  for (std::size_t h = 0; h < 3; ++h) EXPECT_NEAR(sums[h] / r.scenes.size(), r.l2[h], 1e-12);
  EXPECT_EQ(evaluate(models().baseline, data()), r);
}

TEST(Metrics, EmptyDatasetIsContractError) {
  Dataset empty;
  EXPECT_THROW(evaluate(models().baseline, empty), ContractError);
  EXPECT_THROW(score({}, empty), ContractError);
}

TEST(Metrics, PerturbationsOnlyTouchInputs) {
  const Condition c = Condition::ego(VelocityPerturbation::absolute(100.0));
  const MetricsReport r = evaluate(models().baseline, data(), c);
  EXPECT_EQ(r.condition, "ego_100m/s");
  std::vector<std::array<Vec2, kHorizon>> plans;
  for (const auto& s : data().scenes) plans.push_back(predicted_waypoints(models().baseline, c.apply(s)));
  EXPECT_EQ(score(plans, data()).l2, r.l2);  // scored against the clean expert
  EXPECT_EQ(Condition::clean().label(), "clean");
  EXPECT_EQ(Condition::context(ContextBlock::map, 0.9, 1).label(), "map_noise_0.9");
  EXPECT_EQ(Condition::context(ContextBlock::agent, 0.5, 1).label(), "agent_noise_0.5");
  EXPECT_EQ(Condition::ego(VelocityPerturbation::scaled(0.0)).label(), "ego_x0.0");
}

TEST(Metrics, CsvGoldenHeaders) {
  const std::string csv = report_csv({});
  EXPECT_EQ(csv, "model,model_hash,condition,split,scenes,seed,l2_1s,l2_2s,l2_3s,l2_avg,collision_rate\n");
  EXPECT_EQ(scene_csv({}), "model,condition,scene_id,l2_1s,l2_2s,l2_3s,collided\n");
  MetricsReport r;
  r.model = "m";
  r.model_hash = "h";
  r.condition = "clean";
  r.split = "val";
  r.scene_count = 1;
  r.l2 = {0.1, 0.25, 1.0 / 3.0};
  r.l2_avg = 0.5;
  r.scenes.push_back({7, {0.1, 0.25, 0.5}, true});
  EXPECT_EQ(report_csv({r}),
            std::string(kReportCsvHeader) +
                "\nm,h,clean,val,1,0,0.10000000000000001,0.25,0.33333333333333331,0.5,0\n");
  EXPECT_EQ(scene_csv({r}), std::string(kSceneCsvHeader) + "\nm,clean,7,0.10000000000000001,0.25,0.5,1\n");
}

TEST(Metrics, JsonRoundTrip) {
  const MetricsReport r = evaluate(models().causal, data(), Condition::context(ContextBlock::agent, 0.7, 3), "causal");
  EXPECT_EQ(metrics_report_from_json(nlohmann::json::parse(to_json(r).dump())), r);
}

TEST(Metrics, PcaOfRankOneCloud) {
  Rng rng(5);
  const std::vector<double> dir{0.3, -1.2, 0.5, 2.0};
  std::vector<double> rows;
  std::vector<double> ts;
  for (int i = 0; i < 50; ++i) {
    const double t = rng.normal();
    ts.push_back(t);
    for (std::size_t j = 0; j < 4; ++j) rows.push_back(1.0 + t * dir[j]);
  }
  const Projection p = pca_project(Tensor({50, 4}, rows));
  EXPECT_LT(p.variance[1], 1e-9 * p.variance[0]);
  double mean = 0, var = 0, norm2 = 0;
  for (double t : ts) mean += t / 50;
  for (double t : ts) var += (t - mean) * (t - mean) / 49;
  for (double v : dir) norm2 += v * v;
  EXPECT_NEAR(p.variance[0], var * norm2, 1e-9);
  EXPECT_EQ(p.coords.shape(), (Shape{50, 2}));
  // Coordinates reproduce the centred parameter up to the direction's length and sign.
  for (int i = 0; i < 50; ++i) EXPECT_NEAR(std::abs(p.coords.at(i, 0)), std::abs(ts[i] - mean) * std::sqrt(norm2), 1e-9);
}

TEST(Experiments, EgoNoiseGridAndCleanRow) {
  const std::vector<NamedModel> ms{{"base", ModelRole::baseline, &models().baseline},
                                   {"causal", ModelRole::causal, &models().causal}};
  const ReportTable t = run_ego_noise_sweep(ms, data());
  ASSERT_EQ(t.reports.size(), 10u);
  const std::vector<std::string> labels{"clean", "ego_x0.0", "ego_x0.5", "ego_x1.5", "ego_100m/s"};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(t.reports[i].condition, labels[i]);
  EXPECT_EQ(t.reports[0], evaluate(models().baseline, data(), Condition::clean(), "base"));
  EXPECT_DOUBLE_EQ(t.summary["degradation"]["base"]["clean"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(t.summary["degradation"]["causal"]["ego_x0.0"].get<double>(),
                   t.reports[6].l2_avg / t.reports[5].l2_avg);
  EXPECT_EQ(t.summary["role"]["causal"], "causal");
}

TEST(Experiments, ContextNoiseGridAndZeroMagnitude) {
  const std::vector<NamedModel> ms{{"base", ModelRole::baseline, &models().baseline},
                                   {"causal", ModelRole::causal, &models().causal}};
  const ReportTable t = run_context_noise_sweep(ms, data(), 4);
  ASSERT_EQ(t.reports.size(), 14u);
  EXPECT_EQ(t.reports[1].condition, "agent_noise_0.5");
  EXPECT_EQ(t.reports[6].condition, "map_noise_0.9");
  EXPECT_TRUE(t.summary["monotonicity_violations"].is_array());
  const MetricsReport zero = evaluate(models().baseline, data(), Condition::context(ContextBlock::map, 0.0, 4));
  EXPECT_EQ(zero.l2, t.reports[0].l2);
}

TEST(Experiments, SweepsNeedBothRoles) {
  const std::vector<NamedModel> only{{"base", ModelRole::baseline, &models().baseline}};
  EXPECT_THROW(run_ego_noise_sweep(only, data()), std::invalid_argument);
  const std::vector<NamedModel> missing{{"base", ModelRole::baseline, nullptr},
                                        {"causal", ModelRole::causal, &models().causal}};
  EXPECT_THROW(run_scenario_split(missing, data()), std::invalid_argument);
}

TEST(Experiments, ScenarioSplitPartitionsScenes) {
  const auto [st, lr] = split_by_context(data());
  EXPECT_EQ(st.size() + lr.size(), data().size());
  for (const auto& s : st.scenes) EXPECT_EQ(s.context, Context::straight);
  for (const auto& s : lr.scenes) EXPECT_NE(s.context, Context::straight);
  const std::vector<NamedModel> ms{{"base", ModelRole::baseline, &models().baseline},
                                   {"causal", ModelRole::causal, &models().causal}};
  const ReportTable t = run_scenario_split(ms, data());
  EXPECT_EQ(t.reports[0].split, "val/ST");
  EXPECT_EQ(t.reports[1].split, "val/LR");
  EXPECT_DOUBLE_EQ(t.summary["gap"]["base"].get<double>(), t.reports[1].l2_avg - t.reports[0].l2_avg);
}

TEST(Experiments, AblationOrderingBand) {
  EXPECT_TRUE(ablation_ordering_holds(0.74, 0.63, 0.57, 0.54, 0.05));
  EXPECT_TRUE(ablation_ordering_holds(0.74, 0.57, 0.63, 0.54, 0.05));
  EXPECT_TRUE(ablation_ordering_holds(0.70, 0.72, 0.71, 0.70, 0.05));  // inside the band
  EXPECT_FALSE(ablation_ordering_holds(0.70, 0.80, 0.71, 0.70, 0.05));
  EXPECT_FALSE(ablation_ordering_holds(0.74, 0.63, 0.57, 0.61, 0.05));
}

TEST(Experiments, EmitIsDeterministicAndRoundTrips) {
  const std::vector<NamedModel> ms{{"base", ModelRole::baseline, &models().baseline},
                                   {"causal", ModelRole::causal, &models().causal}};
  const ReportTable t = run_scenario_split(ms, data());
  const auto dir = std::filesystem::temp_directory_path() / "scis_emit_test";
  std::filesystem::remove_all(dir);
  emit(t, OutputFormat::csv, dir / "a.csv");
  emit(run_scenario_split(ms, data()), OutputFormat::csv, dir / "b.csv");
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  EXPECT_EQ(slurp(dir / "a.scenes.csv"), slurp(dir / "b.scenes.csv"));
  EXPECT_EQ(slurp(dir / "a.summary.json"), slurp(dir / "b.summary.json"));
  EXPECT_EQ(slurp(dir / "a.csv").substr(0, std::string(kReportCsvHeader).size()), kReportCsvHeader);
  emit(t, OutputFormat::json, dir / "t.json");
  const ReportTable back = report_table_from_json(nlohmann::json::parse(slurp(dir / "t.json")));
  EXPECT_EQ(back.reports, t.reports);
  EXPECT_EQ(back.summary, t.summary);
  EXPECT_EQ(back.experiment, "scenario_split");
  std::filesystem::remove_all(dir);
}

TEST(Experiments, SpecValidation) {
  ExperimentSpec spec;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec.grid = {"clean"};
  spec.inputs = {"/nonexistent/file.json"};
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec.inputs.clear();
  EXPECT_NO_THROW(spec.validate());
  EXPECT_EQ(experiment_kind_from_string("dict_sweep"), ExperimentKind::dict_sweep);
  EXPECT_THROW(experiment_kind_from_string("nope"), std::invalid_argument);
  EXPECT_THROW(output_format_from_string("xml"), std::invalid_argument);
}
