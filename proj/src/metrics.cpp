#include "scis/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <Eigen/Dense>

#include "scis/parallel.hpp"

namespace scis {

namespace {

constexpr std::array<std::size_t, 3> kHorizonWaypoints{2, 4, 6};  // 1s, 2s, 3s

}  // namespace

std::string Condition::label() const {
  if (context_block) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_noise_%.1f", to_string(*context_block).c_str(),
                  context_magnitude);
    return buf;
  }
  if (velocity.mode == VelocityPerturbation::Mode::none) return "clean";
  return "ego_" + velocity.label();
}

Scene Condition::apply(const Scene& scene) const {
  Scene s = perturb_ego_velocity(scene, velocity);
  if (context_block) s = perturb_context_features(s, *context_block, context_magnitude, noise_seed);
  return s;
}

double l2_upto(const std::array<Vec2, kHorizon>& pred, const std::array<Vec2, kHorizon>& truth,
               std::size_t waypoints) {
  double total = 0.0;
  for (std::size_t k = 0; k < waypoints; ++k) {
    total += std::hypot(pred[k].x - truth[k].x, pred[k].y - truth[k].y);
  }
  return total / static_cast<double>(waypoints);
}

bool collides(const std::array<Vec2, kHorizon>& plan, const std::vector<AgentState>& agents) {
  for (std::size_t k = 0; k < kHorizon; ++k) {
    for (const auto& a : agents) {
      const Vec2 p = extrapolate(a, k);
      if (std::hypot(plan[k].x - p.x, plan[k].y - p.y) < kCollisionRadius) return true;
    }
  }
  return false;
}

MetricsReport score(const std::vector<std::array<Vec2, kHorizon>>& trajectories,
                    const Dataset& data) {
  if (data.empty()) throw ContractError("cannot evaluate on an empty dataset");
  if (trajectories.size() != data.size()) {
    throw ContractError("one trajectory per scene is required");
  }
  MetricsReport r;
  r.split = to_string(data.split);
  r.scene_count = data.size();
  r.seed = data.config.seed;
  std::size_t collisions = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Scene& s = data.scenes[i];
    SceneRecord rec;
    rec.scene_id = s.id;
    for (std::size_t h = 0; h < 3; ++h) rec.l2[h] = l2_upto(trajectories[i], s.expert, kHorizonWaypoints[h]);
    rec.collided = collides(trajectories[i], s.agents);
    collisions += rec.collided;
    for (std::size_t h = 0; h < 3; ++h) r.l2[h] += rec.l2[h];
    r.scenes.push_back(rec);
  }
  const double n = static_cast<double>(data.size());
  for (auto& v : r.l2) v /= n;
  r.l2_avg = (r.l2[0] + r.l2[1] + r.l2[2]) / 3.0;
  r.collision_rate = static_cast<double>(collisions) / n;
  return r;
}

MetricsReport evaluate(const PlannerModel& model, const Dataset& data, const Condition& condition,
                       const std::string& model_name) {
  if (data.empty()) throw ContractError("cannot evaluate on an empty dataset");
  std::vector<std::array<Vec2, kHorizon>> plans(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    plans[i] = predicted_waypoints(model, condition.apply(data.scenes[i]));
  });
  MetricsReport r = score(plans, data);
  r.model = model_name;
  r.model_hash = model.identity_hash();
  r.condition = condition.label();
  return r;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string report_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream out;
  out << kReportCsvHeader << '\n';
  for (const auto& r : reports) {
    out << r.model << ',' << r.model_hash << ',' << r.condition << ',' << r.split << ','
        << r.scene_count << ',' << r.seed;
    for (double v : r.l2) out << ',' << format_number(v);
    out << ',' << format_number(r.l2_avg) << ',' << format_number(r.collision_rate) << '\n';
  }
  return out.str();
}

std::string scene_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream out;
  out << kSceneCsvHeader << '\n';
  for (const auto& r : reports) {
    for (const auto& s : r.scenes) {
      out << r.model << ',' << r.condition << ',' << s.scene_id;
      for (double v : s.l2) out << ',' << format_number(v);
      out << ',' << (s.collided ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& s : r.scenes) {
    scenes.push_back({{"scene_id", s.scene_id}, {"l2", s.l2}, {"collided", s.collided}});
  }
  return {{"model", r.model},
          {"model_hash", r.model_hash},
          {"condition", r.condition},
          {"split", r.split},
          {"scenes", r.scene_count},
          {"seed", r.seed},
          {"l2_1s", r.l2[0]},
          {"l2_2s", r.l2[1]},
          {"l2_3s", r.l2[2]},
          {"l2_avg", r.l2_avg},
          {"collision_rate", r.collision_rate},
          {"per_scene", scenes}};
}

MetricsReport metrics_report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.model = j.at("model").get<std::string>();
  r.model_hash = j.at("model_hash").get<std::string>();
  r.condition = j.at("condition").get<std::string>();
  r.split = j.at("split").get<std::string>();
  r.scene_count = j.at("scenes").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.l2 = {j.at("l2_1s").get<double>(), j.at("l2_2s").get<double>(), j.at("l2_3s").get<double>()};
  r.l2_avg = j.at("l2_avg").get<double>();
  r.collision_rate = j.at("collision_rate").get<double>();
  for (const auto& s : j.at("per_scene")) {
    r.scenes.push_back({s.at("scene_id").get<std::uint64_t>(), s.at("l2").get<std::array<double, 3>>(),
                        s.at("collided").get<bool>()});
  }
  return r;
}

Projection pca_project(const Tensor& rows, std::size_t components) {
  if (rows.rank() != 2 || rows.dim(0) < 2) throw ShapeError("pca_project needs [N>=2, D] rows");
  if (components != 2) throw std::invalid_argument("pca_project supports 2 components");
  const auto n = static_cast<Eigen::Index>(rows.dim(0));
  const auto d = static_cast<Eigen::Index>(rows.dim(1));
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rows.at(i, j);
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  // Eigenvalues ascend; take the last two columns, largest first. Signs are
  // fixed so the largest-magnitude loading of each axis is positive.
  Projection p;
  std::vector<double> coords(static_cast<std::size_t>(n) * 2);
  for (int c = 0; c < 2 && c < d; ++c) {
    Eigen::VectorXd axis = eig.eigenvectors().col(d - 1 - c);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0) axis = -axis;
    p.variance[c] = std::max(0.0, eig.eigenvalues()(d - 1 - c));
    const Eigen::VectorXd proj = x * axis;
    for (Eigen::Index i = 0; i < n; ++i) coords[static_cast<std::size_t>(i) * 2 + c] = proj(i);
  }
  p.coords = Tensor({rows.dim(0), 2}, std::move(coords));
  return p;
}

}  // namespace scis
