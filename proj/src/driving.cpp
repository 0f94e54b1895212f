#include "scis/driving.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "scis/rng.hpp"

namespace scis {

std::string to_string(Context c) {
  switch (c) {
    case Context::straight: return "straight";
    case Context::left: return "left";
    case Context::right: return "right";
  }
  return "?";
}

Context context_from_string(const std::string& s) {
  if (s == "straight") return Context::straight;
  if (s == "left") return Context::left;
  if (s == "right") return Context::right;
  throw std::invalid_argument("unknown context '" + s + "'");
}

std::string to_string(Split s) { return s == Split::train ? "train" : "val"; }

std::string to_string(ContextBlock b) { return b == ContextBlock::agent ? "agent" : "map"; }

void ScenarioConfig::validate() const {
  double total = 0.0;
  for (double p : context_prior) {
    if (p < 0.0) throw std::invalid_argument("context_prior entries must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("context_prior must sum to 1");
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
  };
  unit(shortcut_strength, "shortcut_strength");
  unit(cooccurrence_strength, "cooccurrence_strength");
  unit(cut_in_rate, "cut_in_rate");
  if (n_objects == 0 || n_map_elems == 0 || n_agents == 0) {
    throw std::invalid_argument("object, map and agent counts must be positive");
  }
}

nlohmann::json to_json(const ScenarioConfig& cfg) {
  return {{"context_prior", cfg.context_prior},
          {"shortcut_strength", cfg.shortcut_strength},
          {"cooccurrence_strength", cfg.cooccurrence_strength},
          {"cut_in_rate", cfg.cut_in_rate},
          {"n_objects", cfg.n_objects},
          {"n_map_elems", cfg.n_map_elems},
          {"n_agents", cfg.n_agents},
          {"seed", cfg.seed}};
}

ScenarioConfig scenario_config_from_json(const nlohmann::json& j) {
  ScenarioConfig cfg;
  if (j.contains("context_prior")) cfg.context_prior = j.at("context_prior").get<std::array<double, 3>>();
  if (j.contains("shortcut_strength")) cfg.shortcut_strength = j.at("shortcut_strength").get<double>();
  if (j.contains("cooccurrence_strength"))
    cfg.cooccurrence_strength = j.at("cooccurrence_strength").get<double>();
  if (j.contains("cut_in_rate")) cfg.cut_in_rate = j.at("cut_in_rate").get<double>();
  if (j.contains("n_objects")) cfg.n_objects = j.at("n_objects").get<std::size_t>();
  if (j.contains("n_map_elems")) cfg.n_map_elems = j.at("n_map_elems").get<std::size_t>();
  if (j.contains("n_agents")) cfg.n_agents = j.at("n_agents").get<std::size_t>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

// ---- world constants ------------------------------------------------------------------

namespace {

using Feature = std::array<double, kFeatureDim>;

constexpr double kNominalCurvature = 0.1;
constexpr double kLaneOffset = 3.0;       // lateral start of a cutting-in agent
constexpr double kBrakeFraction = 0.6;    // speed shed over the horizon when braking
constexpr double kMapNoise = 0.15;
constexpr double kObjectNoise = 0.3;
constexpr double kCooccurrenceCue = 0.8;
constexpr double kHistoryJitter = 0.05;
constexpr std::uint64_t kWorldSeed = 0x5c15'2025ULL;

// Fixed rendering directions shared by every dataset.
struct WorldBasis {
  std::array<Feature, kObjectClasses> object_class;
  std::array<Feature, kMapClasses> map_class;
  Feature curvature;
  Feature speed;
  Feature cooccurrence;
};

Feature random_unit(Rng& rng) {
  Feature f;
  double norm = 0.0;
  for (auto& v : f) {
    v = rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (auto& v : f) v /= norm;
  return f;
}

const WorldBasis& world_basis() {
  static const WorldBasis basis = [] {
    Rng rng(kWorldSeed);
    WorldBasis b;
    for (auto& f : b.object_class) f = random_unit(rng);
    for (auto& f : b.map_class) f = random_unit(rng);
    b.curvature = random_unit(rng);
    b.speed = random_unit(rng);
    b.cooccurrence = random_unit(rng);
    return b;
  }();
  return basis;
}

Context context_of(const ScenarioConfig& cfg, double u) {
  double acc = 0.0;
  for (std::size_t c = 0; c < kContexts; ++c) {
    acc += cfg.context_prior[c];
    if (u < acc) return static_cast<Context>(c);
  }
  return Context::straight;
}

// Paired class that co-occurs with each flag value: stroller with the flag,
// car without it.
int paired_object_class(bool flag) { return flag ? 2 : 0; }

int object_class(double u, bool flag, double strength) {
  const int paired = paired_object_class(flag);
  if (u < strength) return paired;
  // Remaining mass spread uniformly over the other classes.
  const double v = (u - strength) / (1.0 - strength);
  int k = std::min(static_cast<int>(v * (kObjectClasses - 1)), static_cast<int>(kObjectClasses) - 2);
  return k >= paired ? k + 1 : k;
}

int map_class(double u, Context ctx) {
  const double crossing = ctx == Context::straight ? 0.2 : 0.5;
  if (u < crossing) return 1;
  return u < crossing + (1.0 - crossing) / 2.0 ? 0 : 2;
}

// Lane-frame placement: positions bend with the lane, headings follow it.
AgentState on_lane(double x, double y, double vx, double vy, double curvature) {
  const double heading = curvature * x;
  const double c = std::cos(heading), s = std::sin(heading);
  AgentState a;
  a.pos = {x, y + 0.5 * curvature * x * x};
  a.vel = {c * vx - s * vy, s * vx + c * vy};
  return a;
}

}  // namespace

double nominal_curvature(Context context, double curvature_scale) {
  switch (context) {
    case Context::straight: return 0.0;
    case Context::left: return kNominalCurvature * curvature_scale;
    case Context::right: return -kNominalCurvature * curvature_scale;
  }
  return 0.0;
}

std::array<Vec2, kHorizon> expert_trajectory(Context context, double speed_limit,
                                             double curvature_scale, bool cut_in) {
  const double kappa = nominal_curvature(context, curvature_scale);
  std::array<Vec2, kHorizon> out;
  double heading = 0.0, x = 0.0, y = 0.0;
  for (std::size_t k = 0; k < kHorizon; ++k) {
    const double frac = static_cast<double>(k + 1) / static_cast<double>(kHorizon);
    const double v = cut_in ? speed_limit * (1.0 - kBrakeFraction * frac) : speed_limit;
    const double ds = v * kStepSeconds;
    // Midpoint heading integrates a constant-curvature arc to second order.
    const double mid = heading + 0.5 * kappa * ds;
    x += ds * std::cos(mid);
    y += ds * std::sin(mid);
    heading += kappa * ds;
    out[k] = {x, y};
  }
  return out;
}

ExogenousNoise sample_noise(const ScenarioConfig& cfg, std::uint64_t scene_seed) {
  Rng rng(scene_seed);
  ExogenousNoise n;
  n.u_context = rng.uniform();
  n.cooccurrence = rng.bernoulli(0.5);
  n.speed_limit = rng.uniform(2.0, 4.0);
  n.curvature_scale = rng.uniform(0.8, 1.2);
  n.cut_in = rng.bernoulli(cfg.cut_in_rate);
  n.cut_side = rng.bernoulli(0.5) ? 1.0 : -1.0;
  n.cut_distance = rng.uniform(6.0, 10.0);
  n.cut_speed = rng.uniform(1.5, 2.5);
  n.cut_lateral_speed = rng.uniform(0.8, 1.2);
  n.agent_draws.resize(cfg.n_agents);
  for (auto& a : n.agent_draws) a = {rng.uniform(-10.0, 20.0), rng.uniform(-1.0, 1.0), rng.uniform(0.0, 4.0)};
  n.object_class_draws.resize(cfg.n_objects);
  n.object_noise.assign(cfg.n_objects, std::vector<double>(kFeatureDim));
  for (std::size_t i = 0; i < cfg.n_objects; ++i) {
    n.object_class_draws[i] = rng.uniform();
    for (auto& v : n.object_noise[i]) v = rng.normal();
  }
  n.map_class_draws.resize(cfg.n_map_elems);
  n.map_noise.assign(cfg.n_map_elems, std::vector<double>(kFeatureDim));
  for (std::size_t i = 0; i < cfg.n_map_elems; ++i) {
    n.map_class_draws[i] = rng.uniform();
    for (auto& v : n.map_noise[i]) v = rng.normal();
  }
  for (auto& v : n.history_decoy) v = rng.uniform();
  for (auto& v : n.history_noise) v = rng.normal();
  return n;
}

Context context_from_noise(const ScenarioConfig& cfg, const ExogenousNoise& noise) {
  return context_of(cfg, noise.u_context);
}

namespace {

std::array<Vec2, kHistorySteps> velocities_of(const std::array<Vec2, kHorizon>& traj) {
  std::array<Vec2, kHistorySteps> v;
  Vec2 prev{0.0, 0.0};
  for (std::size_t k = 0; k < kHistorySteps; ++k) {
    v[k] = {(traj[k].x - prev.x) / kStepSeconds, (traj[k].y - prev.y) / kStepSeconds};
    prev = traj[k];
  }
  return v;
}

std::array<Vec2, kHistorySteps> render_history(const ScenarioConfig& cfg, const ExogenousNoise& n,
                                               const std::array<Vec2, kHorizon>& expert) {
  // Blend of the expert's own opening velocities (the shortcut) and an
  // independent decoy drawn from the same generative rule.
  const auto truth = velocities_of(expert);
  const auto& d = n.history_decoy;
  const auto decoy = velocities_of(expert_trajectory(context_of(cfg, d[0]), 2.0 + 2.0 * d[1],
                                                     0.8 + 0.4 * d[2], d[3] < cfg.cut_in_rate));
  const double rho = cfg.shortcut_strength;
  std::array<Vec2, kHistorySteps> h;
  for (std::size_t k = 0; k < kHistorySteps; ++k) {
    h[k].x = rho * truth[k].x + (1.0 - rho) * decoy[k].x + kHistoryJitter * n.history_noise[2 * k];
    h[k].y = rho * truth[k].y + (1.0 - rho) * decoy[k].y + kHistoryJitter * n.history_noise[2 * k + 1];
  }
  return h;
}

}  // namespace

Scene render_scene(const ScenarioConfig& cfg, const ExogenousNoise& n, Context context,
                   std::uint64_t id) {
  const WorldBasis& w = world_basis();
  Scene s;
  s.id = id;
  s.context = context;
  s.cooccurrence = n.cooccurrence;
  s.noise = n;
  const double kappa = nominal_curvature(context, n.curvature_scale);

  const double cue = n.cooccurrence ? kCooccurrenceCue : -kCooccurrenceCue;
  for (std::size_t i = 0; i < n.object_class_draws.size(); ++i) {
    const int cls = object_class(n.object_class_draws[i], n.cooccurrence, cfg.cooccurrence_strength);
    std::vector<double> f(kFeatureDim);
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
      f[j] = w.object_class[cls][j] + cue * w.cooccurrence[j] + kObjectNoise * n.object_noise[i][j];
    }
    s.object_features.push_back(std::move(f));
    s.object_labels.push_back(cls);
  }

  const double curv_code = kappa / kNominalCurvature;
  const double speed_code = n.speed_limit - 3.0;
  for (std::size_t i = 0; i < n.map_class_draws.size(); ++i) {
    const int cls = map_class(n.map_class_draws[i], context);
    std::vector<double> f(kFeatureDim);
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
      f[j] = w.map_class[cls][j] + curv_code * w.curvature[j] + speed_code * w.speed[j] +
             kMapNoise * n.map_noise[i][j];
    }
    s.map_features.push_back(std::move(f));
    s.map_labels.push_back(cls);
  }

  for (std::size_t i = 0; i < n.agent_draws.size(); ++i) {
    if (i == 0 && n.cut_in) {
      s.agents.push_back(on_lane(n.cut_distance, n.cut_side * kLaneOffset, n.cut_speed,
                                 -n.cut_side * n.cut_lateral_speed, kappa));
      continue;
    }
    const auto& [lon, lat, speed] = n.agent_draws[i];
    const double side = lat >= 0.0 ? 1.0 : -1.0;
    s.agents.push_back(on_lane(lon, side * (4.0 + 4.0 * std::abs(lat)), speed, 0.0, kappa));
  }

  s.expert = expert_trajectory(context, n.speed_limit, n.curvature_scale, n.cut_in);
  s.ego_history = render_history(cfg, n, s.expert);
  return s;
}

Dataset generate_dataset(const ScenarioConfig& cfg, std::size_t n, Split split) {
  cfg.validate();
  if (n == 0) throw std::invalid_argument("generate_dataset: n must be at least 1");
  Dataset data;
  data.config = cfg;
  data.split = split;
  data.scenes.reserve(n);
  const std::uint64_t stream = derive_seed(cfg.seed, split == Split::train ? 0 : 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto noise = sample_noise(cfg, derive_seed(stream, i));
    data.scenes.push_back(render_scene(cfg, noise, context_from_noise(cfg, noise), i));
  }
  return data;
}

// ---- editors --------------------------------------------------------------------------------

std::string VelocityPerturbation::label() const {
  char buf[64];
  switch (mode) {
    case Mode::none: return "none";
    case Mode::scale: std::snprintf(buf, sizeof buf, "x%.1f", value); return buf;
    case Mode::absolute: std::snprintf(buf, sizeof buf, "%gm/s", value); return buf;
  }
  return "?";
}

Scene perturb_ego_velocity(const Scene& scene, const VelocityPerturbation& p) {
  Scene out = scene;
  for (auto& v : out.ego_history) {
    switch (p.mode) {
      case VelocityPerturbation::Mode::none: break;
      case VelocityPerturbation::Mode::scale:
        v.x *= p.value;
        v.y *= p.value;
        break;
      case VelocityPerturbation::Mode::absolute: {
        const double norm = std::hypot(v.x, v.y);
        const double ux = norm > 0.0 ? v.x / norm : 1.0;
        const double uy = norm > 0.0 ? v.y / norm : 0.0;
        v = {p.value * ux, p.value * uy};
        break;
      }
    }
  }
  return out;
}

Scene perturb_context_features(const Scene& scene, ContextBlock target, double magnitude,
                               std::uint64_t seed) {
  if (magnitude < 0.0) throw std::invalid_argument("perturbation magnitude must be nonnegative");
  Scene out = scene;
  if (magnitude == 0.0) return out;
  Rng rng(derive_seed(seed, scene.id));
  if (target == ContextBlock::map) {
    for (auto& f : out.map_features)
      for (auto& v : f) v += rng.uniform(-magnitude, magnitude);
  } else {
    for (auto& a : out.agents) {
      a.pos.x += rng.uniform(-magnitude, magnitude);
      a.pos.y += rng.uniform(-magnitude, magnitude);
      a.vel.x += rng.uniform(-magnitude, magnitude);
      a.vel.y += rng.uniform(-magnitude, magnitude);
    }
  }
  return out;
}

Scene counterfactual_context(const ScenarioConfig& cfg, const Scene& scene, Context context) {
  Scene out = render_scene(cfg, scene.noise, context, scene.id);
  out.ego_history = scene.ego_history;
  return out;
}

// ---- checks -----------------------------------------------------------------------------------

bool kinematically_feasible(const std::array<Vec2, kHorizon>& t) {
  Vec2 prev{0.0, 0.0};
  double prev_heading = 0.0;
  for (std::size_t k = 0; k < kHorizon; ++k) {
    const double dx = t[k].x - prev.x, dy = t[k].y - prev.y;
    const double ds = std::hypot(dx, dy);
    if (ds > kMaxSpeed * kStepSeconds + 1e-9) return false;
    const double heading = std::atan2(dy, dx);
    if (k > 0 && ds > 0.0) {
      double turn = std::remainder(heading - prev_heading, 2.0 * M_PI);
      if (std::abs(turn) > kMaxCurvature * ds + 1e-9) return false;
    }
    prev_heading = heading;
    prev = t[k];
  }
  return true;
}

Vec2 extrapolate(const AgentState& agent, std::size_t k) {
  const double t = static_cast<double>(k + 1) * kStepSeconds;
  return {agent.pos.x + agent.vel.x * t, agent.pos.y + agent.vel.y * t};
}

// ---- I/O ----------------------------------------------------------------------------------------

namespace {

nlohmann::json vec_json(const Vec2& v) { return {v.x, v.y}; }
Vec2 vec_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

nlohmann::json noise_json(const ExogenousNoise& n) {
  return {{"u_context", n.u_context},
          {"cooccurrence", n.cooccurrence},
          {"speed_limit", n.speed_limit},
          {"curvature_scale", n.curvature_scale},
          {"cut_in", n.cut_in},
          {"cut_side", n.cut_side},
          {"cut_distance", n.cut_distance},
          {"cut_speed", n.cut_speed},
          {"cut_lateral_speed", n.cut_lateral_speed},
          {"agent_draws", n.agent_draws},
          {"object_class_draws", n.object_class_draws},
          {"object_noise", n.object_noise},
          {"map_class_draws", n.map_class_draws},
          {"map_noise", n.map_noise},
          {"history_decoy", n.history_decoy},
          {"history_noise", n.history_noise}};
}

ExogenousNoise noise_from(const nlohmann::json& j) {
  ExogenousNoise n;
  n.u_context = j.at("u_context").get<double>();
  n.cooccurrence = j.at("cooccurrence").get<bool>();
  n.speed_limit = j.at("speed_limit").get<double>();
  n.curvature_scale = j.at("curvature_scale").get<double>();
  n.cut_in = j.at("cut_in").get<bool>();
  n.cut_side = j.at("cut_side").get<double>();
  n.cut_distance = j.at("cut_distance").get<double>();
  n.cut_speed = j.at("cut_speed").get<double>();
  n.cut_lateral_speed = j.at("cut_lateral_speed").get<double>();
  j.at("agent_draws").get_to(n.agent_draws);
  j.at("object_class_draws").get_to(n.object_class_draws);
  j.at("object_noise").get_to(n.object_noise);
  j.at("map_class_draws").get_to(n.map_class_draws);
  j.at("map_noise").get_to(n.map_noise);
  j.at("history_decoy").get_to(n.history_decoy);
  j.at("history_noise").get_to(n.history_noise);
  return n;
}

}  // namespace

nlohmann::json to_json(const Scene& s) {
  nlohmann::json agents = nlohmann::json::array();
  for (const auto& a : s.agents) agents.push_back({{"pos", vec_json(a.pos)}, {"vel", vec_json(a.vel)}});
  nlohmann::json history = nlohmann::json::array();
  for (const auto& v : s.ego_history) history.push_back(vec_json(v));
  nlohmann::json expert = nlohmann::json::array();
  for (const auto& v : s.expert) expert.push_back(vec_json(v));
  return {{"id", s.id},
          {"context", to_string(s.context)},
          {"cooccurrence", s.cooccurrence},
          {"object_features", s.object_features},
          {"object_labels", s.object_labels},
          {"map_features", s.map_features},
          {"map_labels", s.map_labels},
          {"agents", agents},
          {"ego_history", history},
          {"expert", expert},
          {"noise", noise_json(s.noise)}};
}

Scene scene_from_json(const nlohmann::json& j) {
  Scene s;
  s.id = j.at("id").get<std::uint64_t>();
  s.context = context_from_string(j.at("context").get<std::string>());
  s.cooccurrence = j.at("cooccurrence").get<bool>();
  j.at("object_features").get_to(s.object_features);
  j.at("object_labels").get_to(s.object_labels);
  j.at("map_features").get_to(s.map_features);
  j.at("map_labels").get_to(s.map_labels);
  for (const auto& a : j.at("agents")) s.agents.push_back({vec_from(a.at("pos")), vec_from(a.at("vel"))});
  const auto& h = j.at("ego_history");
  const auto& e = j.at("expert");
  if (h.size() != kHistorySteps || e.size() != kHorizon) {
    throw std::invalid_argument("scene record has wrong history or trajectory length");
  }
  for (std::size_t k = 0; k < kHistorySteps; ++k) s.ego_history[k] = vec_from(h[k]);
  for (std::size_t k = 0; k < kHorizon; ++k) s.expert[k] = vec_from(e[k]);
  s.noise = noise_from(j.at("noise"));
  for (const auto& f : s.object_features)
    if (f.size() != kFeatureDim) throw std::invalid_argument("object feature width mismatch");
  for (const auto& f : s.map_features)
    if (f.size() != kFeatureDim) throw std::invalid_argument("map feature width mismatch");
  return s;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  // First line is a header record; every following line is one scene.
  out << nlohmann::json{{"config", to_json(data.config)}, {"split", to_string(data.split)},
                        {"scenes", data.scenes.size()}}
             .dump()
      << '\n';
  for (const auto& s : data.scenes) out << to_json(s).dump() << '\n';
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + " is empty");
  const auto header = nlohmann::json::parse(line);
  Dataset data;
  data.config = scenario_config_from_json(header.at("config"));
  data.split = header.at("split").get<std::string>() == "val" ? Split::val : Split::train;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    data.scenes.push_back(scene_from_json(nlohmann::json::parse(line)));
  }
  if (data.scenes.size() != header.at("scenes").get<std::size_t>()) {
    throw std::runtime_error(path.string() + " is truncated");
  }
  return data;
}

}  // namespace scis
