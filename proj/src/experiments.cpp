#include "scis/experiments.hpp"

#include <algorithm>
#include <fstream>

namespace scis {

std::string to_string(ModelRole r) { return r == ModelRole::baseline ? "baseline" : "causal"; }

namespace {

constexpr std::array<std::pair<ExperimentKind, const char*>, 6> kKinds{{
    {ExperimentKind::ego_noise, "ego_noise"},
    {ExperimentKind::context_noise, "context_noise"},
    {ExperimentKind::scenario_split, "scenario_split"},
    {ExperimentKind::ablation, "ablation"},
    {ExperimentKind::dict_sweep, "dict_sweep"},
    {ExperimentKind::cluster_compare, "cluster_compare"},
}};

void require_roles(const std::vector<NamedModel>& models) {
  bool baseline = false, causal = false;
  for (const auto& m : models) {
    if (!m.model) throw std::invalid_argument("model '" + m.name + "' is missing");
    (m.role == ModelRole::baseline ? baseline : causal) = true;
  }
  if (!baseline || !causal) {
    throw std::invalid_argument("sweeps need at least one baseline and one causal model");
  }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string to_string(ExperimentKind k) {
  for (const auto& [kind, name] : kKinds)
    if (kind == k) return name;
  return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (const auto& [kind, name] : kKinds)
    if (s == name) return kind;
  throw std::invalid_argument("unknown experiment '" + s + "'");
}

void ExperimentSpec::validate() const {
  if (grid.empty()) throw std::invalid_argument(to_string(kind) + ": empty grid");
  for (const auto& p : inputs) {
    if (!std::filesystem::exists(p)) throw std::invalid_argument("missing input " + p.string());
  }
}

std::vector<VelocityPerturbation> ego_noise_grid() {
  return {VelocityPerturbation::none(), VelocityPerturbation::scaled(0.0),
          VelocityPerturbation::scaled(0.5), VelocityPerturbation::scaled(1.5),
          VelocityPerturbation::absolute(100.0)};
}

double degradation_ratio(const MetricsReport& perturbed, const MetricsReport& clean) {
  if (!(clean.l2_avg > 0.0)) throw ContractError("clean avg L2 is zero; ratio undefined");
  return perturbed.l2_avg / clean.l2_avg;
}

ReportTable run_ego_noise_sweep(const std::vector<NamedModel>& models, const Dataset& data) {
  require_roles(models);
  ReportTable t;
  t.experiment = to_string(ExperimentKind::ego_noise);
  for (const auto& m : models) {
    nlohmann::json ratios = nlohmann::json::object();
    MetricsReport clean;
    for (const auto& v : ego_noise_grid()) {
      MetricsReport r = evaluate(*m.model, data, Condition::ego(v), m.name);
      if (v.mode == VelocityPerturbation::Mode::none) clean = r;
      ratios[r.condition] = degradation_ratio(r, clean);
      t.reports.push_back(std::move(r));
    }
    t.summary["degradation"][m.name] = ratios;
    t.summary["role"][m.name] = to_string(m.role);
  }
  return t;
}

ReportTable run_context_noise_sweep(const std::vector<NamedModel>& models, const Dataset& data,
                                    std::uint64_t noise_seed) {
  require_roles(models);
  ReportTable t;
  t.experiment = to_string(ExperimentKind::context_noise);
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& m : models) {
    const MetricsReport clean = evaluate(*m.model, data, Condition::clean(), m.name);
    t.reports.push_back(clean);
    nlohmann::json ratios = nlohmann::json::object();
    for (ContextBlock block : {ContextBlock::agent, ContextBlock::map}) {
      double previous = clean.l2_avg;
      for (double mag : kContextNoiseMagnitudes) {
        MetricsReport r = evaluate(*m.model, data, Condition::context(block, mag, noise_seed), m.name);
        ratios[r.condition] = degradation_ratio(r, clean);
        // Soft check: reported, never fatal.
        if (r.l2_avg < previous) violations.push_back({{"model", m.name}, {"condition", r.condition}});
        previous = r.l2_avg;
        t.reports.push_back(std::move(r));
      }
    }
    t.summary["degradation"][m.name] = ratios;
    t.summary["role"][m.name] = to_string(m.role);
  }
  t.summary["monotonicity_violations"] = violations;
  return t;
}

std::pair<Dataset, Dataset> split_by_context(const Dataset& data) {
  Dataset straight{{}, data.config, data.split}, turning{{}, data.config, data.split};
  for (const auto& s : data.scenes) (s.context == Context::straight ? straight : turning).scenes.push_back(s);
  return {straight, turning};
}

ReportTable run_scenario_split(const std::vector<NamedModel>& models, const Dataset& data) {
  require_roles(models);
  const auto [straight, turning] = split_by_context(data);
  if (straight.empty() || turning.empty()) {
    throw std::invalid_argument("scenario split needs both straight and turning scenes");
  }
  ReportTable t;
  t.experiment = to_string(ExperimentKind::scenario_split);
  for (const auto& m : models) {
    MetricsReport st = evaluate(*m.model, straight, Condition::clean(), m.name);
    MetricsReport lr = evaluate(*m.model, turning, Condition::clean(), m.name);
    st.split += "/ST";
    lr.split += "/LR";
    t.summary["gap"][m.name] = lr.l2_avg - st.l2_avg;
    t.summary["role"][m.name] = to_string(m.role);
    t.reports.push_back(std::move(st));
    t.reports.push_back(std::move(lr));
  }
  return t;
}

bool ablation_ordering_holds(double id1, double id2, double id3, double id4, double tolerance) {
  const double lo = std::min(id2, id3), hi = std::max(id2, id3);
  const double band = 1.0 + tolerance;
  return id4 <= lo * band && lo <= hi * band && hi <= id1 * band;
}

ReportTable run_ablation(const Dataset& train, const Dataset& val, const PrototypeDictionary& dict,
                         const TrainConfig& base_cfg, const PlannerModel& baseline) {
  ReportTable t;
  t.experiment = to_string(ExperimentKind::ablation);
  std::array<double, 4> avg{};
  t.reports.push_back(evaluate(baseline, val, Condition::clean(), "ID-1"));
  avg[0] = t.reports.back().l2_avg;
  const std::array<ScisFlags, 3> grid{ScisFlags{true, false}, ScisFlags{false, true}, ScisFlags{true, true}};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    TrainConfig cfg = base_cfg;
    cfg.flags = grid[i];
    const PlannerModel model = train_causal(train, dict, cfg);
    t.reports.push_back(evaluate(model, val, Condition::clean(), "ID-" + std::to_string(i + 2)));
    avg[i + 1] = t.reports.back().l2_avg;
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string id = "ID-" + std::to_string(i + 1);
    t.summary["flags"][id] = {{"pdm", i == 1 || i == 3}, {"idm", i == 2 || i == 3}};
    t.summary["l2_avg"][id] = avg[i];
  }
  t.summary["ordering_holds"] = ablation_ordering_holds(avg[0], avg[1], avg[2], avg[3], 0.05);
  return t;
}

namespace {

ReportTable train_over_dictionaries(const std::string& experiment, const Dataset& train,
                                    const Dataset& val, const TrainConfig& base_cfg,
                                    const PlannerModel& baseline,
                                    const std::vector<std::pair<std::string, PrototypeDictionary>>& dicts) {
  ReportTable t;
  t.experiment = experiment;
  TrainConfig cfg = base_cfg;
  cfg.flags = {true, true};
  const MetricsReport base = evaluate(baseline, val, Condition::clean(), "baseline");
  t.reports.push_back(base);
  double lo = 0.0, hi = 0.0, total = 0.0;
  for (std::size_t i = 0; i < dicts.size(); ++i) {
    const PlannerModel model = train_causal(train, dicts[i].second, cfg);
    MetricsReport r = evaluate(model, val, Condition::clean(), dicts[i].first);
    lo = i == 0 ? r.l2_avg : std::min(lo, r.l2_avg);
    hi = i == 0 ? r.l2_avg : std::max(hi, r.l2_avg);
    total += r.l2_avg;
    t.summary["l2_avg"][dicts[i].first] = r.l2_avg;
    t.reports.push_back(std::move(r));
  }
  const double mean_causal = total / static_cast<double>(dicts.size());
  t.summary["baseline_l2_avg"] = base.l2_avg;
  t.summary["causal_spread"] = hi - lo;
  t.summary["baseline_causal_gap"] = base.l2_avg - mean_causal;
  return t;
}

}  // namespace

ReportTable run_dict_sweep(const Dataset& train, const Dataset& val, const TrainConfig& base_cfg,
                           const PlannerModel& baseline, ClusterAlgo algo, std::uint64_t dict_seed) {
  const auto stores = collect_embeddings(baseline, train);
  std::vector<std::pair<std::string, PrototypeDictionary>> dicts;
  for (const DictionarySizes& k : {DictionarySizes{5, 2, 3}, DictionarySizes{10, 3, 6}, DictionarySizes{20, 5, 10}}) {
    const std::string label = "k=" + std::to_string(k.k_object) + "/" + std::to_string(k.k_map) + "/" +
                              std::to_string(k.k_agent);
    dicts.emplace_back(label, build_dictionary(stores, k, algo, dict_seed));
  }
  return train_over_dictionaries(to_string(ExperimentKind::dict_sweep), train, val, base_cfg, baseline, dicts);
}

ReportTable run_cluster_compare(const Dataset& train, const Dataset& val,
                                const TrainConfig& base_cfg, const PlannerModel& baseline,
                                const DictionarySizes& sizes, std::uint64_t dict_seed) {
  const auto stores = collect_embeddings(baseline, train);
  std::vector<std::pair<std::string, PrototypeDictionary>> dicts;
  for (ClusterAlgo algo : {ClusterAlgo::kmeans, ClusterAlgo::kmedoids, ClusterAlgo::kmeans_pp}) {
    dicts.emplace_back(to_string(algo), build_dictionary(stores, sizes, algo, dict_seed));
  }
  ReportTable t = train_over_dictionaries(to_string(ExperimentKind::cluster_compare), train, val,
                                          base_cfg, baseline, dicts);
  t.summary["spread_below_gap"] =
      t.summary["causal_spread"].get<double>() < std::abs(t.summary["baseline_causal_gap"].get<double>());
  return t;
}

OutputFormat output_format_from_string(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw std::invalid_argument("format must be csv or json, got '" + s + "'");
}

nlohmann::json to_json(const ReportTable& table) {
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& r : table.reports) reports.push_back(to_json(r));
  return {{"experiment", table.experiment}, {"reports", reports}, {"summary", table.summary}};
}

ReportTable report_table_from_json(const nlohmann::json& j) {
  ReportTable t;
  t.experiment = j.at("experiment").get<std::string>();
  for (const auto& r : j.at("reports")) t.reports.push_back(metrics_report_from_json(r));
  t.summary = j.at("summary");
  return t;
}

void emit(const ReportTable& table, OutputFormat format, const std::filesystem::path& path) {
  if (format == OutputFormat::json) {
    write_file(path, to_json(table).dump(2) + "\n");
    return;
  }
  write_file(path, report_csv(table.reports));
  auto sibling = [&](const std::string& suffix) {
    return path.parent_path() / (path.stem().string() + suffix);
  };
  write_file(sibling(".scenes.csv"), scene_csv(table.reports));
  write_file(sibling(".summary.json"), table.summary.dump(2) + "\n");
}

}  // namespace scis
