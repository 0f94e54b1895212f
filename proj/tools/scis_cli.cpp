// Command-line driver: data generation, training, dictionary construction and
// the evaluation sweeps. Exit codes: 0 success, 1 usage or input error,
// 2 a --check acceptance test failed.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <vector>

#include <CLI11.hpp>

#include "scis/causal_graph.hpp"
#include "scis/dictionary.hpp"
#include "scis/experiments.hpp"
#include "scis/metrics.hpp"
#include "scis/planner.hpp"

namespace {

using namespace scis;

constexpr int kAcceptanceFailure = 2;

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return nlohmann::json::parse(in);
}

Assignment parse_assignment(const std::string& text) {
  Assignment a;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("expected NAME=STATE, got '" + item + "'");
    a[item.substr(0, eq)] = std::stoi(item.substr(eq + 1));
  }
  return a;
}

std::optional<PrototypeDictionary> maybe_dict(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_dictionary(path);
}

struct TrainFlags {
  std::size_t epochs = 20;
  std::size_t batch = 16;
  double lr = 0.05;
  double gate_bias = -2.0;
  std::string config;

  std::vector<CLI::App*> apps;  // one TrainFlags may serve several subcommands

  void attach(CLI::App* app) {
    apps.push_back(app);
    app->add_option("--epochs", epochs, "training epochs");
    app->add_option("--batch", batch, "batch size");
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--gate-bias", gate_bias, "initial IDM gate bias");
    app->add_option("--config", config, "TrainConfig JSON (flags override it)");
  }

  TrainConfig build(std::uint64_t seed) const {
    TrainConfig cfg = config.empty() ? TrainConfig{} : train_config_from_json(read_json(config));
    auto count = [&](const char* name) {
      std::size_t n = 0;
      for (auto* a : apps) n += a->get_option(name)->count();
      return n;
    };
    auto given = [&](const char* name) { return config.empty() || count(name) > 0; };
    if (given("--epochs")) cfg.epochs = epochs;
    if (given("--batch")) cfg.batch_size = batch;
    if (given("--lr")) cfg.learning_rate = lr;
    if (given("--gate-bias")) cfg.gate_bias = gate_bias;
    if (config.empty() || apps.front()->get_parent()->get_option("--seed")->count() > 0) cfg.seed = seed;
    cfg.validate();
    return cfg;
  }
};

int check_result(bool ok, const std::string& what) {
  std::cout << (ok ? "PASS " : "FAIL ") << what << '\n';
  return ok ? 0 : kAcceptanceFailure;
}

// Worst (largest) causal ratio against best (smallest) baseline ratio.
bool causal_below(const nlohmann::json& summary, const std::string& key, const std::string& cond,
                  double factor) {
  double causal = 0.0, baseline = 1e300;
  for (const auto& [name, role] : summary.at("role").items()) {
    const double r = summary.at(key).at(name).at(cond).get<double>();
    if (role == "causal") causal = std::max(causal, r);
    else baseline = std::min(baseline, r);
  }
  return causal <= factor * baseline;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structural causal intervention toolkit for a toy driving planner"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "csv";
  app.add_option("--seed", seed, "master seed")->capture_default_str();
  app.add_option("--out", out, "output path");
  app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  // scm
  auto* scm = app.add_subcommand("scm", "causal graph queries");
  scm->require_subcommand(1);
  auto* scm_paths = scm->add_subcommand("paths", "backdoor paths in the planner graph");
  std::string treatment = "O", outcome = "Y_o";
  scm_paths->add_option("--treatment", treatment);
  scm_paths->add_option("--outcome", outcome);
  auto* scm_query = scm->add_subcommand("query", "exact inference on a discrete SCM file");
  std::string scm_file, target, given, forced;
  scm_query->add_option("--model", scm_file)->required()->check(CLI::ExistingFile);
  scm_query->add_option("--target", target)->required();
  scm_query->add_option("--given", given, "NAME=STATE,...");
  scm_query->add_option("--do", forced, "NAME=STATE,...");

  // generate
  auto* gen = app.add_subcommand("generate", "sample a toy driving dataset");
  std::string gen_config, split_name = "train";
  std::size_t n_scenes = 2000;
  gen->add_option("--config", gen_config, "ScenarioConfig JSON")->check(CLI::ExistingFile);
  gen->add_option("--n", n_scenes)->check(CLI::PositiveNumber);
  gen->add_option("--split", split_name)->check(CLI::IsMember({"train", "val"}));

  // pretrain / train
  auto* pre = app.add_subcommand("pretrain", "train the baseline planner");
  std::string data_path;
  TrainFlags pre_flags;
  pre->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  pre_flags.attach(pre);

  auto* train = app.add_subcommand("train", "train a planner with SCIS modules");
  std::string dict_path, warm_path;
  bool use_pdm = false, use_idm = false;
  TrainFlags train_flags;
  train->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  train->add_option("--dict", dict_path)->required()->check(CLI::ExistingFile);
  train->add_flag("--pdm", use_pdm);
  train->add_flag("--idm", use_idm);
  train->add_option("--warm-start", warm_path, "baseline checkpoint (exploration only)")
      ->check(CLI::ExistingFile);
  train_flags.attach(train);

  // build-dict
  auto* bd = app.add_subcommand("build-dict", "cluster baseline embeddings into a dictionary");
  std::string ckpt_path, sizes_text = "10,3,6", algo_name = "kmeans++";
  bd->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  bd->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  bd->add_option("--sizes", sizes_text, "k_o,k_m,k_a");
  bd->add_option("--algo", algo_name)->check(CLI::IsMember({"kmeans", "kmeans++", "kmedoids"}));

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate one checkpoint");
  ev->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  ev->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  ev->add_option("--dict", dict_path)->check(CLI::ExistingFile);

  // sweeps
  auto* sweep = app.add_subcommand("sweep", "perturbation sweeps");
  sweep->require_subcommand(1);
  std::string baseline_path, causal_path;
  bool check = false;
  std::vector<CLI::App*> sweeps;
  for (const char* name : {"ego-noise", "context-noise", "split"}) {
    auto* s = sweep->add_subcommand(name);
    s->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
    s->add_option("--baseline", baseline_path)->required()->check(CLI::ExistingFile);
    s->add_option("--causal", causal_path)->required()->check(CLI::ExistingFile);
    s->add_option("--dict", dict_path)->required()->check(CLI::ExistingFile);
    s->add_flag("--check", check, "exit 2 unless the causal model is more robust");
    sweeps.push_back(s);
  }

  // ablate / dict-sweep / cluster-compare
  std::string val_path;
  TrainFlags exp_flags;
  auto* ab = app.add_subcommand("ablate", "2x2 PDM/IDM ablation");
  auto* ds = app.add_subcommand("dict-sweep", "dictionary size sweep");
  auto* cc = app.add_subcommand("cluster-compare", "clustering algorithm comparison");
  for (auto* s : {ab, ds, cc}) {
    s->add_option("--data", data_path, "training set")->required()->check(CLI::ExistingFile);
    s->add_option("--val", val_path)->required()->check(CLI::ExistingFile);
    s->add_option("--baseline", baseline_path)->required()->check(CLI::ExistingFile);
    s->add_flag("--check", check, "exit 2 if the ordering or spread check fails");
    exp_flags.attach(s);
  }
  ab->add_option("--dict", dict_path)->required()->check(CLI::ExistingFile);
  ds->add_option("--algo", algo_name)->check(CLI::IsMember({"kmeans", "kmeans++", "kmedoids"}));
  cc->add_option("--sizes", sizes_text, "k_o,k_m,k_a");

  // project-pca
  auto* pca = app.add_subcommand("project-pca", "2-D PCA of final ego-query embeddings");
  pca->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  pca->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  pca->add_option("--dict", dict_path)->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  auto need_out = [&] {
    if (out.empty()) throw CLI::RequiredError("--out");
  };
  const auto fmt = output_format_from_string(format);

  try {
    if (*scm_paths) {
      const Dag g = build_vad_scm();
      nlohmann::json paths = nlohmann::json::array();
      for (const auto& p : backdoor_paths(g, treatment, outcome)) paths.push_back(path_to_string(p));
      const std::string text = nlohmann::json{{"treatment", treatment}, {"outcome", outcome},
                                              {"backdoor_paths", paths}}.dump(2) + "\n";
      if (out.empty()) std::cout << text;
      else write_text(out, text);
      return 0;
    }
    if (*scm_query) {
      const DiscreteScm model = scm_from_json(read_json(scm_file));
      if (!given.empty() && !forced.empty()) {
        throw std::invalid_argument("use either --given or --do, not both");
      }
      const Distribution d = forced.empty() ? observational(model, target, parse_assignment(given))
                                            : interventional(model, target, parse_assignment(forced));
      const std::string text = nlohmann::json{{"variable", d.variable}, {"probs", d.probs}}.dump() + "\n";
      if (out.empty()) std::cout << text;
      else write_text(out, text);
      return 0;
    }
    if (*gen) {
      need_out();
      ScenarioConfig cfg = gen_config.empty() ? ScenarioConfig{} : scenario_config_from_json(read_json(gen_config));
      if (app.get_option("--seed")->count() > 0 || gen_config.empty()) cfg.seed = seed;
      save_dataset(generate_dataset(cfg, n_scenes, split_name == "val" ? Split::val : Split::train), out);
      return 0;
    }
    if (*pre) {
      need_out();
      const PlannerModel model = pretrain_baseline(load_dataset(data_path), pre_flags.build(seed));
      save_checkpoint(model, out);
      return 0;
    }
    if (*train) {
      need_out();
      TrainConfig cfg = train_flags.build(seed);
      cfg.flags = {use_pdm, use_idm};
      cfg.warm_start = !warm_path.empty();
      std::optional<PlannerModel> warm;
      if (cfg.warm_start) warm = load_checkpoint(warm_path);
      const PlannerModel model = train_causal(load_dataset(data_path), load_dictionary(dict_path), cfg,
                                              warm ? &*warm : nullptr);
      save_checkpoint(model, out);
      return 0;
    }
    if (*bd) {
      need_out();
      const PlannerModel base = load_checkpoint(ckpt_path);
      const auto stores = collect_embeddings(base, load_dataset(data_path));
      save_dictionary(build_dictionary(stores, parse_dictionary_sizes(sizes_text),
                                       cluster_algo_from_string(algo_name), seed),
                      out);
      return 0;
    }
    if (*ev) {
      need_out();
      const PlannerModel model = load_checkpoint(ckpt_path, maybe_dict(dict_path));
      ReportTable t;
      t.experiment = "eval";
      t.reports.push_back(evaluate(model, load_dataset(data_path), Condition::clean(),
                                   std::filesystem::path(ckpt_path).stem().string()));
      emit(t, fmt, out);
      return 0;
    }
    for (auto* s : sweeps) {
      if (!*s) continue;
      need_out();
      const auto dict = load_dictionary(dict_path);
      const PlannerModel base = load_checkpoint(baseline_path);
      const PlannerModel causal = load_checkpoint(causal_path, dict);
      const std::vector<NamedModel> models{{"baseline", ModelRole::baseline, &base},
                                           {"causal", ModelRole::causal, &causal}};
      const Dataset data = load_dataset(data_path);
      const std::string name = s->get_name();
      ReportTable t = name == "ego-noise"       ? run_ego_noise_sweep(models, data)
                      : name == "context-noise" ? run_context_noise_sweep(models, data, seed)
                                                : run_scenario_split(models, data);
      emit(t, fmt, out);
      if (!check) return 0;
      if (name == "ego-noise") {
        const int a = check_result(causal_below(t.summary, "degradation", "ego_x0.0", 0.8),
                                   "ego x0.0 degradation ratio <= 0.8x baseline");
        const int b = check_result(causal_below(t.summary, "degradation", "ego_100m/s", 0.7),
                                   "ego 100 m/s degradation ratio <= 0.7x baseline");
        return std::max(a, b);
      }
      if (name == "context-noise") {
        int rc = 0;
        for (const char* cond : {"agent_noise_0.9", "map_noise_0.9"}) {
          const double c = t.summary["degradation"]["causal"][cond].get<double>();
          const double b = t.summary["degradation"]["baseline"][cond].get<double>();
          rc = std::max(rc, check_result(c < b, std::string(cond) + " causal ratio < baseline"));
        }
        return rc;
      }
      return check_result(t.summary["gap"]["causal"].get<double>() < t.summary["gap"]["baseline"].get<double>(),
                          "LR-ST gap smaller for the causal model");
    }
    if (*ab || *ds || *cc) {
      need_out();
      const Dataset train_data = load_dataset(data_path);
      const Dataset val_data = load_dataset(val_path);
      const PlannerModel base = load_checkpoint(baseline_path);
      const TrainConfig cfg = exp_flags.build(seed);
      ReportTable t;
      if (*ab) {
        t = run_ablation(train_data, val_data, load_dictionary(dict_path), cfg, base);
      } else if (*ds) {
        t = run_dict_sweep(train_data, val_data, cfg, base, cluster_algo_from_string(algo_name), seed);
      } else {
        t = run_cluster_compare(train_data, val_data, cfg, base, parse_dictionary_sizes(sizes_text), seed);
      }
      emit(t, fmt, out);
      if (!check) return 0;
      if (*ab) return check_result(t.summary["ordering_holds"].get<bool>(), "ablation ordering");
      if (*cc) return check_result(t.summary["spread_below_gap"].get<bool>(), "cluster spread below gap");
      return 0;
    }
    if (*pca) {
      need_out();
      const PlannerModel model = load_checkpoint(ckpt_path, maybe_dict(dict_path));
      const Dataset data = load_dataset(data_path);
      std::vector<double> rows;
      for (const auto& s : data.scenes) {
        const Tensor q = predict(model, s).ego_query;
        rows.insert(rows.end(), q.data().begin(), q.data().end());
      }
      const Projection p = pca_project(Tensor({data.size(), PlannerModel::kDim}, std::move(rows)));
      std::ostringstream text;
      text << "scene_id,context,pc1,pc2\n";
      for (std::size_t i = 0; i < data.size(); ++i) {
        text << data.scenes[i].id << ',' << to_string(data.scenes[i].context) << ','
             << format_number(p.coords.at(i, 0)) << ',' << format_number(p.coords.at(i, 1)) << '\n';
      }
      write_text(out, text.str());
      return 0;
    }
  } catch (const CLI::Error& e) {
    app.exit(e);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
