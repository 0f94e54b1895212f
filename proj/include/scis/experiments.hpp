#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "scis/dictionary.hpp"
#include "scis/metrics.hpp"
#include "scis/planner.hpp"

namespace scis {

enum class ModelRole { baseline, causal };
std::string to_string(ModelRole r);

struct NamedModel {
  std::string name;
  ModelRole role = ModelRole::baseline;
  const PlannerModel* model = nullptr;
};

/// Rows plus derived quantities (degradation ratios, gaps, orderings).
struct ReportTable {
  std::string experiment;
  std::vector<MetricsReport> reports;
  nlohmann::json summary = nlohmann::json::object();
};

enum class ExperimentKind { ego_noise, context_noise, scenario_split, ablation, dict_sweep, cluster_compare };
std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::ego_noise;
  std::vector<std::string> grid;             // condition labels, for the record
  std::vector<std::filesystem::path> inputs;  // dataset, checkpoints, dictionary
  std::filesystem::path output;
  /// Throws std::invalid_argument on an empty grid or a missing input.
  void validate() const;
};

/// none, x0.0, x0.5, x1.5, 100 m/s.
std::vector<VelocityPerturbation> ego_noise_grid();
inline constexpr std::array<double, 3> kContextNoiseMagnitudes{0.5, 0.7, 0.9};

/// Perturbed avg L2 divided by clean avg L2.
double degradation_ratio(const MetricsReport& perturbed, const MetricsReport& clean);

ReportTable run_ego_noise_sweep(const std::vector<NamedModel>& models, const Dataset& data);
ReportTable run_context_noise_sweep(const std::vector<NamedModel>& models, const Dataset& data,
                                    std::uint64_t noise_seed);
ReportTable run_scenario_split(const std::vector<NamedModel>& models, const Dataset& data);

/// Trains the 2x2 {PDM, IDM} grid on a shared seed; rows ID-1..ID-4.
ReportTable run_ablation(const Dataset& train, const Dataset& val, const PrototypeDictionary& dict,
                         const TrainConfig& base_cfg, const PlannerModel& baseline);
/// Dictionary sizes (5,2,3), (10,3,6), (20,5,10), each built from the baseline's embeddings.
ReportTable run_dict_sweep(const Dataset& train, const Dataset& val, const TrainConfig& base_cfg,
                           const PlannerModel& baseline, ClusterAlgo algo, std::uint64_t dict_seed);
/// K-means, K-medoids and K-means++ dictionaries at the default sizes.
ReportTable run_cluster_compare(const Dataset& train, const Dataset& val,
                                const TrainConfig& base_cfg, const PlannerModel& baseline,
                                const DictionarySizes& sizes, std::uint64_t dict_seed);

/// Ablation ordering ID-4 <= min(ID-2, ID-3) <= max(ID-2, ID-3) <= ID-1, each
/// comparison a <= b * (1 + tolerance).
bool ablation_ordering_holds(double id1, double id2, double id3, double id4, double tolerance);

/// Splits a dataset by context into straight and turning scenes.
std::pair<Dataset, Dataset> split_by_context(const Dataset& data);

enum class OutputFormat { csv, json };
OutputFormat output_format_from_string(const std::string& s);

/// csv: `path` gets the report rows, `<stem>.scenes.csv` the per-scene rows and
/// `<stem>.summary.json` the derived quantities. json: one document at `path`.
void emit(const ReportTable& table, OutputFormat format, const std::filesystem::path& path);
nlohmann::json to_json(const ReportTable& table);
ReportTable report_table_from_json(const nlohmann::json& j);

}  // namespace scis
