#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "graphnf/baselines.hpp"
#include "graphnf/dataset.hpp"
#include "graphnf/model_p.hpp"
#include "graphnf/model_u.hpp"
#include "graphnf/training.hpp"

namespace graphnf {

struct ExperimentConfig {
  std::string bundle;
  std::string splits;  // optional splits file; generated from the fields below when empty
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
  std::uint64_t split_seed = 1;
  std::size_t measurement_count = 3;
  RetrievalConfig retrieval;
  SpatialGraphConfig graph;
  ModelPConfig model_p;
  ModelUConfig model_u;
  StageConfig train_p = StageConfig::p_defaults();
  StageConfig train_u = StageConfig::u_defaults();
  StageConfig finetune = StageConfig::finetune_defaults();
  double measured_weight = 1.0;
  std::uint64_t seed = 1;
  double zeta = 6.0;
  std::size_t jobs = 1;
  std::string out = "out";

  // Unknown keys and out-of-range values are ConfigErrors.
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static ExperimentConfig load(const std::filesystem::path& path);
  void validate() const;
};

struct Experiment {
  ExperimentConfig config;
  data::HrtfBundle bundle;
  data::SplitSpec splits;
};

// Loads the bundle and the splits (or derives them from the config).
Experiment prepare_experiment(const ExperimentConfig& config);
Experiment prepare_experiment(const ExperimentConfig& config, data::HrtfBundle bundle);

TrainPConfig train_p_config(const ExperimentConfig& config, PVariant variant = PVariant::Full);
TrainUConfig train_u_config(const ExperimentConfig& config);
FinetuneConfig finetune_config(const ExperimentConfig& config, std::size_t subject_index);

// ---- evaluation ------------------------------------------------------------

struct EvalEntry {
  std::string subject;
  std::size_t direction = 0;
  Direction dir;
  double lsd_db = 0.0;
  double ild_err_db = 0.0;
  bool exceeds_zeta = false;
};

struct EvalReport {
  std::string method;
  double zeta = 6.0;
  std::vector<EvalEntry> entries;  // excluded (measured) directions never appear
  double mean_lsd = 0.0;
  double mean_ild_error = 0.0;
  std::size_t exceed_count = 0;

  void recompute();
  void write_csv(const std::filesystem::path& path) const;
  std::string summary() const;
  void write_summary(const std::filesystem::path& path) const;
};

struct PredictionSet {
  std::vector<std::string> subjects;
  std::vector<Matrix> fields;  // [D, 2K] dB per subject
};

// Per-direction LSD and ILD error of each predicted field against the bundle,
// skipping the `excluded` direction indices.
EvalReport evaluate(std::string method, const PredictionSet& predictions, const data::HrtfBundle& truth,
                    std::span<const std::size_t> excluded, double zeta);

struct MethodResult {
  PredictionSet predictions;
  EvalReport report;
};

// Runs fn(i) for i in [0, n) on up to `jobs` threads; results must be written by index.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

// Personalization protocol: test subjects known only at the measured subset.
MethodResult run_graphnf(const Experiment& exp, const ModelP& model);
MethodResult run_graphnf_sca(const Experiment& exp, const ModelP& model_p, const ModelU& model_u);
MethodResult run_personalization_baseline(const Experiment& exp, BaselineKind kind);

// Upsampling protocol: every direction of every test subject predicted from all the others.
MethodResult run_lininterp_upsampling(const Experiment& exp);
MethodResult run_hrtf_u_upsampling(const Experiment& exp, const ModelU& model);

enum class AblationVariant { NoClueNoFusion, ClueNoFusion, Full, Sca };
AblationVariant ablation_variant_from_name(std::string_view name);
std::string_view ablation_variant_name(AblationVariant v);

struct AblationResult {
  std::vector<std::pair<AblationVariant, EvalReport>> reports;
  bool ordering_holds = false;  // LSD(sca) < LSD(full) <= LSD(clue-no-fusion) <= LSD(no-clue-no-fusion)
};

// Each variant trains its own HRTF-P from the shared seed; sca reuses the full
// variant's model (trained on demand) and the given or freshly trained HRTF-U.
AblationResult run_ablation(const Experiment& exp, std::span<const AblationVariant> variants,
                            const ModelU* model_u = nullptr);

}  // namespace graphnf
