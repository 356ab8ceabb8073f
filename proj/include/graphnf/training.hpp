#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "graphnf/autodiff/optim.hpp"
#include "graphnf/dataset.hpp"
#include "graphnf/features.hpp"
#include "graphnf/graphs.hpp"
#include "graphnf/matrix.hpp"
#include "graphnf/model_p.hpp"
#include "graphnf/model_u.hpp"

namespace graphnf {

// Deterministic sub-seed derivation (splitmix64 of seed and a stream label).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct StageConfig {
  enum class Schedule { Plateau, Exponential };

  ad::OptimizerKind optimizer = ad::OptimizerKind::Adam;
  double learning_rate = 1e-3;
  std::size_t epochs = 1;
  Schedule schedule = Schedule::Plateau;
  double decay = 0.9;         // plateau factor or exponential rate
  std::size_t patience = 10;  // plateau only

  static StageConfig p_defaults();
  static StageConfig u_defaults();
  static StageConfig finetune_defaults();
  ad::LrSchedule make_schedule() const;
  void validate() const;
};

struct TrainLog {
  double initial_validation = 0.0;  // before the first update
  std::vector<double> train_lsd;
  std::vector<double> validation_lsd;
  std::vector<double> learning_rate;
  std::size_t best_epoch = 0;  // 1-based; 0 means the initial parameters were best
  double best_validation = 0.0;
};

// ---- personalization data -------------------------------------------------

struct RetrievalConfig {
  FeatureKind kind = FeatureKind::Ild;
  std::size_t M = 5;
};

// The clue needs a vector feature; LSD retrieval falls back to ILD for it.
FeatureKind clue_feature_kind(FeatureKind retrieval);

// What the personalization stage knows about one (pseudo-)target subject:
// measurements at the subset only, its clue feature and its retrieved neighbors.
struct SubjectContext {
  std::string id;
  std::size_t index = 0;
  std::vector<double> clue_feature;
  std::vector<std::string> neighbors;
};

// Retrieval-feature and clue-feature tables of the candidate (training) subjects.
struct CandidatePool {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> retrieval_features;  // empty rows for LSD retrieval
  std::map<std::string, std::vector<double>> clue_features;
};

CandidatePool make_candidate_pool(const data::HrtfBundle& bundle, std::span<const std::string> ids,
                                  std::span<const std::size_t> measured, const RetrievalConfig& retrieval);

// Retrieval among the pool, excluding the subject itself when it is a member.
SubjectContext make_subject_context(const data::HrtfBundle& bundle, const std::string& id,
                                    const CandidatePool& pool, std::span<const std::size_t> measured,
                                    const RetrievalConfig& retrieval);

std::vector<Clue> neighbor_clues(const ModelP& model, const CandidatePool& pool, const SubjectContext& ctx,
                                 const Direction& d);

// HRTF-P predictions for every bundle direction, [D, 2K] dB.
Matrix predict_field(const ModelP& model, const data::HrtfBundle& bundle, const CandidatePool& pool,
                     const SubjectContext& ctx);

struct TrainPConfig {
  ModelPConfig model;
  RetrievalConfig retrieval;
  StageConfig stage = StageConfig::p_defaults();
  std::uint64_t seed = 1;
};

ModelP train_model_p(const data::HrtfBundle& bundle, const data::SplitSpec& splits, const TrainPConfig& config,
                     TrainLog* log = nullptr);

// Mean LSD of the model over the given subjects at their non-measured directions.
double validation_lsd_p(const ModelP& model, const data::HrtfBundle& bundle, const CandidatePool& pool,
                        std::span<const SubjectContext> subjects, std::span<const std::size_t> measured);

// ---- upsampling ------------------------------------------------------------

// For every direction, the indices of its graph neighbors (target excluded).
std::vector<std::vector<std::size_t>> spatial_neighborhoods(std::span<const Direction> directions,
                                                            const SpatialGraphConfig& cfg);

// Spatial graph at direction `target` whose neighbor rows come from `field` ([D, 2K]).
SpatialGraph field_graph(const Matrix& field, std::span<const Direction> directions, std::size_t target,
                         std::span<const std::size_t> neighbors, const SpatialGraphConfig& cfg);

Matrix subject_field(const data::HrtfBundle& bundle, std::size_t subject);

struct TrainUConfig {
  ModelUConfig model;
  SpatialGraphConfig graph;
  StageConfig stage = StageConfig::u_defaults();
  std::uint64_t seed = 1;
};

ModelU train_model_u(const data::HrtfBundle& bundle, const data::SplitSpec& splits, const TrainUConfig& config,
                     TrainLog* log = nullptr);

// Leave-one-direction-out reconstruction of a whole field, [D, 2K].
Matrix upsample_field(const ModelU& model, const Matrix& field, std::span<const Direction> directions,
                      const SpatialGraphConfig& cfg);

struct FinetuneConfig {
  StageConfig stage = StageConfig::finetune_defaults();
  double measured_weight = 1.0;  // loss multiplier on measured directions
  std::uint64_t seed = 1;
};

// FC-only adaptation on an HRTF-P field: true spectra at `measured` (rows of
// `measured_spectra`), the field itself elsewhere. Returns a new model; the
// input is untouched.
ModelU finetune_model_u(const ModelU& model, const Matrix& field, std::span<const Direction> directions,
                        std::span<const std::size_t> measured, const Matrix& measured_spectra,
                        const SpatialGraphConfig& graph, const FinetuneConfig& config,
                        std::vector<double>* epoch_loss = nullptr);

}  // namespace graphnf
