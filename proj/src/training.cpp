#include "graphnf/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "graphnf/log.hpp"

namespace graphnf {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

StageConfig StageConfig::p_defaults() {
  return {ad::OptimizerKind::RAdam, 1e-3, 200, Schedule::Plateau, 0.9, 10};
}

StageConfig StageConfig::u_defaults() {
  return {ad::OptimizerKind::Adam, 2e-3, 200, Schedule::Plateau, 0.95, 3};
}

StageConfig StageConfig::finetune_defaults() {
  return {ad::OptimizerKind::Adam, 2e-3, 20, Schedule::Exponential, 0.95, 0};
}

ad::LrSchedule StageConfig::make_schedule() const {
  return schedule == Schedule::Plateau ? ad::LrSchedule::plateau(learning_rate, decay, patience)
                                       : ad::LrSchedule::exponential(learning_rate, decay);
}

void StageConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("schedule decay must lie in (0, 1]");
  if (schedule == Schedule::Plateau && patience == 0) throw ConfigError("plateau patience must be >= 1");
}

namespace {

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  // explicit Fisher-Yates so the order does not depend on the library's std::shuffle
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

std::vector<std::vector<double>> snapshot(const std::vector<ad::Tensor>& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.emplace_back(p.values().begin(), p.values().end());
  return out;
}

void restore(std::vector<ad::Tensor>& params, const std::vector<std::vector<double>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto v = params[i].mutable_values();
    std::copy(values[i].begin(), values[i].end(), v.begin());
  }
}

std::vector<std::size_t> subject_indices(const data::HrtfBundle& bundle, std::span<const std::string> ids) {
  std::vector<std::size_t> out;
  for (const auto& id : ids) out.push_back(bundle.subject_index(id));
  return out;
}

Matrix measured_spectra(const data::HrtfBundle& bundle, std::size_t subject, std::span<const std::size_t> measured) {
  Matrix m(measured.size(), bundle.width());
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const auto row = bundle.magnitude(subject, measured[i]);
    std::copy(row.begin(), row.end(), m.row(i).begin());
  }
  return m;
}

std::vector<double> feature_values(const data::HrtfBundle& bundle, std::size_t subject,
                                   std::span<const std::size_t> measured, FeatureKind kind) {
  return subject_feature(bundle, subject, measured, kind).values;
}

}  // namespace

FeatureKind clue_feature_kind(FeatureKind retrieval) {
  return retrieval == FeatureKind::Lsd ? FeatureKind::Ild : retrieval;
}

CandidatePool make_candidate_pool(const data::HrtfBundle& bundle, std::span<const std::string> ids,
                                  std::span<const std::size_t> measured, const RetrievalConfig& retrieval) {
  CandidatePool pool;
  pool.ids.assign(ids.begin(), ids.end());
  for (const auto& id : ids) {
    const auto s = bundle.subject_index(id);
    pool.retrieval_features.push_back(retrieval.kind == FeatureKind::Lsd
                                          ? std::vector<double>{}
                                          : feature_values(bundle, s, measured, retrieval.kind));
    pool.clue_features[id] = feature_values(bundle, s, measured, clue_feature_kind(retrieval.kind));
  }
  return pool;
}

SubjectContext make_subject_context(const data::HrtfBundle& bundle, const std::string& id,
                                    const CandidatePool& pool, std::span<const std::size_t> measured,
                                    const RetrievalConfig& retrieval) {
  SubjectContext ctx;
  ctx.id = id;
  ctx.index = bundle.subject_index(id);
  ctx.clue_feature = feature_values(bundle, ctx.index, measured, clue_feature_kind(retrieval.kind));

  std::vector<std::string> ids;
  std::vector<std::vector<double>> feats;
  for (std::size_t i = 0; i < pool.ids.size(); ++i) {
    if (pool.ids[i] == id) continue;
    ids.push_back(pool.ids[i]);
    feats.push_back(pool.retrieval_features[i]);
  }
  if (retrieval.kind == FeatureKind::Lsd) {
    ctx.neighbors = retrieve_subjects_by_lsd(bundle, ids, measured_spectra(bundle, ctx.index, measured), measured,
                                             retrieval.M);
  } else {
    const auto target = feature_values(bundle, ctx.index, measured, retrieval.kind);
    ctx.neighbors = retrieve_subjects(ids, feats, target, retrieval.M);
  }
  return ctx;
}

std::vector<Clue> neighbor_clues(const ModelP& model, const CandidatePool& pool, const SubjectContext& ctx,
                                 const Direction& d) {
  std::vector<Clue> out;
  out.reserve(ctx.neighbors.size());
  for (const auto& id : ctx.neighbors) out.push_back(model.clue(d, pool.clue_features.at(id)));
  return out;
}

Matrix predict_field(const ModelP& model, const data::HrtfBundle& bundle, const CandidatePool& pool,
                     const SubjectContext& ctx) {
  Matrix field(bundle.direction_count(), bundle.width());
  for (std::size_t d = 0; d < bundle.direction_count(); ++d) {
    const auto g = build_subject_graph(bundle, ctx.neighbors, d);
    const auto& dir = bundle.directions[d];
    const auto pred = model.predict(g, neighbor_clues(model, pool, ctx, dir), model.clue(dir, ctx.clue_feature));
    std::copy(pred.begin(), pred.end(), field.row(d).begin());
  }
  return field;
}

double validation_lsd_p(const ModelP& model, const data::HrtfBundle& bundle, const CandidatePool& pool,
                        std::span<const SubjectContext> subjects, std::span<const std::size_t> measured) {
  const std::set<std::size_t> skip(measured.begin(), measured.end());
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& ctx : subjects) {
    for (std::size_t d = 0; d < bundle.direction_count(); ++d) {
      if (skip.count(d)) continue;
      const auto g = build_subject_graph(bundle, ctx.neighbors, d);
      const auto& dir = bundle.directions[d];
      const auto pred =
          model.predict(g, neighbor_clues(model, pool, ctx, dir), model.clue(dir, ctx.clue_feature));
      acc += lsd(pred, bundle.magnitude(ctx.index, d));
      ++count;
    }
  }
  return count ? acc / static_cast<double>(count) : 0.0;
}

ModelP train_model_p(const data::HrtfBundle& bundle, const data::SplitSpec& splits, const TrainPConfig& config,
                     TrainLog* log) {
  config.stage.validate();
  splits.validate(bundle);
  if (splits.train.size() < config.retrieval.M + 1) {
    throw DataError("HRTF-P training needs at least M + 1 = " + std::to_string(config.retrieval.M + 1) +
                    " training subjects");
  }
  if (splits.measured.empty()) throw DataError("HRTF-P needs a nonempty measurement subset");
  const auto& measured = splits.measured;

  const auto pool = make_candidate_pool(bundle, splits.train, measured, config.retrieval);
  std::vector<SubjectContext> train_ctx, val_ctx;
  for (const auto& id : splits.train) {
    train_ctx.push_back(make_subject_context(bundle, id, pool, measured, config.retrieval));
  }
  for (const auto& id : splits.validation) {
    val_ctx.push_back(make_subject_context(bundle, id, pool, measured, config.retrieval));
  }

  auto model_cfg = config.model;
  model_cfg.K = bundle.K;
  model_cfg.clue_features = measured.size();
  auto model = ModelP::init(model_cfg, derive_seed(config.seed, 1));
  const auto train_idx = subject_indices(bundle, splits.train);
  model.normalizer = SpectrumNormalizer::fit(bundle, train_idx);
  std::vector<std::vector<double>> clue_rows;
  for (const auto& id : splits.train) clue_rows.push_back(pool.clue_features.at(id));
  model.clue_standardizer = FeatureStandardizer::fit(clue_rows);

  auto params = model.parameters();
  ad::Optimizer opt({config.stage.optimizer, config.stage.learning_rate}, params);
  auto schedule = config.stage.make_schedule();

  TrainLog local;
  auto& L = log ? *log : local;
  L = TrainLog{};
  L.initial_validation = validation_lsd_p(model, bundle, pool, val_ctx, measured);
  L.best_validation = L.initial_validation;
  auto best = snapshot(params);

  struct Pair {
    std::size_t subject;
    std::size_t direction;
  };
  std::vector<Pair> pairs;
  for (std::size_t s = 0; s < train_ctx.size(); ++s) {
    for (std::size_t d = 0; d < bundle.direction_count(); ++d) pairs.push_back({s, d});
  }
  std::mt19937_64 rng(derive_seed(config.seed, 2));
  std::vector<double> truth(bundle.width());

  for (std::size_t epoch = 1; epoch <= config.stage.epochs; ++epoch) {
    shuffle(pairs, rng);
    double total = 0.0;
    for (const auto& [s, d] : pairs) {
      const auto& ctx = train_ctx[s];
      const auto& dir = bundle.directions[d];
      const auto g = build_subject_graph(bundle, ctx.neighbors, d);
      const auto pred = model.forward(g, neighbor_clues(model, pool, ctx, dir), model.clue(dir, ctx.clue_feature));
      const auto row = bundle.magnitude(ctx.index, d);
      std::copy(row.begin(), row.end(), truth.begin());
      const auto loss = loss_lsd(pred, truth);
      total += loss.item();
      ad::backward(loss);
      opt.step();
      opt.zero_grad();
    }
    const double val = validation_lsd_p(model, bundle, pool, val_ctx, measured);
    L.train_lsd.push_back(total / static_cast<double>(pairs.size()));
    L.validation_lsd.push_back(val);
    L.learning_rate.push_back(opt.learning_rate());
    if (val < L.best_validation) {
      L.best_validation = val;
      L.best_epoch = epoch;
      best = snapshot(params);
    }
    opt.set_learning_rate(schedule.epoch_end(val));
    log::info("train-p epoch ", epoch, "/", config.stage.epochs, " train ", L.train_lsd.back(), " dB, val ", val,
              " dB, lr ", L.learning_rate.back());
  }
  restore(params, best);
  return model;
}

// ---- upsampling ------------------------------------------------------------

std::vector<std::vector<std::size_t>> spatial_neighborhoods(std::span<const Direction> directions,
                                                            const SpatialGraphConfig& cfg) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(directions.size());
  for (const auto& d : directions) out.push_back(retrieve_directions(directions, d, cfg.delta_d, true));
  return out;
}

SpatialGraph field_graph(const Matrix& field, std::span<const Direction> directions, std::size_t target,
                         std::span<const std::size_t> neighbors, const SpatialGraphConfig& cfg) {
  Matrix rows(neighbors.size(), field.cols);
  std::vector<Direction> dirs;
  dirs.reserve(neighbors.size());
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    const auto src = field.row(neighbors[i]);
    std::copy(src.begin(), src.end(), rows.row(i).begin());
    dirs.push_back(directions[neighbors[i]]);
  }
  auto g = build_spatial_graph(rows, dirs, directions[target], cfg);
  g.neighbor_indices.assign(neighbors.begin(), neighbors.end());
  return g;
}

Matrix subject_field(const data::HrtfBundle& bundle, std::size_t subject) {
  Matrix m(bundle.direction_count(), bundle.width());
  for (std::size_t d = 0; d < bundle.direction_count(); ++d) {
    const auto row = bundle.magnitude(subject, d);
    std::copy(row.begin(), row.end(), m.row(d).begin());
  }
  return m;
}

Matrix upsample_field(const ModelU& model, const Matrix& field, std::span<const Direction> directions,
                      const SpatialGraphConfig& cfg) {
  if (field.rows != directions.size()) throw ContractViolation("upsample: field rows differ from direction count");
  const auto nbrs = spatial_neighborhoods(directions, cfg);
  Matrix out(field.rows, field.cols);
  for (std::size_t d = 0; d < field.rows; ++d) {
    const auto pred = model.predict(field_graph(field, directions, d, nbrs[d], cfg));
    std::copy(pred.begin(), pred.end(), out.row(d).begin());
  }
  return out;
}

namespace {

double field_lsd(const Matrix& a, const Matrix& b) {
  double acc = 0.0;
  for (std::size_t d = 0; d < a.rows; ++d) acc += lsd(a.row(d), b.row(d));
  return acc / static_cast<double>(a.rows);
}

}  // namespace

ModelU train_model_u(const data::HrtfBundle& bundle, const data::SplitSpec& splits, const TrainUConfig& config,
                     TrainLog* log) {
  config.stage.validate();
  config.graph.validate();
  splits.validate(bundle);
  if (splits.train.empty()) throw DataError("HRTF-U training needs training subjects");

  auto model_cfg = config.model;
  model_cfg.K = bundle.K;
  auto model = ModelU::init(model_cfg, derive_seed(config.seed, 3));
  model.normalizer = SpectrumNormalizer::fit(bundle, subject_indices(bundle, splits.train));

  const auto& dirs = bundle.directions;
  const auto nbrs = spatial_neighborhoods(dirs, config.graph);
  std::vector<Matrix> train_fields, val_fields;
  for (auto s : subject_indices(bundle, splits.train)) train_fields.push_back(subject_field(bundle, s));
  for (auto s : subject_indices(bundle, splits.validation)) val_fields.push_back(subject_field(bundle, s));

  auto validate = [&] {
    if (val_fields.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& f : val_fields) acc += field_lsd(upsample_field(model, f, dirs, config.graph), f);
    return acc / static_cast<double>(val_fields.size());
  };

  auto params = model.parameters();
  ad::Optimizer opt({config.stage.optimizer, config.stage.learning_rate}, params);
  auto schedule = config.stage.make_schedule();

  TrainLog local;
  auto& L = log ? *log : local;
  L = TrainLog{};
  L.initial_validation = validate();
  L.best_validation = L.initial_validation;
  auto best = snapshot(params);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t s = 0; s < train_fields.size(); ++s) {
    for (std::size_t d = 0; d < dirs.size(); ++d) pairs.emplace_back(s, d);
  }
  std::mt19937_64 rng(derive_seed(config.seed, 4));
  for (std::size_t epoch = 1; epoch <= config.stage.epochs; ++epoch) {
    shuffle(pairs, rng);
    double total = 0.0;
    for (const auto& [s, d] : pairs) {
      const auto& field = train_fields[s];
      const auto pred = model.forward(field_graph(field, dirs, d, nbrs[d], config.graph));
      const auto row = field.row(d);
      const auto loss = loss_lsd(pred, row);
      total += loss.item();
      ad::backward(loss);
      opt.step();
      opt.zero_grad();
    }
    const double val = validate();
    L.train_lsd.push_back(total / static_cast<double>(pairs.size()));
    L.validation_lsd.push_back(val);
    L.learning_rate.push_back(opt.learning_rate());
    if (val < L.best_validation) {
      L.best_validation = val;
      L.best_epoch = epoch;
      best = snapshot(params);
    }
    opt.set_learning_rate(schedule.epoch_end(val));
    log::info("train-u epoch ", epoch, "/", config.stage.epochs, " train ", L.train_lsd.back(), " dB, val ", val,
              " dB, lr ", L.learning_rate.back());
  }
  restore(params, best);
  return model;
}

ModelU finetune_model_u(const ModelU& model, const Matrix& field, std::span<const Direction> directions,
                        std::span<const std::size_t> measured, const Matrix& measured_spectra,
                        const SpatialGraphConfig& graph, const FinetuneConfig& config,
                        std::vector<double>* epoch_loss) {
  if (field.rows == 0) throw DataError("fine-tuning needs a nonempty predicted field");
  if (field.rows != directions.size()) throw ContractViolation("fine-tune: field rows differ from direction count");
  if (measured_spectra.rows != measured.size()) throw ContractViolation("fine-tune: one measured row per index");
  config.stage.validate();
  auto tuned = model.clone();
  if (config.stage.epochs == 0) return tuned;

  // The GAT stack is frozen, so each direction's target embedding is fixed.
  const auto nbrs = spatial_neighborhoods(directions, graph);
  std::vector<ad::Tensor> embeddings;
  embeddings.reserve(field.rows);
  for (std::size_t d = 0; d < field.rows; ++d) {
    embeddings.push_back(tuned.target_embedding(field_graph(field, directions, d, nbrs[d], graph)).detach());
  }
  Matrix targets = field;
  std::vector<bool> is_measured(field.rows, false);
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const auto src = measured_spectra.row(i);
    std::copy(src.begin(), src.end(), targets.row(measured[i]).begin());
    is_measured[measured[i]] = true;
  }

  auto params = tuned.head_parameters();
  ad::Optimizer opt({config.stage.optimizer, config.stage.learning_rate}, params);
  auto schedule = config.stage.make_schedule();
  std::vector<std::size_t> order(field.rows);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);
  for (std::size_t epoch = 0; epoch < config.stage.epochs; ++epoch) {
    shuffle(order, rng);
    double total = 0.0;
    for (auto d : order) {
      auto loss = loss_lsd(tuned.head(embeddings[d]), targets.row(d));
      total += loss.item();
      if (is_measured[d] && config.measured_weight != 1.0) loss = ad::scale(loss, config.measured_weight);
      ad::backward(loss);
      opt.step();
      opt.zero_grad();
    }
    const double mean_loss = total / static_cast<double>(order.size());
    if (epoch_loss) epoch_loss->push_back(mean_loss);
    opt.set_learning_rate(schedule.epoch_end(mean_loss));
  }
  return tuned;
}

}  // namespace graphnf
