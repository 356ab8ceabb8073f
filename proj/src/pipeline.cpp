#include "graphnf/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "graphnf/log.hpp"

namespace graphnf {

using json = nlohmann::json;

// ---- config ------------------------------------------------------------------

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& into, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: '" + (where.empty() ? std::string(key) : where + "." + key) + "' has the wrong type");
  }
}

StageConfig read_stage(const json& j, const std::string& where, StageConfig s, double* measured_weight = nullptr) {
  if (measured_weight) {
    check_keys(j, where, {"optimizer", "lr", "epochs", "schedule", "decay", "patience", "measured_weight"});
    read(j, "measured_weight", *measured_weight, where);
  } else {
    check_keys(j, where, {"optimizer", "lr", "epochs", "schedule", "decay", "patience"});
  }
  std::string opt(ad::optimizer_name(s.optimizer));
  read(j, "optimizer", opt, where);
  s.optimizer = ad::optimizer_kind_from_name(opt);
  read(j, "lr", s.learning_rate, where);
  read(j, "epochs", s.epochs, where);
  std::string sched = s.schedule == StageConfig::Schedule::Plateau ? "plateau" : "exponential";
  read(j, "schedule", sched, where);
  if (sched == "plateau") {
    s.schedule = StageConfig::Schedule::Plateau;
  } else if (sched == "exponential") {
    s.schedule = StageConfig::Schedule::Exponential;
  } else {
    throw ConfigError("config: " + where + ".schedule must be plateau or exponential");
  }
  read(j, "decay", s.decay, where);
  read(j, "patience", s.patience, where);
  return s;
}

json stage_json(const StageConfig& s) {
  return {{"optimizer", std::string(ad::optimizer_name(s.optimizer))},
          {"lr", s.learning_rate},
          {"epochs", s.epochs},
          {"schedule", s.schedule == StageConfig::Schedule::Plateau ? "plateau" : "exponential"},
          {"decay", s.decay},
          {"patience", s.patience}};
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  check_keys(j, "", {"bundle", "splits", "split", "retrieval", "graph", "model_p", "model_u", "train_p", "train_u",
                     "finetune", "seed", "zeta", "jobs", "out"});
  read(j, "bundle", c.bundle, "");
  read(j, "splits", c.splits, "");
  read(j, "seed", c.seed, "");
  read(j, "zeta", c.zeta, "");
  read(j, "jobs", c.jobs, "");
  read(j, "out", c.out, "");
  if (j.contains("split")) {
    const auto& s = j["split"];
    check_keys(s, "split", {"fractions", "seed", "measurements"});
    read(s, "fractions", c.fractions, "split");
    read(s, "seed", c.split_seed, "split");
    read(s, "measurements", c.measurement_count, "split");
  }
  if (j.contains("retrieval")) {
    const auto& r = j["retrieval"];
    check_keys(r, "retrieval", {"feature", "M"});
    std::string feature(feature_kind_name(c.retrieval.kind));
    read(r, "feature", feature, "retrieval");
    c.retrieval.kind = feature_kind_from_name(feature);
    read(r, "M", c.retrieval.M, "retrieval");
  }
  if (j.contains("graph")) {
    const auto& g = j["graph"];
    check_keys(g, "graph", {"a", "delta_d", "sigma"});
    read(g, "a", c.graph.a, "graph");
    read(g, "delta_d", c.graph.delta_d, "graph");
    read(g, "sigma", c.graph.sigma, "graph");
  }
  if (j.contains("model_p")) {
    const auto& m = j["model_p"];
    check_keys(m, "model_p",
               {"gat1_heads", "gat1_dim", "gat2_dim", "fusion_heads", "fusion_dim", "rff_features", "rff_sigma"});
    read(m, "gat1_heads", c.model_p.gat1_heads, "model_p");
    read(m, "gat1_dim", c.model_p.gat1_dim, "model_p");
    read(m, "gat2_dim", c.model_p.gat2_dim, "model_p");
    read(m, "fusion_heads", c.model_p.fusion_heads, "model_p");
    read(m, "fusion_dim", c.model_p.fusion_dim, "model_p");
    read(m, "rff_features", c.model_p.rff_features, "model_p");
    read(m, "rff_sigma", c.model_p.rff_sigma, "model_p");
  }
  if (j.contains("model_u")) {
    const auto& m = j["model_u"];
    check_keys(m, "model_u", {"gat1_heads", "gat1_dim", "gat2_dim"});
    read(m, "gat1_heads", c.model_u.gat1_heads, "model_u");
    read(m, "gat1_dim", c.model_u.gat1_dim, "model_u");
    read(m, "gat2_dim", c.model_u.gat2_dim, "model_u");
  }
  if (j.contains("train_p")) c.train_p = read_stage(j["train_p"], "train_p", c.train_p);
  if (j.contains("train_u")) c.train_u = read_stage(j["train_u"], "train_u", c.train_u);
  if (j.contains("finetune")) c.finetune = read_stage(j["finetune"], "finetune", c.finetune, &c.measured_weight);
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  auto ft = stage_json(finetune);
  ft["measured_weight"] = measured_weight;
  return {{"bundle", bundle},
          {"splits", splits},
          {"split", {{"fractions", fractions}, {"seed", split_seed}, {"measurements", measurement_count}}},
          {"retrieval", {{"feature", std::string(feature_kind_name(retrieval.kind))}, {"M", retrieval.M}}},
          {"graph", {{"a", graph.a}, {"delta_d", graph.delta_d}, {"sigma", graph.sigma}}},
          {"model_p",
           {{"gat1_heads", model_p.gat1_heads},
            {"gat1_dim", model_p.gat1_dim},
            {"gat2_dim", model_p.gat2_dim},
            {"fusion_heads", model_p.fusion_heads},
            {"fusion_dim", model_p.fusion_dim},
            {"rff_features", model_p.rff_features},
            {"rff_sigma", model_p.rff_sigma}}},
          {"model_u",
           {{"gat1_heads", model_u.gat1_heads}, {"gat1_dim", model_u.gat1_dim}, {"gat2_dim", model_u.gat2_dim}}},
          {"train_p", stage_json(train_p)},
          {"train_u", stage_json(train_u)},
          {"finetune", ft},
          {"seed", seed},
          {"zeta", zeta},
          {"jobs", jobs},
          {"out", out}};
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  try {
    return from_json(json::parse(is));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

void ExperimentConfig::validate() const {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  if (measurement_count == 0) throw ConfigError("measurement count must be >= 1");
  if (retrieval.M == 0) throw ConfigError("retrieval M must be >= 1");
  graph.validate();
  train_p.validate();
  train_u.validate();
  finetune.validate();
  if (!(measured_weight > 0.0)) throw ConfigError("finetune.measured_weight must be > 0");
  if (!(zeta > 0.0)) throw ConfigError("zeta must be > 0");
  if (jobs == 0) throw ConfigError("jobs must be >= 1");
  if (!(model_p.rff_sigma > 0.0) || model_p.rff_features == 0) throw ConfigError("invalid RFF settings");
}

Experiment prepare_experiment(const ExperimentConfig& config) {
  if (config.bundle.empty()) throw ConfigError("config: no bundle path given");
  if (!std::filesystem::exists(config.bundle)) throw DataError("bundle " + config.bundle + " does not exist");
  return prepare_experiment(config, data::load_bundle(config.bundle));
}

Experiment prepare_experiment(const ExperimentConfig& config, data::HrtfBundle bundle) {
  config.validate();
  Experiment e;
  e.config = config;
  e.bundle = std::move(bundle);
  if (!config.splits.empty()) {
    e.splits = data::load_splits(config.splits);
  } else {
    e.splits = data::make_splits(e.bundle, config.fractions, config.measurement_count, config.split_seed);
  }
  e.splits.validate(e.bundle);
  return e;
}

TrainPConfig train_p_config(const ExperimentConfig& config, PVariant variant) {
  TrainPConfig t;
  t.model = config.model_p;
  t.model.variant = variant;
  t.retrieval = config.retrieval;
  t.stage = config.train_p;
  t.seed = config.seed;
  return t;
}

TrainUConfig train_u_config(const ExperimentConfig& config) {
  TrainUConfig t;
  t.model = config.model_u;
  t.graph = config.graph;
  t.stage = config.train_u;
  t.seed = config.seed;
  return t;
}

FinetuneConfig finetune_config(const ExperimentConfig& config, std::size_t subject_index) {
  FinetuneConfig f;
  f.stage = config.finetune;
  f.measured_weight = config.measured_weight;
  f.seed = derive_seed(config.seed, 1000 + subject_index);
  return f;
}

// ---- evaluation ----------------------------------------------------------------

void EvalReport::recompute() {
  mean_lsd = 0.0;
  mean_ild_error = 0.0;
  exceed_count = 0;
  for (auto& e : entries) {
    e.exceeds_zeta = e.lsd_db > zeta;
    mean_lsd += e.lsd_db;
    mean_ild_error += e.ild_err_db;
    exceed_count += e.exceeds_zeta ? 1 : 0;
  }
  if (!entries.empty()) {
    mean_lsd /= static_cast<double>(entries.size());
    mean_ild_error /= static_cast<double>(entries.size());
  }
}

void EvalReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << "subject,az,el,lsd_db,ild_err_db,exceeds_zeta\n";
  char buf[256];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%d\n", e.subject.c_str(), e.dir.azimuth,
                  e.dir.elevation, e.lsd_db, e.ild_err_db, e.exceeds_zeta ? 1 : 0);
    os << buf;
  }
}

std::string EvalReport::summary() const {
  std::set<std::string> subjects;
  for (const auto& e : entries) subjects.insert(e.subject);
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "method: %s\nsubjects: %zu\nentries: %zu\nmean_lsd_db: %.6f\nmean_ild_err_db: %.6f\nzeta_db: %g\n"
                "exceeding_zeta: %zu\n",
                method.c_str(), subjects.size(), entries.size(), mean_lsd, mean_ild_error, zeta, exceed_count);
  return buf;
}

void EvalReport::write_summary(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << summary();
}

EvalReport evaluate(std::string method, const PredictionSet& predictions, const data::HrtfBundle& truth,
                    std::span<const std::size_t> excluded, double zeta) {
  if (predictions.subjects.size() != predictions.fields.size()) {
    throw ContractViolation("evaluate: one field per subject required");
  }
  const std::set<std::size_t> skip(excluded.begin(), excluded.end());
  EvalReport r;
  r.method = std::move(method);
  r.zeta = zeta;
  for (std::size_t i = 0; i < predictions.subjects.size(); ++i) {
    const auto s = truth.subject_index(predictions.subjects[i]);
    const auto& field = predictions.fields[i];
    if (field.rows != truth.direction_count() || field.cols != truth.width()) {
      throw ContractViolation("evaluate: prediction field for '" + predictions.subjects[i] +
                              "' is misaligned with the bundle");
    }
    for (std::size_t d = 0; d < field.rows; ++d) {
      if (skip.count(d)) continue;
      const auto t = truth.magnitude_db(s, d);
      EvalEntry e;
      e.subject = predictions.subjects[i];
      e.direction = d;
      e.dir = truth.directions[d];
      e.lsd_db = lsd(field.row(d), t);
      e.ild_err_db = std::abs(ild_scalar(field.row(d)) - ild_scalar(std::span<const double>(t)));
      r.entries.push_back(std::move(e));
    }
  }
  r.recompute();
  return r;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const auto i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

// ---- methods -------------------------------------------------------------------

namespace {

Matrix rows_of(const data::HrtfBundle& bundle, std::size_t subject, std::span<const std::size_t> dirs) {
  Matrix m(dirs.size(), bundle.width());
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const auto row = bundle.magnitude(subject, dirs[i]);
    std::copy(row.begin(), row.end(), m.row(i).begin());
  }
  return m;
}

PredictionSet empty_set(const Experiment& exp) {
  PredictionSet p;
  p.subjects = exp.splits.test;
  p.fields.resize(p.subjects.size());
  return p;
}

MethodResult finish(const Experiment& exp, std::string method, PredictionSet p, bool personalization) {
  MethodResult r;
  const std::vector<std::size_t> none;
  r.report = evaluate(std::move(method), p, exp.bundle, personalization ? std::span<const std::size_t>(exp.splits.measured)
                                                                        : std::span<const std::size_t>(none),
                      exp.config.zeta);
  r.predictions = std::move(p);
  return r;
}

}  // namespace

MethodResult run_graphnf(const Experiment& exp, const ModelP& model) {
  const auto& measured = exp.splits.measured;
  const auto pool = make_candidate_pool(exp.bundle, exp.splits.train, measured, exp.config.retrieval);
  auto p = empty_set(exp);
  parallel_for(p.subjects.size(), exp.config.jobs, [&](std::size_t i) {
    const auto ctx = make_subject_context(exp.bundle, p.subjects[i], pool, measured, exp.config.retrieval);
    p.fields[i] = predict_field(model, exp.bundle, pool, ctx);
  });
  return finish(exp, "graphnf", std::move(p), true);
}

MethodResult run_graphnf_sca(const Experiment& exp, const ModelP& model_p, const ModelU& model_u) {
  const auto& measured = exp.splits.measured;
  const auto& dirs = exp.bundle.directions;
  const auto pool = make_candidate_pool(exp.bundle, exp.splits.train, measured, exp.config.retrieval);
  auto p = empty_set(exp);
  parallel_for(p.subjects.size(), exp.config.jobs, [&](std::size_t i) {
    const auto ctx = make_subject_context(exp.bundle, p.subjects[i], pool, measured, exp.config.retrieval);
    const auto field = predict_field(model_p, exp.bundle, pool, ctx);
    const auto tuned = finetune_model_u(model_u, field, dirs, measured, rows_of(exp.bundle, ctx.index, measured),
                                        exp.config.graph, finetune_config(exp.config, ctx.index));
    p.fields[i] = upsample_field(tuned, field, dirs, exp.config.graph);
  });
  return finish(exp, "graphnf-sca", std::move(p), true);
}

MethodResult run_personalization_baseline(const Experiment& exp, BaselineKind kind) {
  if (kind == BaselineKind::LinearInterp) {
    throw ContractViolation("linear interpolation runs under the upsampling protocol");
  }
  const auto& measured = exp.splits.measured;
  const auto& b = exp.bundle;
  auto p = empty_set(exp);
  std::vector<Direction> measured_dirs;
  for (auto m : measured) measured_dirs.push_back(b.directions[m]);
  parallel_for(p.subjects.size(), exp.config.jobs, [&](std::size_t i) {
    const auto s = b.subject_index(p.subjects[i]);
    Matrix field(b.direction_count(), b.width());
    if (kind == BaselineKind::NearestNeighbor) {
      const auto spectra = rows_of(b, s, measured);
      for (std::size_t d = 0; d < b.direction_count(); ++d) {
        const auto pred = nearest_neighbor(measured_dirs, spectra, b.directions[d]);
        std::copy(pred.begin(), pred.end(), field.row(d).begin());
      }
    } else {
      const auto feature = kind == BaselineKind::SelectionLsd   ? FeatureKind::Lsd
                           : kind == BaselineKind::SelectionItd ? FeatureKind::Itd
                                                                : FeatureKind::Ild;
      const auto chosen = hrtf_selection(b, exp.splits.train, s, measured, feature);
      field = subject_field(b, b.subject_index(chosen.subject));
    }
    p.fields[i] = std::move(field);
  });
  return finish(exp, std::string(baseline_name(kind)), std::move(p), true);
}

MethodResult run_lininterp_upsampling(const Experiment& exp) {
  const auto& b = exp.bundle;
  auto p = empty_set(exp);
  parallel_for(p.subjects.size(), exp.config.jobs, [&](std::size_t i) {
    const auto s = b.subject_index(p.subjects[i]);
    Matrix field(b.direction_count(), b.width());
    for (std::size_t d = 0; d < b.direction_count(); ++d) {
      std::vector<std::size_t> others;
      std::vector<Direction> other_dirs;
      for (std::size_t o = 0; o < b.direction_count(); ++o) {
        if (o == d) continue;
        others.push_back(o);
        other_dirs.push_back(b.directions[o]);
      }
      const auto pred = linear_interp(other_dirs, rows_of(b, s, others), b.directions[d]);
      std::copy(pred.begin(), pred.end(), field.row(d).begin());
    }
    p.fields[i] = std::move(field);
  });
  return finish(exp, "lininterp", std::move(p), false);
}

MethodResult run_hrtf_u_upsampling(const Experiment& exp, const ModelU& model) {
  const auto& b = exp.bundle;
  auto p = empty_set(exp);
  parallel_for(p.subjects.size(), exp.config.jobs, [&](std::size_t i) {
    const auto s = b.subject_index(p.subjects[i]);
    p.fields[i] = upsample_field(model, subject_field(b, s), b.directions, exp.config.graph);
  });
  return finish(exp, "hrtf-u", std::move(p), false);
}

AblationVariant ablation_variant_from_name(std::string_view name) {
  if (name == "no-clue-no-fusion") return AblationVariant::NoClueNoFusion;
  if (name == "clue-no-fusion") return AblationVariant::ClueNoFusion;
  if (name == "full") return AblationVariant::Full;
  if (name == "sca") return AblationVariant::Sca;
  throw ConfigError("unknown ablation variant '" + std::string(name) + "'");
}

std::string_view ablation_variant_name(AblationVariant v) {
  switch (v) {
    case AblationVariant::NoClueNoFusion: return "no-clue-no-fusion";
    case AblationVariant::ClueNoFusion: return "clue-no-fusion";
    case AblationVariant::Full: return "full";
    case AblationVariant::Sca: return "sca";
  }
  return "?";
}

AblationResult run_ablation(const Experiment& exp, std::span<const AblationVariant> variants, const ModelU* model_u) {
  AblationResult out;
  std::optional<ModelP> full;
  std::optional<ModelU> trained_u;
  auto full_model = [&]() -> const ModelP& {
    if (!full) full = train_model_p(exp.bundle, exp.splits, train_p_config(exp.config, PVariant::Full));
    return *full;
  };
  for (auto v : variants) {
    EvalReport report;
    switch (v) {
      case AblationVariant::NoClueNoFusion:
      case AblationVariant::ClueNoFusion: {
        const auto pv = v == AblationVariant::NoClueNoFusion ? PVariant::NoClueNoFusion : PVariant::ClueNoFusion;
        report = run_graphnf(exp, train_model_p(exp.bundle, exp.splits, train_p_config(exp.config, pv))).report;
        break;
      }
      case AblationVariant::Full: report = run_graphnf(exp, full_model()).report; break;
      case AblationVariant::Sca: {
        if (!model_u && !trained_u) trained_u = train_model_u(exp.bundle, exp.splits, train_u_config(exp.config));
        report = run_graphnf_sca(exp, full_model(), model_u ? *model_u : *trained_u).report;
        break;
      }
    }
    report.method = std::string(ablation_variant_name(v));
    log::info("ablation ", report.method, ": mean LSD ", report.mean_lsd, " dB");
    out.reports.emplace_back(v, std::move(report));
  }
  auto lsd_of = [&](AblationVariant v) -> std::optional<double> {
    for (const auto& [k, r] : out.reports) {
      if (k == v) return r.mean_lsd;
    }
    return std::nullopt;
  };
  const auto a = lsd_of(AblationVariant::NoClueNoFusion), b = lsd_of(AblationVariant::ClueNoFusion),
             c = lsd_of(AblationVariant::Full), d = lsd_of(AblationVariant::Sca);
  out.ordering_holds = a && b && c && d && *d < *c && *c <= *b && *b <= *a;
  return out;
}

}  // namespace graphnf
