#include "graphnf/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "graphnf/checkpoint.hpp"
#include "graphnf/log.hpp"
#include "graphnf/pipeline.hpp"

namespace graphnf::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::string bundle;
  std::string splits;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  std::size_t jobs = 0;
  std::size_t measurements = 0;
  std::size_t epochs_p = 0, epochs_u = 0, epochs_ft = 0;
  bool epochs_p_set = false, epochs_u_set = false, epochs_ft_set = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Experiment config (JSON)");
  cmd->add_option("--out", c.out, "Output directory (overrides config 'out')");
  cmd->add_option("--bundle", c.bundle, "Bundle directory (overrides config 'bundle')");
  cmd->add_option("--splits", c.splits, "Splits file (overrides config 'splits')");
  cmd->add_option("--seed", c.seed, "Global seed (overrides config 'seed')");
  cmd->add_option("--jobs", c.jobs, "Parallel per-subject jobs");
  cmd->add_option("--measurements", c.measurements, "Measurement count (overrides split.measurements)");
  cmd->add_option("--epochs-p", c.epochs_p, "HRTF-P epochs (overrides train_p.epochs)");
  cmd->add_option("--epochs-u", c.epochs_u, "HRTF-U epochs (overrides train_u.epochs)");
  cmd->add_option("--epochs-ft", c.epochs_ft, "Fine-tuning epochs (overrides finetune.epochs)");
  cmd->add_option("--set", c.sets, "Override any config key: dotted.path=value (value parsed as JSON when possible)");
}

void set_path(json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const auto key = assignment.substr(0, eq);
  const auto raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &root;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const auto part = key.substr(start, dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part)) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

ExperimentConfig resolve_config(const Common& c, CLI::App* cmd) {
  json j = json::object();
  if (!c.config.empty()) {
    std::ifstream is(c.config);
    if (!is) throw ConfigError("cannot open config " + c.config);
    try {
      j = json::parse(is);
    } catch (const json::parse_error& e) {
      throw ConfigError("config " + c.config + " is not valid JSON: " + e.what());
    }
  }
  for (const auto& s : c.sets) set_path(j, s);
  if (!c.out.empty()) j["out"] = c.out;
  if (!c.bundle.empty()) j["bundle"] = c.bundle;
  if (!c.splits.empty()) j["splits"] = c.splits;
  if (cmd->count("--seed")) j["seed"] = c.seed;
  if (cmd->count("--jobs")) j["jobs"] = c.jobs;
  if (cmd->count("--measurements")) j["split"]["measurements"] = c.measurements;
  if (cmd->count("--epochs-p")) j["train_p"]["epochs"] = c.epochs_p;
  if (cmd->count("--epochs-u")) j["train_u"]["epochs"] = c.epochs_u;
  if (cmd->count("--epochs-ft")) j["finetune"]["epochs"] = c.epochs_ft;
  return ExperimentConfig::from_json(j);
}

fs::path ensure_out(const ExperimentConfig& cfg) {
  fs::path out(cfg.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError("cannot create output directory " + out.string() + ": " + ec.message());
  return out;
}

void write_log(const TrainLog& log, const fs::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os.precision(17);
  os << "epoch,train_lsd_db,validation_lsd_db,learning_rate\n";
  os << "0,," << log.initial_validation << ",\n";
  for (std::size_t i = 0; i < log.train_lsd.size(); ++i) {
    os << i + 1 << "," << log.train_lsd[i] << "," << log.validation_lsd[i] << "," << log.learning_rate[i] << "\n";
  }
}

ModelP obtain_model_p(const Experiment& exp, const std::string& path, const fs::path& out) {
  if (!path.empty()) {
    if (!fs::exists(path)) throw DataError("HRTF-P checkpoint " + path + " does not exist");
    return load_model_p(path);
  }
  log::info("no --model-p given; training HRTF-P");
  TrainLog log;
  auto m = train_model_p(exp.bundle, exp.splits, train_p_config(exp.config), &log);
  save_model_p(m, out / "model_p.ckpt");
  write_log(log, out / "train_p_log.csv");
  return m;
}

ModelU obtain_model_u(const Experiment& exp, const std::string& path, const fs::path& out) {
  if (!path.empty()) {
    if (!fs::exists(path)) throw DataError("HRTF-U checkpoint " + path + " does not exist");
    return load_model_u(path);
  }
  log::info("no --model-u given; training HRTF-U");
  TrainLog log;
  auto m = train_model_u(exp.bundle, exp.splits, train_u_config(exp.config), &log);
  save_model_u(m, out / "model_u.ckpt");
  write_log(log, out / "train_u_log.csv");
  return m;
}

void emit(const EvalReport& r, const fs::path& out) {
  r.write_csv(out / ("report_" + r.method + ".csv"));
  r.write_summary(out / ("summary_" + r.method + ".txt"));
  std::cout << r.summary();
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"graphnf: graph-based HRTF personalization and upsampling"};
  app.require_subcommand(1);

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic spherical-head bundle");
  data::SyntheticConfig synth;
  std::string gen_out, gen_config;
  gen->add_option("--config", gen_config, "JSON file with generator keys (seed, subjects, directions, k, ...)");
  gen->add_option("--out", gen_out, "Bundle directory to write")->required();
  gen->add_option("--seed", synth.seed, "Generator seed");
  gen->add_option("--subjects", synth.subject_count, "Subject count");
  gen->add_option("--directions", synth.direction_count, "Direction count");
  gen->add_option("--k", synth.K, "Bins per ear (multiple of 8, 2K a power of two)");
  gen->add_option("--sample-rate", synth.sample_rate, "Sample rate in Hz");

  // make-splits
  Common splits_opts;
  auto* mk = app.add_subcommand("make-splits", "Partition subjects and choose the measured directions");
  add_common(mk, splits_opts);

  Common train_p_opts, train_u_opts, ft_opts, eval_opts, ablate_opts;
  auto* tp = app.add_subcommand("train-p", "Train the HRTF-P personalization model");
  add_common(tp, train_p_opts);
  auto* tu = app.add_subcommand("train-u", "Train the HRTF-U upsampling model");
  add_common(tu, train_u_opts);

  auto* ft = app.add_subcommand("finetune", "Fine-tune HRTF-U per test subject on HRTF-P predictions");
  add_common(ft, ft_opts);
  std::string ft_model_p, ft_model_u;
  ft->add_option("--model-p", ft_model_p, "HRTF-P checkpoint (trained when omitted)");
  ft->add_option("--model-u", ft_model_u, "HRTF-U checkpoint (trained when omitted)");

  auto* ev = app.add_subcommand("eval", "Evaluate a method on the test subjects");
  add_common(ev, eval_opts);
  std::string method, ev_model_p, ev_model_u;
  ev->add_option("--method", method, "Method to evaluate")
      ->required()
      ->check(CLI::IsMember({"graphnf", "graphnf-sca", "nn", "sel-lsd", "sel-itd", "sel-ild", "lininterp", "hrtf-u"}));
  ev->add_option("--model-p", ev_model_p, "HRTF-P checkpoint (trained when omitted)");
  ev->add_option("--model-u", ev_model_u, "HRTF-U checkpoint (trained when omitted)");

  auto* ab = app.add_subcommand("ablate", "Run the module-integration ablation");
  add_common(ab, ablate_opts);
  std::vector<std::string> variants{"no-clue-no-fusion", "clue-no-fusion", "full", "sca"};
  std::string ab_model_u;
  ab->add_option("--variants", variants, "Variants to run")
      ->check(CLI::IsMember({"no-clue-no-fusion", "clue-no-fusion", "full", "sca"}));
  ab->add_option("--model-u", ab_model_u, "HRTF-U checkpoint for the sca variant (trained when omitted)");

  auto* insp = app.add_subcommand("inspect-bundle", "Print a bundle summary");
  std::string insp_path;
  insp->add_option("bundle", insp_path, "Bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) {
      if (!gen_config.empty()) {
        std::ifstream is(gen_config);
        if (!is) throw ConfigError("cannot open " + gen_config);
        const auto j = json::parse(is);
        for (const auto& [k, v] : j.items()) {
          if (k == "seed" && !gen->count("--seed")) synth.seed = v;
          else if (k == "subjects" && !gen->count("--subjects")) synth.subject_count = v;
          else if (k == "directions" && !gen->count("--directions")) synth.direction_count = v;
          else if (k == "k" && !gen->count("--k")) synth.K = v;
          else if (k == "sample_rate" && !gen->count("--sample-rate")) synth.sample_rate = v;
          else if (k != "seed" && k != "subjects" && k != "directions" && k != "k" && k != "sample_rate")
            throw ConfigError("unknown generator key '" + k + "'");
        }
      }
      try {
        synth.validate();
      } catch (const ContractViolation& e) {
        throw ConfigError(e.what());
      }
      const auto bundle = data::generate_synthetic(synth);
      data::save_bundle(bundle, gen_out);
      std::cout << "wrote " << bundle.subject_count() << " subjects x " << bundle.direction_count()
                << " directions (K=" << bundle.K << ") to " << gen_out << "\n";
      return kOk;
    }
    if (insp->parsed()) {
      const auto b = data::load_bundle(insp_path);
      double lo = 1e300, hi = -1e300;
      for (float v : b.magnitudes) {
        lo = std::min(lo, static_cast<double>(v));
        hi = std::max(hi, static_cast<double>(v));
      }
      std::cout << "subjects: " << b.subject_count() << "\ndirections: " << b.direction_count() << "\nK: " << b.K
                << "\nsample_rate: " << b.sample_rate << "\nhrirs: " << (b.has_hrirs() ? "yes" : "no")
                << "\ntaps: " << b.taps << "\nmagnitude_range_db: [" << lo << ", " << hi << "]"
                << "\nprovenance: " << b.provenance << "\n";
      if (b.has_hrirs()) std::cout << "hrir_consistency_excess_db: " << data::hrir_consistency_excess(b) << "\n";
      return kOk;
    }
    if (mk->parsed()) {
      const auto cfg = resolve_config(splits_opts, mk);
      const auto out = ensure_out(cfg);
      auto c = cfg;
      c.splits.clear();
      const auto exp = prepare_experiment(c);
      data::save_splits(exp.splits, out / "splits.json");
      std::cout << "train " << exp.splits.train.size() << ", validation " << exp.splits.validation.size() << ", test "
                << exp.splits.test.size() << ", measured directions " << exp.splits.measured.size() << "\n";
      return kOk;
    }
    if (tp->parsed()) {
      const auto cfg = resolve_config(train_p_opts, tp);
      const auto out = ensure_out(cfg);
      const auto exp = prepare_experiment(cfg);
      TrainLog log;
      const auto m = train_model_p(exp.bundle, exp.splits, train_p_config(cfg), &log);
      save_model_p(m, out / "model_p.ckpt");
      write_log(log, out / "train_p_log.csv");
      std::cout << "best validation LSD " << log.best_validation << " dB at epoch " << log.best_epoch << "\n";
      return kOk;
    }
    if (tu->parsed()) {
      const auto cfg = resolve_config(train_u_opts, tu);
      const auto out = ensure_out(cfg);
      const auto exp = prepare_experiment(cfg);
      TrainLog log;
      const auto m = train_model_u(exp.bundle, exp.splits, train_u_config(cfg), &log);
      save_model_u(m, out / "model_u.ckpt");
      write_log(log, out / "train_u_log.csv");
      std::cout << "best validation LSD " << log.best_validation << " dB at epoch " << log.best_epoch << "\n";
      return kOk;
    }
    if (ft->parsed()) {
      const auto cfg = resolve_config(ft_opts, ft);
      const auto out = ensure_out(cfg);
      const auto exp = prepare_experiment(cfg);
      const auto mp = obtain_model_p(exp, ft_model_p, out);
      const auto mu = obtain_model_u(exp, ft_model_u, out);
      const auto& measured = exp.splits.measured;
      const auto pool = make_candidate_pool(exp.bundle, exp.splits.train, measured, cfg.retrieval);
      fs::create_directories(out / "finetuned");
      parallel_for(exp.splits.test.size(), cfg.jobs, [&](std::size_t i) {
        const auto ctx = make_subject_context(exp.bundle, exp.splits.test[i], pool, measured, cfg.retrieval);
        const auto field = predict_field(mp, exp.bundle, pool, ctx);
        Matrix truth(measured.size(), exp.bundle.width());
        for (std::size_t m = 0; m < measured.size(); ++m) {
          const auto row = exp.bundle.magnitude(ctx.index, measured[m]);
          std::copy(row.begin(), row.end(), truth.row(m).begin());
        }
        const auto tuned = finetune_model_u(mu, field, exp.bundle.directions, measured, truth, cfg.graph,
                                            finetune_config(cfg, ctx.index));
        save_model_u(tuned, out / "finetuned" / (ctx.id + ".ckpt"));
      });
      std::cout << "fine-tuned " << exp.splits.test.size() << " subjects into " << (out / "finetuned").string()
                << "\n";
      return kOk;
    }
    if (ev->parsed()) {
      const auto cfg = resolve_config(eval_opts, ev);
      const auto out = ensure_out(cfg);
      const auto exp = prepare_experiment(cfg);
      EvalReport report;
      if (method == "graphnf") {
        report = run_graphnf(exp, obtain_model_p(exp, ev_model_p, out)).report;
      } else if (method == "graphnf-sca") {
        const auto mp = obtain_model_p(exp, ev_model_p, out);
        report = run_graphnf_sca(exp, mp, obtain_model_u(exp, ev_model_u, out)).report;
      } else if (method == "hrtf-u") {
        report = run_hrtf_u_upsampling(exp, obtain_model_u(exp, ev_model_u, out)).report;
      } else if (method == "lininterp") {
        report = run_lininterp_upsampling(exp).report;
      } else {
        const auto kind = method == "nn"        ? BaselineKind::NearestNeighbor
                          : method == "sel-lsd" ? BaselineKind::SelectionLsd
                          : method == "sel-itd" ? BaselineKind::SelectionItd
                                                : BaselineKind::SelectionIld;
        report = run_personalization_baseline(exp, kind).report;
      }
      emit(report, out);
      return kOk;
    }
    if (ab->parsed()) {
      const auto cfg = resolve_config(ablate_opts, ab);
      const auto out = ensure_out(cfg);
      const auto exp = prepare_experiment(cfg);
      std::vector<AblationVariant> vs;
      for (const auto& v : variants) vs.push_back(ablation_variant_from_name(v));
      std::optional<ModelU> mu;
      if (!ab_model_u.empty()) mu = obtain_model_u(exp, ab_model_u, out);
      const auto result = run_ablation(exp, vs, mu ? &*mu : nullptr);
      std::ofstream os(out / "ablation_summary.txt", std::ios::trunc);
      for (const auto& [v, r] : result.reports) {
        r.write_csv(out / ("report_ablation_" + r.method + ".csv"));
        os << r.method << " mean_lsd_db " << r.mean_lsd << " mean_ild_err_db " << r.mean_ild_error << "\n";
        std::cout << r.method << ": mean LSD " << r.mean_lsd << " dB, mean ILD error " << r.mean_ild_error << " dB\n";
      }
      os << "expected_ordering_holds " << (result.ordering_holds ? "yes" : "no") << "\n";
      std::cout << "expected ordering (sca < full <= clue-no-fusion <= no-clue-no-fusion): "
                << (result.ordering_holds ? "holds" : "does not hold") << "\n";
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged (parameter " << e.parameter_index() << "): " << e.what() << "\n";
    return kDivergence;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace graphnf::cli
