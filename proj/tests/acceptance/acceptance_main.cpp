// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <complex>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "graphnf/checkpoint.hpp"
#include "graphnf/cli.hpp"
#include "graphnf/dsp.hpp"
#include "graphnf/pipeline.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
namespace ad = graphnf::ad;
namespace nn = graphnf::nn;
using graphnf::Matrix;
using json = nlohmann::json;
using gnf_test::gradient_error;
using gnf_test::random_param;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

ad::Tensor probe(const ad::Tensor& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ad::sum(ad::mul(out, gnf_test::random_const(out.shape(), rng)));
}

ad::Tensor away_from_zero(ad::Shape shape, std::mt19937_64& rng) {
  auto t = random_param(std::move(shape), rng, 0.05, 2.0);
  std::bernoulli_distribution sign(0.5);
  for (auto& x : t.mutable_values())
    if (sign(rng)) x = -x;
  return t;
}

// ---- shared small models ---------------------------------------------------

graphnf::ModelPConfig small_p(std::size_t K) {
  graphnf::ModelPConfig c;
  c.K = K;
  c.clue_features = 3;
  c.gat1_heads = 2;
  c.gat1_dim = 4;
  c.gat2_dim = 8;
  c.fusion_heads = 2;
  c.fusion_dim = 4;
  c.rff_features = 8;
  return c;
}

graphnf::ModelUConfig small_u(std::size_t K) {
  graphnf::ModelUConfig c;
  c.K = K;
  c.gat1_heads = 2;
  c.gat1_dim = 4;
  c.gat2_dim = 8;
  return c;
}

struct PInputs {
  graphnf::SubjectGraph graph;
  std::vector<graphnf::Clue> clues;
  graphnf::Clue target;
};

PInputs p_inputs(const graphnf::ModelP& m, std::size_t nodes, std::mt19937_64& rng) {
  PInputs in;
  in.graph.features = Matrix(nodes, 2 * m.config.K);
  for (auto& v : in.graph.features.data) v = std::uniform_real_distribution<double>(-30, 5)(rng);
  for (std::size_t i = 0; i < nodes; ++i) {
    in.graph.node_ids.push_back("n" + std::to_string(i));
    in.clues.push_back(m.clue(graphnf::Direction::make(40.0 * i, 5), gnf_test::uniform_values(3, -5, 5, rng)));
  }
  in.target = m.clue(graphnf::Direction::make(75, -10), gnf_test::uniform_values(3, -5, 5, rng));
  return in;
}

// ---- A1 --------------------------------------------------------------------

Outcome a1() {
  Outcome o;
  std::mt19937_64 rng(101);
  double ops = 0.0;
  auto track = [&](double e) { ops = std::max(ops, e); };
  for (int t = 0; t < 10; ++t) {
    const auto m = pick(rng, 1, 5), k = pick(rng, 1, 5), n = pick(rng, 1, 5);
    auto a = random_param({m, k}, rng), b = random_param({k, n}, rng);
    track(gradient_error([&] { return probe(ad::matmul(a, b), t); }, {a, b}));
    auto u = random_param({m}, rng), v = random_param({1, n}, rng);
    track(gradient_error([&] { return probe(ad::outer(u, v), t); }, {u, v}));
    track(gradient_error([&] { return probe(ad::transpose(a), t); }, {a}));
    track(gradient_error([&] { return probe(ad::reshape(a, {k, m}), t); }, {a}));

    const ad::Shape shapes[] = {{m, k}, {1, k}, {m, 1}, {k}, {}};
    auto c = random_param(shapes[t % 5], rng);
    track(gradient_error([&] { return probe(ad::add(a, c), t); }, {a, c}));
    track(gradient_error([&] { return probe(ad::sub(c, a), t); }, {a, c}));
    track(gradient_error([&] { return probe(ad::mul(a, c), t); }, {a, c}));
    track(gradient_error([&] { return probe(ad::scale(a, 1.3), t); }, {a}));

    const std::size_t axis = t % 2;
    std::vector<ad::Tensor> parts;
    for (std::size_t i = 0; i < 2; ++i) {
      ad::Shape s{m, k};
      s[axis] = pick(rng, 1, 3);
      parts.push_back(random_param(s, rng));
    }
    track(gradient_error([&] { return probe(ad::concat(parts, axis), t); }, parts));
    auto big = random_param({m + 2, k + 2}, rng);
    track(gradient_error([&] { return probe(ad::slice(big, axis, 1, big.dim(axis)), t); }, {big}));

    auto p = random_param({m, k}, rng, 0.3, 3.0);
    track(gradient_error([&] { return probe(ad::exp(a), t); }, {a}));
    track(gradient_error([&] { return probe(ad::log(p), t); }, {p}));
    track(gradient_error([&] { return probe(ad::sqrt(p), t); }, {p}));
    auto r3 = random_param({m, k, 2}, rng);
    track(gradient_error([&] { return ad::mul(ad::sum(r3), ad::mean(r3)); }, {r3}));
    track(gradient_error([&] { return probe(ad::sum(r3, t % 3, t % 2 == 0), t); }, {r3}));
    track(gradient_error([&] { return probe(ad::mean(r3, t % 3, t % 2 == 1), t); }, {r3}));

    auto z = away_from_zero({m, k}, rng);
    track(gradient_error([&] { return probe(ad::elu(z), t); }, {z}));
    track(gradient_error([&] { return probe(ad::leaky_relu(z, 0.01), t); }, {z}));
    track(gradient_error([&] { return probe(ad::softmax(a, axis), t); }, {a}));

    const auto cin = pick(rng, 1, 3), cout = pick(rng, 1, 3);
    auto x = random_param({cin, 4}, rng);
    auto w = random_param({cin, cout, 4}, rng);
    auto bias = random_param({cout}, rng);
    track(gradient_error([&] { return probe(ad::conv_transpose1d(x, w, bias, 2, 1), t); }, {x, w, bias}));
    auto y = random_param({cout, 8}, rng);
    track(gradient_error([&] { return probe(ad::conv1d(y, w, 2, 1), t); }, {y, w}));
  }
  o.require(ops < 1e-6, "op gradients within 1e-6");
  o.note("ops max rel err " + fmt(ops, 3));

  double models = 0.0;
  for (auto variant : {graphnf::PVariant::Full, graphnf::PVariant::ClueNoFusion, graphnf::PVariant::NoClueNoFusion}) {
    auto cfg = small_p(16);
    cfg.variant = variant;
    const auto m = graphnf::ModelP::init(cfg, 7);
    auto in = p_inputs(m, 4, rng);
    const auto truth = gnf_test::uniform_values(32, -20, 5, rng);
    const auto params = m.parameters();
    models = std::max(models, gradient_error([&] { return graphnf::loss_lsd(m.forward(in.graph, in.clues, in.target), truth); },
                                             params, gnf_test::sample_coords(params, 150, rng)));
  }
  {
    const auto m = graphnf::ModelU::init(small_u(16), 8);
    const auto dirs = graphnf::data::uniform_ring_grid(120);
    Matrix field(dirs.size(), 32);
    for (auto& v : field.data) v = std::uniform_real_distribution<double>(-25, 5)(rng);
    const graphnf::SpatialGraphConfig gc;
    const auto nbrs = graphnf::spatial_neighborhoods(dirs, gc);
    const auto g = graphnf::field_graph(field, dirs, 17, nbrs[17], gc);
    const auto truth = gnf_test::uniform_values(32, -20, 5, rng);
    const auto params = m.parameters();
    models = std::max(models, gradient_error([&] { return graphnf::loss_lsd(m.forward(g), truth); }, params,
                                             gnf_test::sample_coords(params, 150, rng)));
  }
  o.require(models < 1e-4, "model gradients within 1e-4");
  o.note("models max rel err " + fmt(models, 3));
  return o;
}

// ---- A2 --------------------------------------------------------------------

Outcome a2() {
  Outcome o;
  std::mt19937_64 rng(202);
  const auto L = nn::GatLayer::init(6, 3, 4, rng);
  double row_err = 0.0, equi = 0.0;
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(t % 7);
    auto x = gnf_test::random_const({n, 6}, rng, -2, 2);
    Matrix lw(n, n, -INFINITY);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        if (i == j || (i * 7 + j) % 3 != 0) lw(i, j) = lw(j, i) = std::log(std::uniform_real_distribution<double>(0.05, 1)(rng));
    std::vector<ad::Tensor> att;
    const auto y = nn::gat_forward(L, x, nn::attention_bias(lw), &att);
    for (const auto& a : att)
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += a.values()[i * n + j];
        row_err = std::max(row_err, std::abs(s - 1.0));
      }
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
    std::vector<double> px(n * 6);
    Matrix plw(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < 6; ++k) px[i * 6 + k] = x.values()[p[i] * 6 + k];
      for (std::size_t j = 0; j < n; ++j) plw(i, j) = lw(p[i], p[j]);
    }
    const auto py = nn::gat_forward(L, ad::Tensor::constant({n, 6}, px), nn::attention_bias(plw));
    const auto w = L.out_dim();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < w; ++k) equi = std::max(equi, std::abs(py.values()[i * w + k] - y.values()[p[i] * w + k]));
  }
  o.require(row_err <= 1e-12, "attention rows sum to 1 within 1e-12");
  o.require(equi <= 1e-12, "gat_forward permutation equivariance");

  double enc = 0.0;
  const auto m = graphnf::ModelP::init(small_p(16), 3);
  for (int t = 0; t < 10; ++t) {
    auto in = p_inputs(m, 5, rng);
    const auto base = m.forward(in.graph, in.clues, in.target);
    std::vector<std::size_t> p{4, 2, 0, 3, 1};
    auto g2 = in.graph;
    std::vector<graphnf::Clue> c2;
    for (std::size_t i = 0; i < 5; ++i) {
      const auto src = in.graph.features.row(p[i]);
      std::copy(src.begin(), src.end(), g2.features.row(i).begin());
      g2.node_ids[i] = in.graph.node_ids[p[i]];
      c2.push_back(in.clues[p[i]]);
    }
    const auto perm = m.forward(g2, c2, in.target);
    for (std::size_t k = 0; k < base.size(); ++k) enc = std::max(enc, std::abs(perm.values()[k] - base.values()[k]));
  }
  o.require(enc <= 1e-12, "encode/forward permutation invariance");

  double fu = 0.0;
  const auto u = graphnf::ModelU::init(small_u(16), 4);
  const auto dirs = graphnf::data::uniform_ring_grid(150);
  Matrix field(dirs.size(), 32);
  for (auto& v : field.data) v = std::uniform_real_distribution<double>(-25, 5)(rng);
  const graphnf::SpatialGraphConfig gc;
  const auto nbrs = graphnf::spatial_neighborhoods(dirs, gc);
  for (std::size_t d = 0; d < dirs.size(); d += 7) {
    auto order = nbrs[d];
    std::shuffle(order.begin(), order.end(), rng);
    const auto a = u.predict(graphnf::field_graph(field, dirs, d, nbrs[d], gc));
    const auto b = u.predict(graphnf::field_graph(field, dirs, d, order, gc));
    for (std::size_t k = 0; k < a.size(); ++k) fu = std::max(fu, std::abs(a[k] - b[k]));
  }
  o.require(fu <= 1e-12, "forward_u neighbor-order invariance");
  o.note("row err " + fmt(row_err, 2) + ", equivariance " + fmt(equi, 2) + ", encode " + fmt(enc, 2) +
         ", forward_u " + fmt(fu, 2));
  return o;
}

// ---- A3 --------------------------------------------------------------------

Outcome a3() {
  Outcome o;
  std::mt19937_64 rng(303);
  const auto h = gnf_test::uniform_values(128, -30, 10, rng);
  o.require(graphnf::lsd(h, h) == 0.0, "LSD(H,H) = 0");
  auto up = h;
  for (auto& v : up) v += 20.0;
  o.require(std::abs(graphnf::lsd(up, h) - 20.0) <= 1e-9, "20 dB offset gives 20");
  auto left = h;
  for (std::size_t k = 0; k < 64; ++k) left[k] += 6.0;
  const double l6 = graphnf::lsd(left, h);
  const double i6 = std::abs(graphnf::ild_scalar(left) - graphnf::ild_scalar(h));
  o.require(std::abs(l6 - std::sqrt(18.0)) <= 1e-9, "single-ear 6 dB LSD sqrt(18)");
  o.require(std::abs(i6 - 6.0) <= 1e-9, "single-ear 6 dB ILD error 6");

  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto a = gnf_test::uniform_values(128, -40, 10, rng), b = gnf_test::uniform_values(128, -40, 10, rng);
    double acc = 0.0;
    for (std::size_t k = 0; k < 128; ++k) {
      const double ha = std::pow(10.0, a[k] / 20.0), hb = std::pow(10.0, b[k] / 20.0);
      acc += std::pow(20.0 * std::log10(ha / hb), 2);
    }
    worst = std::max(worst, std::abs(graphnf::lsd(a, b) - std::sqrt(acc / 128.0)));
    const auto loss = graphnf::loss_lsd(ad::Tensor::constant({1, 128}, a), b).item();
    worst = std::max(worst, std::abs(loss - std::sqrt(acc / 128.0)));
  }
  o.require(worst <= 1e-12, "linear-domain oracle within 1e-12");
  o.note("LSD(6 dB one ear) " + fmt(l6, 10) + ", ILD err " + fmt(i6, 10) + ", oracle max diff " + fmt(worst, 2));
  return o;
}

// ---- A4 --------------------------------------------------------------------

Outcome a4() {
  Outcome o;
  std::mt19937_64 rng(404);
  std::normal_distribution<double> g;
  double fft_err = 0.0;
  for (std::size_t n = 1; n <= 1024; n *= 2) {
    std::vector<std::complex<double>> x(n);
    for (auto& v : x) v = {g(rng), g(rng)};
    const auto fast = graphnf::dsp::fft(x);
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t t = 0; t < n; ++t)
        acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n));
      fft_err = std::max(fft_err, std::abs(fast[k] - acc));
    }
  }
  o.require(fft_err < 1e-9, "FFT vs naive DFT < 1e-9");

  double mp = 0.0;
  const std::size_t K = 64;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> db(K, 0.0);
    std::uniform_real_distribution<double> c(0.1, 0.9), w(0.05, 0.2), gain(-12, 12);
    for (int b = 0; b < 3; ++b) {
      const double cc = c(rng), ww = w(rng), gg = gain(rng);
      for (std::size_t k = 0; k < K; ++k) {
        const double z = (static_cast<double>(k) / K - cc) / ww;
        db[k] += gg * std::exp(-0.5 * z * z);
      }
    }
    const auto back = graphnf::dsp::magnitude_db(graphnf::dsp::minimum_phase(db), 2 * K, K);
    double acc = 0.0;
    for (std::size_t k = 0; k < K; ++k) acc += (back[k] - db[k]) * (back[k] - db[k]);
    mp = std::max(mp, std::sqrt(acc / K));
  }
  o.require(mp < 1e-3, "minimum-phase round trip < 1e-3 dB RMS");

  graphnf::data::SyntheticConfig cfg;
  cfg.K = 64;
  double worst_samples = 0.0;
  for (double r : {0.075, 0.0875, 0.1}) {
    graphnf::data::SyntheticSubject s;
    s.head_radius = r;
    s.resonances = {{6000.0, 900.0, 6.0}};
    for (double az : {90.0, 270.0}) {
      const auto h = graphnf::data::synthesize_hrir(s, graphnf::Direction::make(az, 0), cfg);
      const double expected = r / 343.0 * (std::numbers::pi / 2.0 + 1.0);
      worst_samples =
          std::max(worst_samples, std::abs(std::abs(graphnf::dsp::estimate_itd(h)) - expected) * cfg.sample_rate);
    }
  }
  o.require(worst_samples <= 1.0, "Woodworth ITD within one sample");
  o.note("FFT err " + fmt(fft_err, 2) + ", min-phase RMS " + fmt(mp, 2) + " dB, ITD err " + fmt(worst_samples, 3) +
         " samples");
  return o;
}

// ---- A5 .. A8 --------------------------------------------------------------

json desk_config() {
  return json::parse(R"({
    "split": {"fractions": [0.8, 0.1, 0.1], "seed": 1, "measurements": 3},
    "model_p": {"gat1_dim": 16, "gat2_dim": 64, "fusion_dim": 16},
    "model_u": {"gat1_dim": 16},
    "train_p": {"epochs": 50}, "train_u": {"epochs": 50}, "finetune": {"epochs": 20},
    "seed": 1
  })");
}

graphnf::data::HrtfBundle desk_bundle() {
  graphnf::data::SyntheticConfig s;
  s.seed = 7;
  s.subject_count = 40;
  s.direction_count = 200;
  s.K = 64;
  return graphnf::data::generate_synthetic(s);
}

struct Desk {
  fs::path out;
  std::optional<graphnf::Experiment> exp;
  std::optional<graphnf::ModelU> model_u;

  const graphnf::Experiment& experiment() {
    if (!exp) {
      auto cfg = graphnf::ExperimentConfig::from_json(desk_config());
      exp = graphnf::prepare_experiment(cfg, desk_bundle());
    }
    return *exp;
  }
  const graphnf::ModelU& hrtf_u() {
    if (!model_u) model_u = graphnf::train_model_u(experiment().bundle, experiment().splits,
                                                   graphnf::train_u_config(experiment().config));
    return *model_u;
  }
  void emit(const graphnf::EvalReport& r, const std::string& name) const {
    r.write_csv(out / ("report_" + name + ".csv"));
    r.write_summary(out / ("summary_" + name + ".txt"));
  }
};

Outcome a5(Desk& desk) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto& exp = desk.experiment();
  o.require(exp.splits.train.size() == 32 && exp.splits.validation.size() == 4 && exp.splits.test.size() == 4,
            "32/4/4 split");
  const auto p = graphnf::train_model_p(exp.bundle, exp.splits, graphnf::train_p_config(exp.config));
  graphnf::save_model_p(p, desk.out / "model_p.ckpt");
  const auto& u = desk.hrtf_u();
  graphnf::save_model_u(u, desk.out / "model_u.ckpt");

  const auto nn_r = graphnf::run_personalization_baseline(exp, graphnf::BaselineKind::NearestNeighbor).report;
  const auto g_r = graphnf::run_graphnf(exp, p).report;
  const auto s_r = graphnf::run_graphnf_sca(exp, p, u).report;
  desk.emit(nn_r, "nn");
  desk.emit(g_r, "graphnf");
  desk.emit(s_r, "graphnf-sca");
  const double elapsed = seconds_since(t0);

  const double gain = 1.0 - s_r.mean_lsd / g_r.mean_lsd;
  o.require(s_r.mean_lsd < g_r.mean_lsd, "LSD GraphNF-SCA < GraphNF");
  o.require(g_r.mean_lsd < nn_r.mean_lsd, "LSD GraphNF < nearest neighbor");
  o.require(s_r.mean_ild_error < nn_r.mean_ild_error, "ILD error GraphNF-SCA < nearest neighbor");
  o.require(gain >= 0.03, "SCA improves GraphNF by >= 3% relative");
  o.require(elapsed < 3600.0, "runtime < 60 min");
  o.note("LSD sca " + fmt(s_r.mean_lsd) + " / graphnf " + fmt(g_r.mean_lsd) + " / nn " + fmt(nn_r.mean_lsd) +
         " dB, SCA gain " + fmt(100.0 * gain, 3) + "%, ILD err sca " + fmt(s_r.mean_ild_error) + " / nn " +
         fmt(nn_r.mean_ild_error) + " dB, " + fmt(elapsed / 60.0, 3) + " min");
  return o;
}

Outcome a6(Desk& desk) {
  Outcome o;
  const auto& exp = desk.experiment();
  const auto& u = desk.hrtf_u();
  const auto hu = graphnf::run_hrtf_u_upsampling(exp, u).report;
  const auto li = graphnf::run_lininterp_upsampling(exp).report;
  desk.emit(hu, "hrtf-u");
  desk.emit(li, "lininterp");
  o.require(hu.mean_lsd < li.mean_lsd, "HRTF-U < linear interpolation");

  // locality: fine-tune on a test subject's own field
  const auto s = exp.bundle.subject_index(exp.splits.test[0]);
  const auto field = graphnf::subject_field(exp.bundle, s);
  Matrix measured(exp.splits.measured.size(), exp.bundle.width());
  for (std::size_t i = 0; i < exp.splits.measured.size(); ++i) {
    const auto r = exp.bundle.magnitude(s, exp.splits.measured[i]);
    std::copy(r.begin(), r.end(), measured.row(i).begin());
  }
  auto ftc = graphnf::finetune_config(exp.config, s);
  ftc.stage.epochs = 3;
  const auto tuned = graphnf::finetune_model_u(u, field, exp.bundle.directions, exp.splits.measured, measured,
                                               exp.config.graph, ftc);
  const auto before = u.named_parameters(), after = tuned.named_parameters();
  bool frozen = true, moved = false;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const std::vector<double> a(before[i].second.values().begin(), before[i].second.values().end());
    const std::vector<double> b(after[i].second.values().begin(), after[i].second.values().end());
    if (before[i].first.rfind("fc.", 0) == 0) {
      moved = moved || a != b;
    } else {
      frozen = frozen && a == b;
    }
  }
  o.require(frozen, "non-FC parameters bitwise unchanged by fine-tuning");
  o.require(moved, "FC parameters move during fine-tuning");
  o.note("LSD hrtf-u " + fmt(hu.mean_lsd) + " / lininterp " + fmt(li.mean_lsd) + " dB over " +
         std::to_string(hu.entries.size()) + " held-out directions; locality " + (frozen ? "ok" : "broken"));
  return o;
}

Outcome a7(Desk& desk, std::size_t epochs) {
  Outcome o;
  auto exp = desk.experiment();
  exp.config.train_p.epochs = epochs;
  exp.config.finetune.epochs = epochs;
  const std::vector<graphnf::AblationVariant> all{
      graphnf::AblationVariant::NoClueNoFusion, graphnf::AblationVariant::ClueNoFusion,
      graphnf::AblationVariant::Full, graphnf::AblationVariant::Sca};
  const auto ab = graphnf::run_ablation(exp, all, &desk.hrtf_u());
  o.require(ab.reports.size() == 4, "four variant reports");
  std::string lsds;
  for (const auto& [v, r] : ab.reports) {
    r.write_csv(desk.out / ("report_ablation_" + r.method + ".csv"));
    lsds += (lsds.empty() ? "" : ", ") + r.method + " " + fmt(r.mean_lsd);
    bool same_rows = r.entries.size() == ab.reports[0].second.entries.size();
    for (std::size_t i = 0; same_rows && i < r.entries.size(); ++i)
      same_rows = r.entries[i].subject == ab.reports[0].second.entries[i].subject &&
                  r.entries[i].direction == ab.reports[0].second.entries[i].direction;
    o.require(same_rows && std::isfinite(r.mean_lsd), std::string(r.method) + " report comparable");
  }
  const auto full = graphnf::train_model_p(exp.bundle, exp.splits, graphnf::train_p_config(exp.config));
  const auto direct = graphnf::run_graphnf(exp, full).report;
  const auto& c = ab.reports[2].second;
  bool bitwise = c.entries.size() == direct.entries.size();
  for (std::size_t i = 0; bitwise && i < c.entries.size(); ++i)
    bitwise = c.entries[i].lsd_db == direct.entries[i].lsd_db && c.entries[i].ild_err_db == direct.entries[i].ild_err_db;
  o.require(bitwise, "variant (c) bitwise equal to run_graphnf");
  o.note(lsds + " dB (" + std::to_string(epochs) + " HRTF-P epochs); ordering " + (ab.ordering_holds ? "holds" : "does not hold"));
  return o;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "graphnf");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  return graphnf::cli::run(static_cast<int>(args.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

Outcome a8(const fs::path& root) {
  Outcome o;
  const std::vector<std::string> small{"--set", "model_p.gat1_heads=2", "--set", "model_p.gat1_dim=4",
                                       "--set", "model_p.gat2_dim=8",   "--set", "model_p.fusion_heads=2",
                                       "--set", "model_p.fusion_dim=4", "--set", "model_u.gat1_heads=2",
                                       "--set", "model_u.gat1_dim=4",   "--set", "model_u.gat2_dim=8",
                                       "--epochs-p", "2", "--epochs-u", "2", "--epochs-ft", "2", "--seed", "3"};
  const std::vector<std::string> methods{"nn", "sel-lsd", "sel-itd", "sel-ild", "lininterp",
                                         "graphnf", "graphnf-sca", "hrtf-u"};
  auto pipeline = [&](const fs::path& dir, const std::string& jobs) {
    fs::remove_all(dir);
    const auto bundle = (dir / "bundle").string(), out = (dir / "out").string();
    int rc = cli({"gen-synth", "--out", bundle, "--subjects", "16", "--directions", "120", "--k", "32", "--seed", "11"});
    auto with = [&](std::vector<std::string> a) {
      a.insert(a.end(), small.begin(), small.end());
      a.insert(a.end(), {"--bundle", bundle, "--out", out, "--jobs", jobs});
      return cli(a);
    };
    rc |= with({"make-splits"});
    rc |= with({"train-p"});
    rc |= with({"train-u"});
    for (const auto& m : methods) {
      rc |= with({"eval", "--method", m, "--model-p", out + "/model_p.ckpt", "--model-u", out + "/model_u.ckpt"});
    }
    rc |= with({"ablate", "--model-u", out + "/model_u.ckpt"});
    return rc;
  };
  o.require(pipeline(root / "run1", "1") == 0, "first run exits 0");
  o.require(pipeline(root / "run2", "1") == 0, "second run exits 0");
  o.require(pipeline(root / "run3", "4") == 0, "threaded run exits 0");
  std::size_t compared = 0, differing = 0;
  for (const auto& e : fs::directory_iterator(root / "run1" / "out")) {
    const auto name = e.path().filename();
    const auto ext = name.extension();
    if (ext != ".csv" && ext != ".ckpt" && ext != ".json") continue;
    const auto a = slurp(e.path());
    for (const char* other : {"run2", "run3"}) {
      ++compared;
      if (slurp(root / other / "out" / name) != a) {
        ++differing;
        o.require(false, std::string(other) + "/" + name.string() + " identical");
      }
    }
  }
  for (const char* f : {"manifest.json", "magnitudes.f32", "hrirs.f32"})
    o.require(slurp(root / "run1" / "bundle" / f) == slurp(root / "run2" / "bundle" / f), std::string("bundle ") + f);
  o.require(compared >= 30, "enough outputs compared");
  o.note(std::to_string(compared) + " file comparisons, " + std::to_string(differing) + " differing");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graphnf acceptance suite"};
  std::vector<std::string> only;
  std::string out = "acceptance_out";
  std::size_t ablation_epochs = 5;
  app.add_option("--only", only, "Criteria to run (A1..A8); all when omitted")->delimiter(',');
  app.add_option("--out", out, "Directory for reports and checkpoints");
  app.add_option("--ablation-epochs", ablation_epochs, "HRTF-P and fine-tune epochs per ablation variant");
  CLI11_PARSE(app, argc, argv);

  Desk desk;
  desk.out = out;
  fs::create_directories(desk.out);

  const std::vector<std::pair<std::string, std::pair<std::string, std::function<Outcome()>>>> criteria{
      {"A1", {"gradient suite", a1}},
      {"A2", {"GAT invariants", a2}},
      {"A3", {"metric exactness", a3}},
      {"A4", {"DSP", a4}},
      {"A5", {"desk-scale end-to-end ordering", [&] { return a5(desk); }}},
      {"A6", {"upsampling ordering and fine-tune locality", [&] { return a6(desk); }}},
      {"A7", {"ablation harness", [&] { return a7(desk, ablation_epochs); }}},
      {"A8", {"determinism", [&] { return a8(desk.out / "determinism"); }}},
  };
  int failures = 0;
  for (const auto& [id, entry] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double s = seconds_since(t0);
    if ((id == "A1" && s >= 120.0) || (id == "A2" && s >= 60.0)) {
      o.pass = false;
      o.note("over the time limit");
    }
    if (!o.pass) ++failures;
    std::cout << id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << entry.first << ": " << o.detail << " ["
              << fmt(s, 4) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
