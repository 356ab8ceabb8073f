#include <doctest.h>

#include <cmath>
#include <random>

#include "graphnf/checkpoint.hpp"
#include "graphnf/model_u.hpp"
#include "graphnf/training.hpp"
#include "gat_oracle.hpp"
#include "support.hpp"

using graphnf::Matrix;
using graphnf::ModelU;
using graphnf::ModelUConfig;
namespace ad = graphnf::ad;
using namespace gnf_test::gat;

namespace {

std::vector<double> values(const ad::Tensor& t) { return {t.values().begin(), t.values().end()}; }

ModelUConfig tiny_config() {
  ModelUConfig c;
  c.K = 16;
  c.gat1_heads = 2;
  c.gat1_dim = 4;
  c.gat2_dim = 8;
  return c;
}

struct Setup {
  std::vector<graphnf::Direction> dirs = graphnf::data::uniform_ring_grid(120);
  graphnf::SpatialGraphConfig cfg;
  Matrix field;
  std::vector<std::vector<std::size_t>> nbrs;

  explicit Setup(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    field = Matrix(dirs.size(), 32);
    for (auto& v : field.data) v = std::uniform_real_distribution<double>(-25, 5)(rng);
    nbrs = graphnf::spatial_neighborhoods(dirs, cfg);
  }
  graphnf::SpatialGraph graph(std::size_t d) const { return graphnf::field_graph(field, dirs, d, nbrs[d], cfg); }
};

}  // namespace

TEST_CASE("HRTF-U forward matches the layer oracle") {
  const Setup s(1);
  auto m = ModelU::init(tiny_config(), 5);
  // non-trivial normalizer
  m.normalizer.mean = std::vector<double>(32, -7.0);
  m.normalizer.stddev = std::vector<double>(32, 3.0);
  for (std::size_t d = 0; d < s.dirs.size(); d += 13) {
    const auto g = s.graph(d);
    Rows x(g.node_count(), std::vector<double>(32, 1.0));
    for (std::size_t i = 0; i < g.node_count(); ++i)
      if (i != g.target_index)
        for (std::size_t k = 0; k < 32; ++k) x[i][k] = (g.features(i, k) + 7.0) / 3.0;
    Rows lw(g.node_count(), std::vector<double>(g.node_count()));
    const auto L = g.log_weights();
    for (std::size_t i = 0; i < g.node_count(); ++i)
      for (std::size_t j = 0; j < g.node_count(); ++j) lw[i][j] = L(i, j);
    const auto h = gat_oracle(m.gat2, gat_oracle(m.gat1, x, lw), lw)[g.target_index];
    const auto W = to_rows(m.fc.W);
    const auto pred = m.predict(g);
    REQUIRE(pred.size() == 32);
    for (std::size_t k = 0; k < 32; ++k) {
      double y = m.fc.b.values()[k];
      for (std::size_t c = 0; c < h.size(); ++c) y += h[c] * W[c][k];
      CHECK(std::abs(pred[k] - (3.0 * y - 7.0)) <= 1e-11);
    }
  }
}

TEST_CASE("prediction ignores neighbor order") {
  const Setup s(2);
  const auto m = ModelU::init(tiny_config(), 6);
  std::mt19937_64 rng(2);
  for (std::size_t d = 0; d < s.dirs.size(); d += 11) {
    auto order = s.nbrs[d];
    std::shuffle(order.begin(), order.end(), rng);
    const auto a = m.predict(s.graph(d));
    const auto b = m.predict(graphnf::field_graph(s.field, s.dirs, d, order, s.cfg));
    for (std::size_t k = 0; k < 32; ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-12);
  }
}

TEST_CASE("target features do not leak into the prediction") {
  Setup s(3);
  const auto m = ModelU::init(tiny_config(), 7);
  const auto before = m.predict(s.graph(10));
  for (std::size_t k = 0; k < 32; ++k) s.field(10, k) += 50.0;
  CHECK(m.predict(s.graph(10)) == before);
}

TEST_CASE("HRTF-U gradient check") {
  const Setup s(4);
  const auto m = ModelU::init(tiny_config(), 8);
  std::mt19937_64 rng(4);
  const auto params = m.parameters();
  for (std::size_t d : {0u, 37u, 90u}) {
    const auto g = s.graph(d);
    const auto truth = gnf_test::uniform_values(32, -20, 5, rng);
    auto f = [&] { return graphnf::loss_lsd(m.forward(g), truth); };
    CHECK(gnf_test::gradient_error(f, params, gnf_test::sample_coords(params, 120, rng)) < 1e-4);
  }
}

TEST_CASE("with flat attention vectors, target attention falls with distance") {
  const Setup s(5);
  auto m = ModelU::init(tiny_config(), 9);
  m.gat1.a = ad::Tensor::parameter(m.gat1.a.shape(), std::vector<double>(m.gat1.a.size(), 0.0));
  m.gat1.a_s = ad::Tensor::parameter(m.gat1.a_s.shape(), std::vector<double>(m.gat1.a_s.size(), 0.0));
  for (std::size_t d = 0; d < s.dirs.size(); d += 17) {
    const auto g = s.graph(d);
    std::vector<ad::Tensor> att;
    graphnf::nn::gat_forward(m.gat1, m.node_input(g), graphnf::nn::attention_bias(g.log_weights()), &att);
    const auto n = g.node_count(), t = g.target_index;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == t || j == t) continue;
        const double di = graphnf::angular_distance(g.directions[i], g.directions[t]);
        const double dj = graphnf::angular_distance(g.directions[j], g.directions[t]);
        if (di < dj - 1e-9) CHECK(att[0].values()[t * n + i] > att[0].values()[t * n + j]);
      }
  }
}

TEST_CASE("fine-tuning only moves the output layer") {
  const Setup s(6);
  const auto m = ModelU::init(tiny_config(), 10);
  const std::vector<std::size_t> measured{0, 40, 80};
  Matrix spectra(3, 32);
  std::mt19937_64 rng(6);
  for (auto& v : spectra.data) v = std::uniform_real_distribution<double>(-20, 0)(rng);
  const auto snapshot = [](const ModelU& x) {
    std::vector<std::vector<double>> out;
    for (const auto& p : x.parameters()) out.push_back(values(p));
    return out;
  };
  const auto original = snapshot(m);

  graphnf::FinetuneConfig ft;
  ft.stage.epochs = 3;
  std::vector<double> losses;
  const auto tuned = graphnf::finetune_model_u(m, s.field, s.dirs, measured, spectra, s.cfg, ft, &losses);
  CHECK(snapshot(m) == original);
  CHECK(losses.size() == 3);
  CHECK(losses.back() < losses.front());
  const auto after = snapshot(tuned);
  const auto names = m.named_parameters();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i].first.rfind("fc.", 0) == 0) {
      CHECK(after[i] != original[i]);
    } else {
      CHECK(after[i] == original[i]);
    }
  }

  ft.stage.epochs = 0;
  const auto same = graphnf::finetune_model_u(m, s.field, s.dirs, measured, spectra, s.cfg, ft);
  CHECK(snapshot(same) == original);

  // determinism
  ft.stage.epochs = 2;
  const auto a = graphnf::finetune_model_u(m, s.field, s.dirs, measured, spectra, s.cfg, ft);
  const auto b = graphnf::finetune_model_u(m, s.field, s.dirs, measured, spectra, s.cfg, ft);
  CHECK(snapshot(a) == snapshot(b));

  CHECK_THROWS_AS(graphnf::finetune_model_u(m, Matrix(), {}, measured, spectra, s.cfg, ft), graphnf::DataError);
}

TEST_CASE("HRTF-U training") {
  const auto b = gnf_test::small_bundle(10, 120, 16, 5);
  const auto splits = graphnf::data::make_splits(b, {0.8, 0.1, 0.1}, 3, 1);
  graphnf::TrainUConfig cfg;
  cfg.model = tiny_config();
  cfg.stage.epochs = 3;
  graphnf::TrainLog log;
  const auto m = graphnf::train_model_u(b, splits, cfg, &log);
  CHECK(log.validation_lsd.size() == 3);
  CHECK(log.best_validation < log.initial_validation);

  const auto again = graphnf::train_model_u(b, splits, cfg);
  for (std::size_t i = 0; i < m.parameters().size(); ++i)
    CHECK(values(m.parameters()[i]) == values(again.parameters()[i]));

  const auto dir = gnf_test::scratch_dir("model_u");
  graphnf::save_model_u(m, dir / "u.ckpt");
  const auto loaded = graphnf::load_model_u(dir / "u.ckpt");
  const auto field = graphnf::subject_field(b, b.subject_index(splits.test[0]));
  CHECK(graphnf::upsample_field(m, field, b.directions, cfg.graph).data ==
        graphnf::upsample_field(loaded, field, b.directions, cfg.graph).data);
  CHECK_THROWS_AS(graphnf::load_model_p(dir / "u.ckpt"), std::exception);
}
