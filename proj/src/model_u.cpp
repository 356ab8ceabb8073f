#include "graphnf/model_u.hpp"

#include <algorithm>
#include <random>

namespace graphnf {

void ModelUConfig::validate() const {
  if (K == 0 || K % 8 != 0) throw ConfigError("K must be a positive multiple of 8");
  if (gat1_heads == 0 || gat1_dim == 0) throw ConfigError("HRTF-U first GAT layer needs heads and width >= 1");
}

ModelUConfig ModelUConfig::resolved() const {
  validate();
  auto c = *this;
  if (c.gat2_dim == 0) c.gat2_dim = 2 * K;
  return c;
}

ModelU ModelU::init(const ModelUConfig& config, std::uint64_t seed) {
  ModelU m;
  m.config = config.resolved();
  const auto w = 2 * m.config.K;
  std::mt19937_64 rng(seed);
  m.gat1 = nn::GatLayer::init(w, m.config.gat1_heads, m.config.gat1_dim, rng);
  m.gat2 = nn::GatLayer::init(m.config.gat1_heads * m.config.gat1_dim, 1, m.config.gat2_dim, rng);
  m.fc = nn::Linear::init(m.config.gat2_dim, w, rng);
  m.normalizer = SpectrumNormalizer::identity(w);
  return m;
}

std::vector<std::pair<std::string, ad::Tensor>> ModelU::named_parameters() const {
  return {{"gat1.W", gat1.W}, {"gat1.W_s", gat1.W_s}, {"gat1.a", gat1.a}, {"gat1.a_s", gat1.a_s},
          {"gat2.W", gat2.W}, {"gat2.W_s", gat2.W_s}, {"gat2.a", gat2.a}, {"gat2.a_s", gat2.a_s},
          {"fc.W", fc.W},     {"fc.b", fc.b}};
}

std::vector<ad::Tensor> ModelU::parameters() const {
  std::vector<ad::Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

ModelU ModelU::clone() const {
  ModelU m = *this;
  auto copy = [](ad::Tensor& t) { t = ad::Tensor::parameter(t.shape(), {t.values().begin(), t.values().end()}); };
  for (auto* g : {&m.gat1, &m.gat2}) {
    copy(g->W);
    copy(g->W_s);
    copy(g->a);
    copy(g->a_s);
  }
  copy(m.fc.W);
  copy(m.fc.b);
  return m;
}

ad::Tensor ModelU::node_input(const SpatialGraph& g) const {
  const auto w = 2 * config.K;
  if (g.features.cols != w) throw ContractViolation("HRTF-U: graph features are not 2K wide");
  const auto n = g.node_count();
  std::vector<double> x(n * w, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == g.target_index) continue;
    const auto row = normalizer.normalize(g.features.row(i));
    std::copy(row.begin(), row.end(), x.begin() + static_cast<std::ptrdiff_t>(i * w));
  }
  return ad::Tensor::constant({n, w}, std::move(x));
}

ad::Tensor ModelU::target_embedding(const SpatialGraph& g) const {
  const auto bias = nn::attention_bias(g.log_weights());
  const auto h = nn::gat_forward(gat2, nn::gat_forward(gat1, node_input(g), bias), bias);
  return ad::slice(h, 0, g.target_index, g.target_index + 1);
}

ad::Tensor ModelU::head(const ad::Tensor& embedding) const {
  const auto out = fc.forward(embedding);
  const auto w = 2 * config.K;
  return ad::add(ad::mul(out, ad::Tensor::constant({1, w}, normalizer.stddev)),
                 ad::Tensor::constant({1, w}, normalizer.mean));
}

ad::Tensor ModelU::forward(const SpatialGraph& g) const { return head(target_embedding(g)); }

std::vector<double> ModelU::predict(const SpatialGraph& g) const {
  const auto out = forward(g);
  return {out.values().begin(), out.values().end()};
}

}  // namespace graphnf
