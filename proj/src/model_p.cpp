#include "graphnf/model_p.hpp"

#include <algorithm>

namespace graphnf {

PVariant p_variant_from_name(std::string_view name) {
  if (name == "no-clue-no-fusion") return PVariant::NoClueNoFusion;
  if (name == "clue-no-fusion") return PVariant::ClueNoFusion;
  if (name == "full") return PVariant::Full;
  throw ConfigError("unknown model variant '" + std::string(name) + "'");
}

std::string_view p_variant_name(PVariant v) {
  switch (v) {
    case PVariant::NoClueNoFusion: return "no-clue-no-fusion";
    case PVariant::ClueNoFusion: return "clue-no-fusion";
    case PVariant::Full: return "full";
  }
  return "?";
}

void ModelPConfig::validate() const {
  if (K == 0 || K % 8 != 0) throw ConfigError("K must be a positive multiple of 8 (decoder upsamples by 16)");
  if (gat1_heads == 0 || fusion_heads == 0) throw ConfigError("head counts must be >= 1");
  if (rff_features == 0 || !(rff_sigma > 0.0)) throw ConfigError("RFF needs features >= 1 and sigma > 0");
}

ModelPConfig ModelPConfig::resolved() const {
  validate();
  auto c = *this;
  if (c.gat1_dim == 0) c.gat1_dim = 2 * K;
  if (c.gat2_dim == 0) c.gat2_dim = 4 * K;
  if (c.fusion_dim == 0) c.fusion_dim = 2 * K;
  return c;
}

std::size_t ModelPConfig::fused_dim() const {
  switch (variant) {
    case PVariant::NoClueNoFusion: return gat2_dim;
    case PVariant::ClueNoFusion: return gat2_dim + 2 * K;
    case PVariant::Full: return fusion_heads * fusion_dim;
  }
  return 0;
}

namespace {

constexpr std::size_t kDecoderChannels[] = {16, 8, 4, 2, 1};

ad::Tensor constant_row(std::span<const double> v) { return ad::Tensor::constant({1, v.size()}, {v.begin(), v.end()}); }

ad::Tensor denormalize(const ad::Tensor& x, const SpectrumNormalizer& n) {
  return ad::add(ad::mul(x, constant_row(n.stddev)), constant_row(n.mean));
}

}  // namespace

ModelP ModelP::init(const ModelPConfig& config, std::uint64_t seed) {
  ModelP m;
  m.config = config.resolved();
  const auto& c = m.config;
  const auto w = 2 * c.K;
  std::mt19937_64 rng(seed);
  m.rff = RffEncoder::make(c.rff_features, 2 + c.clue_features, c.rff_sigma, rng);
  const auto cond = m.rff.output_dim();
  m.gat1 = nn::GatLayer::init(w, c.gat1_heads, c.gat1_dim, rng);
  m.gat2 = nn::GatLayer::init(c.gat1_heads * c.gat1_dim, 1, c.gat2_dim, rng);
  if (c.variant != PVariant::NoClueNoFusion) m.clue_fc = nn::Linear::init(cond, w, rng);
  if (c.variant == PVariant::Full) m.fusion = nn::GatLayer::init(c.gat2_dim + w, c.fusion_heads, c.fusion_dim, rng);
  m.fc1 = nn::LoraLinear::init(c.fused_dim(), w, cond, rng);
  m.fc2 = nn::LoraLinear::init(w, w, cond, rng);
  for (std::size_t i = 0; i + 1 < std::size(kDecoderChannels); ++i) {
    m.deconv.push_back(nn::ConvTranspose::init(kDecoderChannels[i], kDecoderChannels[i + 1], 4, 2, 1, rng));
  }
  m.normalizer = SpectrumNormalizer::identity(w);
  return m;
}

std::vector<std::pair<std::string, ad::Tensor>> ModelP::named_parameters() const {
  std::vector<std::pair<std::string, ad::Tensor>> out;
  auto add_gat = [&](const std::string& p, const nn::GatLayer& g) {
    out.emplace_back(p + ".W", g.W);
    out.emplace_back(p + ".W_s", g.W_s);
    out.emplace_back(p + ".a", g.a);
    out.emplace_back(p + ".a_s", g.a_s);
  };
  auto add_linear = [&](const std::string& p, const nn::Linear& l) {
    out.emplace_back(p + ".W", l.W);
    out.emplace_back(p + ".b", l.b);
  };
  add_gat("gat1", gat1);
  add_gat("gat2", gat2);
  if (config.variant != PVariant::NoClueNoFusion) add_linear("clue_fc", clue_fc);
  if (config.variant == PVariant::Full) add_gat("fusion", fusion);
  for (auto [name, layer] : {std::pair{"fc1", &fc1}, std::pair{"fc2", &fc2}}) {
    add_linear(std::string(name) + ".base", layer->base);
    add_linear(std::string(name) + ".u", layer->u_head);
    add_linear(std::string(name) + ".v", layer->v_head);
  }
  for (std::size_t i = 0; i < deconv.size(); ++i) {
    out.emplace_back("deconv" + std::to_string(i) + ".weight", deconv[i].weight);
    out.emplace_back("deconv" + std::to_string(i) + ".bias", deconv[i].bias);
  }
  return out;
}

std::vector<ad::Tensor> ModelP::parameters() const {
  std::vector<ad::Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

ModelP ModelP::clone() const {
  ModelP m = *this;
  auto copy = [](ad::Tensor& t) {
    if (t.defined()) t = ad::Tensor::parameter(t.shape(), {t.values().begin(), t.values().end()});
  };
  for (auto* g : {&m.gat1, &m.gat2, &m.fusion}) {
    copy(g->W);
    copy(g->W_s);
    copy(g->a);
    copy(g->a_s);
  }
  for (auto* l : {&m.clue_fc, &m.fc1.base, &m.fc1.u_head, &m.fc1.v_head, &m.fc2.base, &m.fc2.u_head, &m.fc2.v_head}) {
    copy(l->W);
    copy(l->b);
  }
  for (auto& d : m.deconv) {
    copy(d.weight);
    copy(d.bias);
  }
  return m;
}

Clue ModelP::clue(const Direction& d, std::span<const double> raw_feature) const {
  if (raw_feature.size() != config.clue_features) {
    throw ContractViolation("clue feature has " + std::to_string(raw_feature.size()) + " values, model expects " +
                            std::to_string(config.clue_features));
  }
  return build_clue(d, raw_feature, &clue_standardizer);
}

ad::Tensor ModelP::encode(const SubjectGraph& g, std::span<const Clue> node_clues) const {
  const auto n = g.node_count();
  if (node_clues.size() != n) throw ContractViolation("encode: one clue per graph node required");
  const auto w = 2 * config.K;
  if (g.features.cols != w) throw ContractViolation("encode: graph features are not 2K wide");

  std::vector<double> x(n * w);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = normalizer.normalize(g.features.row(i));
    std::copy(row.begin(), row.end(), x.begin() + static_cast<std::ptrdiff_t>(i * w));
  }
  // unit weights on a complete graph: log-weight bias is zero everywhere
  const auto bias = nn::complete_graph_bias(n);
  const auto h1 = nn::gat_forward(gat1, ad::Tensor::constant({n, w}, std::move(x)), bias);
  const auto h = nn::gat_forward(gat2, h1, bias);
  if (config.variant == PVariant::NoClueNoFusion) return ad::mean(h, 0, true);

  std::vector<double> codes;
  codes.reserve(n * rff.output_dim());
  for (const auto& c : node_clues) {
    const auto e = rff.encode(c.values);
    codes.insert(codes.end(), e.begin(), e.end());
  }
  const auto clue_features = clue_fc.forward(ad::Tensor::constant({n, rff.output_dim()}, std::move(codes)));
  const ad::Tensor parts[] = {h, clue_features};
  const auto f = ad::concat(parts, 1);
  if (config.variant == PVariant::ClueNoFusion) return ad::mean(f, 0, true);
  return ad::mean(nn::gat_forward(fusion, f, bias), 0, true);
}

ad::Tensor ModelP::decode(const ad::Tensor& fused, const Clue& target) const {
  const auto cond = constant_row(rff.encode(target.values));
  auto h = ad::elu(fc1.forward(fused, cond));
  h = ad::elu(fc2.forward(h, cond));
  h = ad::reshape(h, {kDecoderChannels[0], config.K / 8});
  for (std::size_t i = 0; i < deconv.size(); ++i) {
    h = deconv[i].forward(h);
    if (i + 1 < deconv.size()) h = ad::elu(h);
  }
  return denormalize(ad::reshape(h, {1, 2 * config.K}), normalizer);
}

ad::Tensor ModelP::forward(const SubjectGraph& g, std::span<const Clue> node_clues, const Clue& target) const {
  return decode(encode(g, node_clues), target);
}

std::vector<double> ModelP::predict(const SubjectGraph& g, std::span<const Clue> node_clues,
                                    const Clue& target) const {
  const auto out = forward(g, node_clues, target);
  return {out.values().begin(), out.values().end()};
}

ad::Tensor loss_lsd(const ad::Tensor& pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    throw ContractViolation("loss_lsd: prediction has " + std::to_string(pred.size()) + " bins, truth " +
                            std::to_string(truth.size()));
  }
  const auto t = ad::Tensor::constant(pred.shape(), {truth.begin(), truth.end()});
  const auto diff = ad::sub(pred, t);
  return ad::sqrt(ad::mean(ad::mul(diff, diff)));
}

}  // namespace graphnf
