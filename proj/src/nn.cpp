#include "graphnf/nn.hpp"

#include <cmath>
#include <limits>

#include "graphnf/errors.hpp"

namespace graphnf::nn {

Tensor glorot(ad::Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> uniform(-limit, limit);
  std::vector<double> v(ad::shape_size(shape));
  for (auto& x : v) x = uniform(rng);
  return Tensor::parameter(std::move(shape), std::move(v));
}

GatLayer GatLayer::init(std::size_t in_dim, std::size_t heads, std::size_t head_dim, std::mt19937_64& rng) {
  if (in_dim == 0 || heads == 0 || head_dim == 0) throw ContractViolation("GAT layer needs positive dimensions");
  GatLayer g;
  g.in_dim = in_dim;
  g.heads = heads;
  g.head_dim = head_dim;
  // each head's transform is its own in -> head_dim map
  g.W = glorot({in_dim, heads * head_dim}, in_dim, head_dim, rng);
  g.W_s = glorot({in_dim, heads * head_dim}, in_dim, head_dim, rng);
  g.a = glorot({heads, head_dim}, head_dim, 1, rng);
  g.a_s = glorot({heads, head_dim}, head_dim, 1, rng);
  return g;
}

Tensor attention_bias(const Matrix& log_weights) {
  return Tensor::constant({log_weights.rows, log_weights.cols}, log_weights.data);
}

Tensor complete_graph_bias(std::size_t nodes) { return Tensor::zeros({nodes, nodes}); }

namespace {

Tensor eye(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return Tensor::constant({n, n}, std::move(v));
}

Tensor off_eye(std::size_t n) {
  std::vector<double> v(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 0.0;
  return Tensor::constant({n, n}, std::move(v));
}

}  // namespace

Tensor gat_forward(const GatLayer& layer, const Tensor& x, const Tensor& bias, std::vector<Tensor>* attention) {
  if (x.rank() != 2 || x.dim(1) != layer.in_dim) {
    throw ContractViolation("gat_forward: features " + ad::shape_str(x.shape()) + " for a layer with input width " +
                            std::to_string(layer.in_dim));
  }
  const auto n = x.dim(0);
  if (bias.shape() != ad::Shape{n, n}) {
    throw ContractViolation("gat_forward: bias " + ad::shape_str(bias.shape()) + " for " + std::to_string(n) + " nodes");
  }
  const auto bv = bias.values();
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) any = any || std::isfinite(bv[i * n + j]);
    if (!any) throw ContractViolation("gat_forward: node " + std::to_string(i) + " has no neighbors and no self-loop");
  }

  const auto Z = ad::matmul(x, layer.W);
  const auto Zs = ad::matmul(x, layer.W_s);
  const auto I = eye(n);
  const auto O = off_eye(n);
  const auto D = layer.head_dim;

  std::vector<Tensor> outs;
  outs.reserve(layer.heads);
  for (std::size_t h = 0; h < layer.heads; ++h) {
    const auto Zh = layer.heads == 1 ? Z : ad::slice(Z, 1, h * D, (h + 1) * D);
    const auto Zsh = layer.heads == 1 ? Zs : ad::slice(Zs, 1, h * D, (h + 1) * D);
    const auto ah = ad::reshape(layer.heads == 1 ? layer.a : ad::slice(layer.a, 0, h, h + 1), {D, 1});
    const auto ash = ad::reshape(layer.heads == 1 ? layer.a_s : ad::slice(layer.a_s, 0, h, h + 1), {D, 1});
    const auto e_self = ad::matmul(Zsh, ash);                       // [n,1]
    const auto e_nb = ad::transpose(ad::matmul(Zh, ah));            // [1,n]
    const auto logits = ad::add(ad::leaky_relu(ad::add(e_self, e_nb), kAttentionSlope), bias);
    const auto alpha = ad::softmax(logits, 1);
    if (attention) attention->push_back(alpha);
    const auto self_coef = ad::sum(ad::mul(alpha, I), 1, true);     // [n,1]
    const auto mixed = ad::add(ad::mul(self_coef, Zsh), ad::matmul(ad::mul(alpha, O), Zh));
    outs.push_back(ad::elu(mixed));
  }
  return outs.size() == 1 ? outs[0] : ad::concat(outs, 1);
}

Linear Linear::init(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  Linear l;
  l.W = glorot({in, out}, in, out, rng);
  l.b = Tensor::parameter({1, out}, std::vector<double>(out, 0.0));
  return l;
}

Tensor Linear::forward(const Tensor& x) const { return ad::add(ad::matmul(x, W), b); }

LoraLinear LoraLinear::init(std::size_t in, std::size_t out, std::size_t cond, std::mt19937_64& rng) {
  LoraLinear l;
  l.base = Linear::init(in, out, rng);
  l.u_head = Linear::init(cond, out, rng);
  l.v_head = Linear::init(cond, in, rng);
  return l;
}

Tensor LoraLinear::forward(const Tensor& x, const Tensor& cond) const {
  const auto u = u_head.forward(cond);                             // [1,out]
  const auto v = v_head.forward(cond);                             // [1,in]
  const auto xv = ad::matmul(x, ad::transpose(v));                 // [1,1]
  return ad::add(base.forward(x), ad::mul(xv, u));
}

std::vector<Tensor> LoraLinear::parameters() const {
  return {base.W, base.b, u_head.W, u_head.b, v_head.W, v_head.b};
}

ConvTranspose ConvTranspose::init(std::size_t c_in, std::size_t c_out, std::size_t kernel, std::size_t stride,
                                  std::size_t padding, std::mt19937_64& rng) {
  ConvTranspose c;
  c.weight = glorot({c_in, c_out, kernel}, c_in * kernel, c_out * kernel, rng);
  c.bias = Tensor::parameter({c_out}, std::vector<double>(c_out, 0.0));
  c.stride = stride;
  c.padding = padding;
  return c;
}

Tensor ConvTranspose::forward(const Tensor& x) const {
  return ad::conv_transpose1d(x, weight, bias, stride, padding);
}

}  // namespace graphnf::nn
