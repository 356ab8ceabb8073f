#pragma once

// Layers shared by both networks: graph attention, dense, rank-1 conditioned
// dense, and transposed convolution.

#include <cstddef>
#include <random>
#include <vector>

#include "graphnf/autodiff/ops.hpp"
#include "graphnf/autodiff/tensor.hpp"
#include "graphnf/matrix.hpp"

namespace graphnf::nn {

using ad::Tensor;

// uniform(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out)))
Tensor glorot(ad::Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

// W and W_s are stored [in, heads * head_dim] (head n occupies columns
// n*head_dim .. (n+1)*head_dim); a and a_s are [heads, head_dim].
struct GatLayer {
  std::size_t in_dim = 0;
  std::size_t heads = 1;
  std::size_t head_dim = 0;
  Tensor W, W_s, a, a_s;

  static GatLayer init(std::size_t in_dim, std::size_t heads, std::size_t head_dim, std::mt19937_64& rng);
  std::size_t out_dim() const { return heads * head_dim; }
  std::vector<Tensor> parameters() const { return {W, W_s, a, a_s}; }
};

inline constexpr double kAttentionSlope = 0.01;

// x: [nodes, in]; bias: [nodes, nodes] additive attention logits, -inf where
// there is no edge (0 everywhere for a unit-weight complete graph). If
// `attention` is given it receives one [nodes, nodes] coefficient matrix per head.
Tensor gat_forward(const GatLayer& layer, const Tensor& x, const Tensor& bias,
                   std::vector<Tensor>* attention = nullptr);

// bias matrix for a graph given as log-weights
Tensor attention_bias(const Matrix& log_weights);
Tensor complete_graph_bias(std::size_t nodes);

struct Linear {
  Tensor W;  // [in, out]
  Tensor b;  // [1, out]

  static Linear init(std::size_t in, std::size_t out, std::mt19937_64& rng);
  std::size_t in_dim() const { return W.dim(0); }
  std::size_t out_dim() const { return W.dim(1); }
  Tensor forward(const Tensor& x) const;  // x: [n, in]
  std::vector<Tensor> parameters() const { return {W, b}; }
};

// y = x W + b + (x . v) u^T, with u = U(c) and v = V(c) produced from a
// conditioning vector c. That is x (W + v u^T) + b in row-vector form.
struct LoraLinear {
  Linear base;
  Linear u_head;  // cond -> out
  Linear v_head;  // cond -> in

  static LoraLinear init(std::size_t in, std::size_t out, std::size_t cond, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, const Tensor& cond) const;  // x: [1, in], cond: [1, cond]
  std::vector<Tensor> parameters() const;
};

struct ConvTranspose {
  Tensor weight;  // [c_in, c_out, kernel]
  Tensor bias;    // [c_out]
  std::size_t stride = 2;
  std::size_t padding = 1;

  static ConvTranspose init(std::size_t c_in, std::size_t c_out, std::size_t kernel, std::size_t stride,
                            std::size_t padding, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
  std::vector<Tensor> parameters() const { return {weight, bias}; }
};

}  // namespace graphnf::nn
