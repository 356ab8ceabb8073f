#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "graphnf/features.hpp"
#include "graphnf/graphs.hpp"
#include "graphnf/nn.hpp"

namespace graphnf {

struct ModelUConfig {
  std::size_t K = 64;
  std::size_t gat1_heads = 8;
  std::size_t gat1_dim = 128;  // per head
  std::size_t gat2_dim = 0;    // default 2K

  void validate() const;
  ModelUConfig resolved() const;
};

struct ModelU {
  ModelUConfig config;
  nn::GatLayer gat1, gat2;
  nn::Linear fc;
  SpectrumNormalizer normalizer;

  static ModelU init(const ModelUConfig& config, std::uint64_t seed);

  std::vector<ad::Tensor> parameters() const;
  std::vector<ad::Tensor> head_parameters() const { return fc.parameters(); }
  std::vector<std::pair<std::string, ad::Tensor>> named_parameters() const;
  ModelU clone() const;

  // Input features for the GAT stack: neighbor rows normalized, target row kept all-ones.
  ad::Tensor node_input(const SpatialGraph& g) const;
  // Target-node feature after the second GAT layer, [1, gat2_dim].
  ad::Tensor target_embedding(const SpatialGraph& g) const;
  // FC head on a target embedding; dB spectrum [1, 2K].
  ad::Tensor head(const ad::Tensor& embedding) const;
  ad::Tensor forward(const SpatialGraph& g) const;
  std::vector<double> predict(const SpatialGraph& g) const;
};

}  // namespace graphnf
