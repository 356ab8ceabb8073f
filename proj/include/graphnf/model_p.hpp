#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "graphnf/features.hpp"
#include "graphnf/graphs.hpp"
#include "graphnf/nn.hpp"

namespace graphnf {

// Module wiring for the integration ablation.
enum class PVariant { NoClueNoFusion, ClueNoFusion, Full };

PVariant p_variant_from_name(std::string_view name);
std::string_view p_variant_name(PVariant v);

// Widths left at 0 take the defaults derived from K.
struct ModelPConfig {
  std::size_t K = 64;
  std::size_t clue_features = 3;  // length of a_s (the measurement count)
  std::size_t gat1_heads = 8;
  std::size_t gat1_dim = 0;       // per head, default 2K
  std::size_t gat2_dim = 0;       // default 4K
  std::size_t fusion_heads = 6;
  std::size_t fusion_dim = 0;     // per head, default 2K
  std::size_t rff_features = 64;
  double rff_sigma = 1.0;
  PVariant variant = PVariant::Full;

  void validate() const;
  ModelPConfig resolved() const;
  std::size_t fused_dim() const;  // on a resolved config
};

struct ModelP {
  ModelPConfig config;
  nn::GatLayer gat1, gat2, fusion;
  RffEncoder rff;
  nn::Linear clue_fc;
  nn::LoraLinear fc1, fc2;
  std::vector<nn::ConvTranspose> deconv;
  SpectrumNormalizer normalizer;
  FeatureStandardizer clue_standardizer;

  static ModelP init(const ModelPConfig& config, std::uint64_t seed);

  std::vector<ad::Tensor> parameters() const;
  std::vector<std::pair<std::string, ad::Tensor>> named_parameters() const;
  ModelP clone() const;

  // Clue of a subject with raw (unstandardized) feature a_s at direction d.
  Clue clue(const Direction& d, std::span<const double> raw_feature) const;

  // Pooled fused feature, [1, fused_dim].
  ad::Tensor encode(const SubjectGraph& g, std::span<const Clue> node_clues) const;
  // dB spectrum, [1, 2K].
  ad::Tensor decode(const ad::Tensor& fused, const Clue& target) const;
  ad::Tensor forward(const SubjectGraph& g, std::span<const Clue> node_clues, const Clue& target) const;
  std::vector<double> predict(const SubjectGraph& g, std::span<const Clue> node_clues, const Clue& target) const;
};

// sqrt(mean((pred - truth)^2)) over all bins, differentiable in pred.
ad::Tensor loss_lsd(const ad::Tensor& pred, std::span<const double> truth);

}  // namespace graphnf
