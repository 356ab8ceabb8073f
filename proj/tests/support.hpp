#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "graphnf/autodiff/tensor.hpp"
#include "graphnf/dataset.hpp"

namespace gnf_test {

using graphnf::ad::Shape;
using graphnf::ad::Tensor;

inline std::vector<double> uniform_values(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline Tensor random_param(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  const auto n = graphnf::ad::shape_size(shape);
  return Tensor::parameter(std::move(shape), uniform_values(n, lo, hi, rng));
}

inline Tensor random_const(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  const auto n = graphnf::ad::shape_size(shape);
  return Tensor::constant(std::move(shape), uniform_values(n, lo, hi, rng));
}

struct Coord {
  std::size_t leaf;
  std::size_t index;
};

// Largest |analytic - central difference| / max(1, |analytic|) over the given
// coordinates (all coordinates of every leaf when `coords` is empty).
inline double gradient_error(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                             std::vector<Coord> coords = {}, double h = 1e-5) {
  for (auto& l : leaves) l.zero_grad();
  graphnf::ad::backward(f());
  std::vector<std::vector<double>> analytic;
  for (auto& l : leaves) {
    if (l.has_grad()) {
      analytic.emplace_back(l.grad().begin(), l.grad().end());
    } else {
      analytic.emplace_back(l.size(), 0.0);
    }
  }
  if (coords.empty()) {
    for (std::size_t i = 0; i < leaves.size(); ++i)
      for (std::size_t j = 0; j < leaves[i].size(); ++j) coords.push_back({i, j});
  }
  double worst = 0.0;
  for (const auto& c : coords) {
    auto v = leaves[c.leaf].mutable_values();
    const double saved = v[c.index];
    v[c.index] = saved + h;
    const double up = f().item();
    v[c.index] = saved - h;
    const double down = f().item();
    v[c.index] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double g = analytic[c.leaf][c.index];
    worst = std::max(worst, std::abs(g - fd) / std::max(1.0, std::abs(g)));
  }
  for (auto& l : leaves) l.zero_grad();
  return worst;
}

// n coordinates drawn uniformly over all parameter entries
inline std::vector<Coord> sample_coords(const std::vector<Tensor>& leaves, std::size_t n, std::mt19937_64& rng) {
  std::vector<Coord> all;
  for (std::size_t i = 0; i < leaves.size(); ++i)
    for (std::size_t j = 0; j < leaves[i].size(); ++j) all.push_back({i, j});
  std::shuffle(all.begin(), all.end(), rng);
  if (all.size() > n) all.resize(n);
  return all;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("graphnf_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline graphnf::data::HrtfBundle small_bundle(std::size_t subjects = 12, std::size_t directions = 40,
                                              std::size_t K = 16, std::uint64_t seed = 3) {
  graphnf::data::SyntheticConfig cfg;
  cfg.seed = seed;
  cfg.subject_count = subjects;
  cfg.direction_count = directions;
  cfg.K = K;
  return graphnf::data::generate_synthetic(cfg);
}

}  // namespace gnf_test
