#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "graphnf/nn.hpp"

namespace gnf_test::gat {

namespace ad = graphnf::ad;
namespace nn = graphnf::nn;

using Rows = std::vector<std::vector<double>>;

inline double elu(double x) { return x > 0 ? x : std::expm1(x); }
inline double lrelu(double x) { return x > 0 ? x : nn::kAttentionSlope * x; }

inline Rows to_rows(const ad::Tensor& t) {
  Rows r(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) r[i][j] = t.values()[i * t.dim(1) + j];
  return r;
}

// straight loops over the layer definition
inline Rows gat_oracle(const nn::GatLayer& L, const Rows& x, const Rows& bias) {
  const auto n = x.size();
  const auto W = to_rows(L.W), Ws = to_rows(L.W_s), a = to_rows(L.a), as = to_rows(L.a_s);
  Rows out(n, std::vector<double>(L.out_dim()));
  for (std::size_t h = 0; h < L.heads; ++h) {
    Rows z(n, std::vector<double>(L.head_dim, 0.0)), zs = z;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < L.head_dim; ++c)
        for (std::size_t k = 0; k < L.in_dim; ++k) {
          z[i][c] += x[i][k] * W[k][h * L.head_dim + c];
          zs[i][c] += x[i][k] * Ws[k][h * L.head_dim + c];
        }
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> e(n);
      double mx = -INFINITY;
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < L.head_dim; ++c) s += as[h][c] * zs[i][c] + a[h][c] * z[j][c];
        e[j] = lrelu(s) + bias[i][j];
        mx = std::max(mx, e[j]);
      }
      double norm = 0.0;
      for (auto& v : e) norm += (v = std::isfinite(v) ? std::exp(v - mx) : 0.0);
      for (std::size_t c = 0; c < L.head_dim; ++c) {
        double acc = e[i] / norm * zs[i][c];
        for (std::size_t j = 0; j < n; ++j)
          if (j != i) acc += e[j] / norm * z[j][c];
        out[i][h * L.head_dim + c] = elu(acc);
      }
    }
  }
  return out;
}

inline ad::Tensor as_tensor(const Rows& r) {
  std::vector<double> v;
  for (const auto& row : r) v.insert(v.end(), row.begin(), row.end());
  return ad::Tensor::constant({r.size(), r[0].size()}, std::move(v));
}

inline double max_abs_diff(const Rows& a, const Rows& b) {
  double w = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) w = std::max(w, std::abs(a[i][j] - b[i][j]));
  return w;
}

}  // namespace gnf_test::gat
