#include "graphnf/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace graphnf {

namespace {

struct Ranked {
  double distance;
  std::size_t index;
};

std::vector<Ranked> rank_by_distance(std::span<const std::string> ids, std::span<const std::vector<double>> features,
                                     std::span<const double> target) {
  if (ids.size() != features.size()) throw ContractViolation("retrieval: ids and features differ in count");
  std::vector<Ranked> ranked;
  ranked.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (features[i].size() != target.size()) {
      throw DataError("retrieval: feature of '" + ids[i] + "' has length " + std::to_string(features[i].size()) +
                      ", target has " + std::to_string(target.size()));
    }
    double d2 = 0.0;
    for (std::size_t k = 0; k < target.size(); ++k) {
      const double diff = features[i][k] - target[k];
      d2 += diff * diff;
    }
    ranked.push_back({std::sqrt(d2), i});
  }
  std::sort(ranked.begin(), ranked.end(), [&](const Ranked& x, const Ranked& y) {
    if (x.distance != y.distance) return x.distance < y.distance;
    return ids[x.index] < ids[y.index];
  });
  return ranked;
}

}  // namespace

std::vector<std::string> retrieve_subjects(std::span<const std::string> ids,
                                           std::span<const std::vector<double>> features,
                                           std::span<const double> target, std::size_t M) {
  if (M == 0 || M > ids.size()) {
    throw DataError("retrieval: M = " + std::to_string(M) + " with " + std::to_string(ids.size()) + " candidates");
  }
  const auto ranked = rank_by_distance(ids, features, target);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < M; ++i) out.push_back(ids[ranked[i].index]);
  return out;
}

std::vector<std::string> retrieve_subjects_within(std::span<const std::string> ids,
                                                  std::span<const std::vector<double>> features,
                                                  std::span<const double> target, double delta_s) {
  std::vector<std::string> out;
  for (const auto& r : rank_by_distance(ids, features, target)) {
    if (r.distance < delta_s) out.push_back(ids[r.index]);
  }
  if (out.empty()) throw DataError("retrieval: no candidate within delta_s = " + std::to_string(delta_s));
  return out;
}

std::vector<std::size_t> retrieve_directions(std::span<const Direction> directions, const Direction& target,
                                             double delta_d, bool exclude_target) {
  if (!(delta_d > 0.0)) throw ContractViolation("delta_d must be > 0");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < directions.size(); ++i) {
    const double dist = angular_distance(directions[i], target);
    if (exclude_target && dist == 0.0) continue;
    if (dist < delta_d) out.push_back(i);
  }
  if (out.empty()) {
    throw DataError("no directions within " + std::to_string(delta_d) + " deg of (" + std::to_string(target.azimuth) +
                    ", " + std::to_string(target.elevation) + ")");
  }
  return out;
}

SubjectGraph build_subject_graph(const data::HrtfBundle& bundle, std::span<const std::string> node_ids,
                                 std::size_t direction_index) {
  if (node_ids.empty()) throw ContractViolation("subject graph needs at least one node");
  if (direction_index >= bundle.direction_count()) throw DataError("subject graph: direction index out of range");
  SubjectGraph g;
  g.node_ids.assign(node_ids.begin(), node_ids.end());
  g.direction = direction_index;
  g.features = Matrix(node_ids.size(), bundle.width());
  for (std::size_t i = 0; i < node_ids.size(); ++i) {
    const auto row = bundle.magnitude(bundle.subject_index(node_ids[i]), direction_index);
    std::copy(row.begin(), row.end(), g.features.row(i).begin());
  }
  return g;
}

void SpatialGraphConfig::validate() const {
  if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("graph parameter a must lie in [0, 1]");
  if (!(delta_d > 0.0)) throw ConfigError("graph parameter delta_d must be > 0");
  if (!(sigma > 0.0)) throw ConfigError("graph parameter sigma must be > 0");
}

double kernel_weight(double distance_deg, const SpatialGraphConfig& cfg) {
  const double radius = cfg.edge_radius();
  const double rho = radius > 0.0 ? distance_deg / radius : (distance_deg == 0.0 ? 0.0 : INFINITY);
  return std::exp(-rho * rho / (2.0 * cfg.sigma * cfg.sigma));
}

std::size_t SpatialGraph::degree(std::size_t i) const {
  std::size_t n = 0;
  for (std::size_t j = 0; j < node_count(); ++j) n += adjacent(i, j) && j != i ? 1 : 0;
  return n;
}

Matrix SpatialGraph::log_weights() const {
  Matrix out(weights.rows, weights.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = weights.data[i] > 0.0 ? std::log(weights.data[i]) : -std::numeric_limits<double>::infinity();
  }
  return out;
}

SpatialGraph build_spatial_graph(const Matrix& neighbor_features, std::span<const Direction> neighbor_directions,
                                 const Direction& target, const SpatialGraphConfig& cfg) {
  cfg.validate();
  const auto n = neighbor_directions.size();
  if (neighbor_features.rows != n) throw ContractViolation("spatial graph: feature rows differ from neighbor count");
  if (n == 0) throw DataError("spatial graph: target would be disconnected (no neighbors)");

  SpatialGraph g;
  g.directions.assign(neighbor_directions.begin(), neighbor_directions.end());
  g.directions.push_back(target);
  g.target_index = n;
  g.features = Matrix(n + 1, neighbor_features.cols, 1.0);
  std::copy(neighbor_features.data.begin(), neighbor_features.data.end(), g.features.data.begin());

  g.weights = Matrix(n + 1, n + 1, 0.0);
  const double radius = cfg.edge_radius();
  for (std::size_t i = 0; i <= n; ++i) {
    g.weights(i, i) = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double dist = angular_distance(g.directions[i], g.directions[j]);
      // Neighbors link only inside the edge radius; the target links to all of them.
      if (i == n || dist < radius) {
        const double w = kernel_weight(dist, cfg);
        g.weights(i, j) = w;
        g.weights(j, i) = w;
      }
    }
  }
  // A kernel weight that underflowed to zero would silently drop the edge.
  for (std::size_t j = 0; j < n; ++j) {
    if (!(g.weights(n, j) > 0.0)) {
      g.weights(n, j) = std::numeric_limits<double>::min();
      g.weights(j, n) = std::numeric_limits<double>::min();
    }
  }
  return g;
}

}  // namespace graphnf
