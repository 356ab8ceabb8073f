#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "graphnf/dataset.hpp"
#include "graphnf/geometry.hpp"
#include "graphnf/matrix.hpp"

namespace graphnf {

// ---- retrieval ----------------------------------------------------------

// The M candidates closest to `target` in Euclidean feature distance, ascending,
// ties broken by id. `features[i]` belongs to `ids[i]`; the caller excludes the
// target itself from the candidates.
std::vector<std::string> retrieve_subjects(std::span<const std::string> ids,
                                           std::span<const std::vector<double>> features,
                                           std::span<const double> target, std::size_t M);

// Threshold mode: every candidate with distance < delta_s, same ordering.
std::vector<std::string> retrieve_subjects_within(std::span<const std::string> ids,
                                                  std::span<const std::vector<double>> features,
                                                  std::span<const double> target, double delta_s);

// Indices of directions strictly closer than delta_d degrees to target, in index order.
std::vector<std::size_t> retrieve_directions(std::span<const Direction> directions, const Direction& target,
                                             double delta_d, bool exclude_target);

// ---- subject graph ------------------------------------------------------

// Fully connected graph over the retrieved subjects at one direction, self-loops
// included, every weight 1.
struct SubjectGraph {
  std::vector<std::string> node_ids;
  std::size_t direction = 0;
  Matrix features;  // [nodes, 2K] dB

  std::size_t node_count() const { return node_ids.size(); }
  std::size_t edge_count() const { return node_ids.size() * node_ids.size(); }
  double weight(std::size_t, std::size_t) const { return 1.0; }
};

SubjectGraph build_subject_graph(const data::HrtfBundle& bundle, std::span<const std::string> node_ids,
                                 std::size_t direction_index);

// ---- spatial graph ------------------------------------------------------

struct SpatialGraphConfig {
  double a = 0.75;
  double delta_d = 20.0;
  double sigma = 0.5;

  double edge_radius() const { return a * delta_d; }
  void validate() const;
};

// Gaussian kernel on the angular distance normalized by a * delta_d.
double kernel_weight(double distance_deg, const SpatialGraphConfig& cfg);

// Neighbors first (in the given order), target node last with an all-ones row.
// weights is [n, n] with 0 marking a missing edge.
struct SpatialGraph {
  std::vector<Direction> directions;
  std::vector<std::size_t> neighbor_indices;  // caller's direction indices, may be empty
  std::size_t target_index = 0;
  Matrix features;
  Matrix weights;

  std::size_t node_count() const { return directions.size(); }
  bool adjacent(std::size_t i, std::size_t j) const { return weights(i, j) > 0.0; }
  std::size_t degree(std::size_t i) const;
  // log of the weights, -inf where there is no edge; the attention bias.
  Matrix log_weights() const;
};

SpatialGraph build_spatial_graph(const Matrix& neighbor_features, std::span<const Direction> neighbor_directions,
                                 const Direction& target, const SpatialGraphConfig& cfg);

}  // namespace graphnf
