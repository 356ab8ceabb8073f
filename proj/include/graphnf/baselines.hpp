#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graphnf/dataset.hpp"
#include "graphnf/features.hpp"
#include "graphnf/geometry.hpp"
#include "graphnf/matrix.hpp"

namespace graphnf {

enum class BaselineKind { NearestNeighbor, SelectionLsd, SelectionItd, SelectionIld, LinearInterp };

std::string_view baseline_name(BaselineKind kind);

// Position (into `measured_directions`) of the sample closest to the query;
// ties go to the earlier entry.
std::size_t nearest_measured(std::span<const Direction> measured_directions, const Direction& query);

// The target's own spectrum at the measured direction closest to the query.
std::vector<double> nearest_neighbor(std::span<const Direction> measured_directions, const Matrix& measured_spectra,
                                     const Direction& query);

struct SelectionResult {
  std::string subject;
  double error = 0.0;
};

// Training subject whose measurements best match the target's over the subset:
// mean LSD, mean |dITD| or mean |dILD| per direction. Ties go to the smaller id.
SelectionResult hrtf_selection(const data::HrtfBundle& bundle, std::span<const std::string> candidates,
                               std::size_t target, std::span<const std::size_t> measured, FeatureKind kind);

struct InterpWeights {
  std::vector<std::size_t> samples;  // positions into the measured set
  std::vector<double> weights;       // nonnegative, sum to 1
};

// Two-point inverse-distance blend along the azimuth of the measured ring whose
// elevation is closest to the query; a single sample when the query coincides
// with one or the ring holds only one.
InterpWeights linear_interp_weights(std::span<const Direction> measured_directions, const Direction& query);

std::vector<double> linear_interp(std::span<const Direction> measured_directions, const Matrix& measured_spectra,
                                  const Direction& query);

}  // namespace graphnf
