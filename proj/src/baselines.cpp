#include "graphnf/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace graphnf {

std::string_view baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::NearestNeighbor: return "nn";
    case BaselineKind::SelectionLsd: return "sel-lsd";
    case BaselineKind::SelectionItd: return "sel-itd";
    case BaselineKind::SelectionIld: return "sel-ild";
    case BaselineKind::LinearInterp: return "lininterp";
  }
  return "?";
}

std::size_t nearest_measured(std::span<const Direction> measured_directions, const Direction& query) {
  if (measured_directions.empty()) throw DataError("nearest neighbor: no measured directions");
  std::size_t best = 0;
  double best_dist = angular_distance(measured_directions[0], query);
  for (std::size_t i = 1; i < measured_directions.size(); ++i) {
    const double d = angular_distance(measured_directions[i], query);
    if (d < best_dist) {
      best = i;
      best_dist = d;
    }
  }
  return best;
}

std::vector<double> nearest_neighbor(std::span<const Direction> measured_directions, const Matrix& measured_spectra,
                                     const Direction& query) {
  if (measured_spectra.rows != measured_directions.size()) {
    throw ContractViolation("nearest neighbor: one spectrum per measured direction required");
  }
  const auto row = measured_spectra.row(nearest_measured(measured_directions, query));
  return {row.begin(), row.end()};
}

SelectionResult hrtf_selection(const data::HrtfBundle& bundle, std::span<const std::string> candidates,
                               std::size_t target, std::span<const std::size_t> measured, FeatureKind kind) {
  if (measured.empty()) throw DataError("HRTF selection: empty measurement subset");
  std::vector<std::string> ids;
  for (const auto& id : candidates) {
    if (bundle.subject_index(id) != target) ids.push_back(id);
  }
  if (ids.empty()) throw DataError("HRTF selection: no candidates");
  std::sort(ids.begin(), ids.end());

  std::vector<double> target_feature;
  Matrix target_spectra(measured.size(), bundle.width());
  if (kind == FeatureKind::Lsd) {
    for (std::size_t i = 0; i < measured.size(); ++i) {
      const auto row = bundle.magnitude(target, measured[i]);
      std::copy(row.begin(), row.end(), target_spectra.row(i).begin());
    }
  } else {
    target_feature = subject_feature(bundle, target, measured, kind).values;
  }

  SelectionResult best{"", std::numeric_limits<double>::infinity()};
  for (const auto& id : ids) {
    const auto s = bundle.subject_index(id);
    double err = 0.0;
    if (kind == FeatureKind::Lsd) {
      err = mean_measured_lsd(bundle, s, target_spectra, measured);
    } else {
      const auto f = subject_feature(bundle, s, measured, kind).values;
      for (std::size_t i = 0; i < f.size(); ++i) err += std::abs(f[i] - target_feature[i]);
      err /= static_cast<double>(f.size());
    }
    if (err < best.error) best = {id, err};
  }
  if (best.subject.empty()) best = {ids.front(), best.error};
  return best;
}

InterpWeights linear_interp_weights(std::span<const Direction> measured_directions, const Direction& query) {
  if (measured_directions.empty()) throw DataError("linear interpolation: no measured directions");
  InterpWeights out;
  for (std::size_t i = 0; i < measured_directions.size(); ++i) {
    if (angular_distance(measured_directions[i], query) == 0.0) {
      out.samples = {i};
      out.weights = {1.0};
      return out;
    }
  }

  double ring = measured_directions[0].elevation;
  for (const auto& d : measured_directions) {
    if (std::abs(d.elevation - query.elevation) < std::abs(ring - query.elevation)) ring = d.elevation;
  }
  // bracketing samples on that ring: closest at or below the query azimuth, closest above
  std::size_t below = 0, above = 0;
  double gap_below = INFINITY, gap_above = INFINITY;
  for (std::size_t i = 0; i < measured_directions.size(); ++i) {
    if (std::abs(measured_directions[i].elevation - ring) > 1e-9) continue;
    const double down = std::fmod(query.azimuth - measured_directions[i].azimuth + 720.0, 360.0);
    const double up = std::fmod(measured_directions[i].azimuth - query.azimuth + 720.0, 360.0);
    if (down < gap_below) {
      gap_below = down;
      below = i;
    }
    if (up > 0.0 && up < gap_above) {
      gap_above = up;
      above = i;
    }
  }
  if (!std::isfinite(gap_above) || below == above) {
    out.samples = {below};
    out.weights = {1.0};
    return out;
  }
  const double db = angular_distance(measured_directions[below], query);
  const double da = angular_distance(measured_directions[above], query);
  out.samples = {below, above};
  // inverse-distance weights: w_below = (1/db) / (1/db + 1/da) = da / (da + db)
  out.weights = {da / (da + db), db / (da + db)};
  return out;
}

std::vector<double> linear_interp(std::span<const Direction> measured_directions, const Matrix& measured_spectra,
                                  const Direction& query) {
  if (measured_spectra.rows != measured_directions.size()) {
    throw ContractViolation("linear interpolation: one spectrum per measured direction required");
  }
  const auto w = linear_interp_weights(measured_directions, query);
  std::vector<double> out(measured_spectra.cols, 0.0);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const auto row = measured_spectra.row(w.samples[i]);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += w.weights[i] * row[k];
  }
  return out;
}

}  // namespace graphnf
