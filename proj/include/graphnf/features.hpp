#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graphnf/dataset.hpp"
#include "graphnf/geometry.hpp"
#include "graphnf/matrix.hpp"

namespace graphnf {

enum class FeatureKind { Ild, Itd, Lsd };

FeatureKind feature_kind_from_name(std::string_view name);
std::string_view feature_kind_name(FeatureKind kind);

// Broadband level difference: mean over k of left_dB(k) - right_dB(k).
double ild_scalar(std::span<const double> bins);
double ild_scalar(std::span<const float> bins);

// Root-mean-square dB difference over all bins.
double lsd(std::span<const double> pred, std::span<const double> truth);
double lsd(std::span<const double> pred, std::span<const float> truth);

struct SubjectFeature {
  FeatureKind kind = FeatureKind::Ild;
  std::vector<double> values;
  std::vector<std::size_t> measured;
};

// ILD (dB) or ITD (s) per measured direction. LSD is a ranking, not a vector
// feature: asking for it here is a ContractViolation.
SubjectFeature subject_feature(const data::HrtfBundle& bundle, std::size_t subject,
                               std::span<const std::size_t> measured, FeatureKind kind);

// Feature of a subject known only through measured spectra (rows aligned with
// `measured`), e.g. a test subject. ILD only; ITD needs HRIRs.
SubjectFeature feature_from_measurements(const Matrix& spectra, std::span<const std::size_t> measured,
                                         FeatureKind kind);

// Mean LSD between the target's measured spectra and a candidate's spectra at
// the same directions.
double mean_measured_lsd(const data::HrtfBundle& bundle, std::size_t candidate, const Matrix& target_spectra,
                         std::span<const std::size_t> measured);

// Candidates ranked by mean_measured_lsd, ascending, ties by id; first M kept.
std::vector<std::string> retrieve_subjects_by_lsd(const data::HrtfBundle& bundle,
                                                  std::span<const std::string> candidates,
                                                  const Matrix& target_spectra,
                                                  std::span<const std::size_t> measured, std::size_t M);

// Per-coordinate standardization; coordinates with zero spread pass through
// centered only.
struct FeatureStandardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static FeatureStandardizer fit(std::span<const std::vector<double>> rows);
  std::vector<double> apply(std::span<const double> x) const;
};

// Per-bin mean and spread of training spectra (all directions); networks see
// spectra in this normalized space.
struct SpectrumNormalizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static SpectrumNormalizer fit(const data::HrtfBundle& bundle, std::span<const std::size_t> subjects);
  static SpectrumNormalizer identity(std::size_t width);
  std::size_t width() const { return mean.size(); }
  std::vector<double> normalize(std::span<const double> db) const;
};

// [az_rad, el_rad, standardized feature...]
struct Clue {
  Direction direction;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

Clue build_clue(const Direction& d, std::span<const double> feature, const FeatureStandardizer* standardizer = nullptr);

// Frozen random Fourier features: [cos(2 pi B x); sin(2 pi B x)].
struct RffEncoder {
  Matrix frequencies;  // [F, input_dim]
  double sigma = 1.0;

  static RffEncoder make(std::size_t feature_count, std::size_t input_dim, double sigma, std::mt19937_64& rng);
  std::size_t input_dim() const { return frequencies.cols; }
  std::size_t output_dim() const { return 2 * frequencies.rows; }
  std::vector<double> encode(std::span<const double> x) const;
};

}  // namespace graphnf
