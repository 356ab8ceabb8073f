#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "graphnf/dsp.hpp"
#include "graphnf/errors.hpp"
#include "graphnf/geometry.hpp"

namespace graphnf::data {

inline constexpr int kBundleVersion = 1;

// Magnitudes (and optionally HRIRs) for every subject at every direction.
// magnitudes is [subjects, directions, 2K] dB, hrirs is [subjects, directions, 2, taps].
struct HrtfBundle {
  std::vector<std::string> subjects;
  std::vector<Direction> directions;
  std::size_t K = 0;
  double sample_rate = 48000.0;
  std::vector<float> magnitudes;
  std::size_t taps = 0;
  std::vector<float> hrirs;
  std::string provenance;

  std::size_t subject_count() const { return subjects.size(); }
  std::size_t direction_count() const { return directions.size(); }
  std::size_t width() const { return 2 * K; }
  bool has_hrirs() const { return !hrirs.empty(); }

  std::span<const float> magnitude(std::size_t subject, std::size_t direction) const;
  std::vector<double> magnitude_db(std::size_t subject, std::size_t direction) const;
  dsp::Hrir hrir(std::size_t subject, std::size_t direction) const;

  std::size_t subject_index(const std::string& id) const;
  std::size_t direction_index(const Direction& d) const;

  // Structural invariants: sizes, uniqueness, finiteness. Throws BundleError.
  void validate() const;
};

enum class BundleErrorKind { Io, MalformedManifest, UnsupportedVersion, ShapeMismatch, InvalidContent };

class BundleError : public DataError {
 public:
  BundleError(BundleErrorKind kind, const std::string& what) : DataError(what), kind_(kind) {}
  BundleErrorKind kind() const noexcept { return kind_; }

 private:
  BundleErrorKind kind_;
};

// Directory layout: manifest.json, magnitudes.f32 and (optionally) hrirs.f32,
// little-endian float32, subject-major then direction then bin/sample.
HrtfBundle load_bundle(const std::filesystem::path& dir);
void save_bundle(const HrtfBundle& bundle, const std::filesystem::path& dir);

// Largest |stored - recomputed| dB over all HRIR-bearing entries, minus the
// float32 representation slack of each stored value. Zero when consistent.
double hrir_consistency_excess(const HrtfBundle& bundle, double tolerance_db = 1e-6);

// ---- splits ---------------------------------------------------------------

struct SplitSpec {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  // Direction indices measured for every test (and pseudo-target) subject.
  std::vector<std::size_t> measured;

  void validate(const HrtfBundle& bundle) const;
};

SplitSpec make_splits(const HrtfBundle& bundle, std::array<double, 3> fractions, std::size_t measurement_count,
                      std::uint64_t seed);

// Greedy farthest-point subset starting at the direction nearest (0, 0); ties
// go to the lower index. Returned in selection order.
std::vector<std::size_t> farthest_point_subset(std::span<const Direction> directions, std::size_t count);

void save_splits(const SplitSpec& splits, const std::filesystem::path& file);
SplitSpec load_splits(const std::filesystem::path& file);

// ---- synthetic spherical-head generator -----------------------------------

struct SyntheticConfig {
  std::uint64_t seed = 1;
  std::size_t subject_count = 40;
  std::size_t direction_count = 200;
  std::size_t K = 64;
  double sample_rate = 48000.0;
  std::array<double, 2> head_radius{0.07, 0.105};
  std::size_t resonance_count = 3;
  std::array<double, 2> resonance_frequency{3000.0, 13000.0};
  std::array<double, 2> resonance_width{500.0, 1800.0};
  std::array<double, 2> resonance_gain{-14.0, 10.0};
  double speed_of_sound = 343.0;

  void validate() const;
};

struct Resonance {
  double frequency = 0.0;
  double width = 0.0;
  double gain_db = 0.0;
};

struct SyntheticSubject {
  double head_radius = 0.0875;
  std::vector<Resonance> resonances;
};

// Quasi-uniform grid of elevation rings (odd ring count, so the horizontal
// plane is a ring) with azimuth counts proportional to cos(elevation); every
// ring starts at azimuth 0.
std::vector<Direction> uniform_ring_grid(std::size_t count);

// Woodworth ITD, positive when the source is on the left.
double woodworth_itd(double head_radius, double speed_of_sound, const Direction& d);

// Design log-magnitude (dB) of one ear at the given frequencies: spherical-head
// shadow plus the subject's resonance bumps.
std::vector<double> synthetic_design_db(const SyntheticSubject& subject, const Direction& d, dsp::Ear ear,
                                        std::span<const double> frequencies, double speed_of_sound);

// Minimum-phase responses of the design spectra, delayed per ear by the
// Woodworth arrival times. 2K taps.
dsp::Hrir synthesize_hrir(const SyntheticSubject& subject, const Direction& d, const SyntheticConfig& cfg);

std::vector<SyntheticSubject> draw_synthetic_subjects(const SyntheticConfig& cfg);

HrtfBundle generate_synthetic(const SyntheticConfig& cfg);

}  // namespace graphnf::data
