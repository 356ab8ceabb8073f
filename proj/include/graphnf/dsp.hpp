#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace graphnf::dsp {

// Linear magnitudes below this are clamped before conversion to dB (-100 dB).
inline constexpr double kMagnitudeFloor = 1e-5;
// Cross-correlation search range for ITD estimation.
inline constexpr double kMaxItdSeconds = 1e-3;

struct Hrir {
  std::vector<double> left;
  std::vector<double> right;
  double sample_rate = 48000.0;

  void validate() const;
};

enum class Ear { Left, Right };

// Log-magnitude of one direction: bins[0..K) left ear, bins[K..2K) right ear,
// in dB. The DC bin is not included; bin k (1-based) sits at k * fs / fft_size.
struct MagnitudeSpectrum {
  std::vector<double> bins;
  std::size_t K = 0;
  std::vector<double> bin_frequencies;

  std::span<const double> ear(Ear e) const;
};

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

// In-place iterative radix-2 transform; the inverse is scaled by 1/n.
void fft_inplace(std::vector<std::complex<double>>& data, bool inverse);
std::vector<std::complex<double>> fft(std::vector<std::complex<double>> signal, bool inverse = false);

// FFT size used for an HRIR of `taps` samples at K bins per ear.
std::size_t magnitude_fft_size(std::size_t taps, std::size_t K);

MagnitudeSpectrum hrir_to_magnitude(const Hrir& h, std::size_t K);

// Magnitude (dB, K bins starting at bin 1) of one real signal zero-padded to fft_size.
std::vector<double> magnitude_db(std::span<const double> signal, std::size_t fft_size, std::size_t K);

// Minimum-phase impulse response (2K samples) whose magnitude at DFT bins 1..K
// equals the given ear's magnitude. Folded real cepstrum; DC takes the bin-1 level.
std::vector<double> minimum_phase(const MagnitudeSpectrum& mag, Ear ear);
std::vector<double> minimum_phase(std::span<const double> ear_db);

// Interaural time difference in seconds, positive when the right channel leads.
// Integer-lag cross-correlation over +-1 ms.
double estimate_itd(const Hrir& h);

}  // namespace graphnf::dsp
