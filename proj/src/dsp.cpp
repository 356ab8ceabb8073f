#include "graphnf/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "graphnf/errors.hpp"

namespace graphnf::dsp {

void Hrir::validate() const {
  if (left.empty() || right.empty()) throw ContractViolation("HRIR is empty");
  if (left.size() != right.size()) {
    throw ContractViolation("HRIR channels differ in length: " + std::to_string(left.size()) + " vs " +
                            std::to_string(right.size()));
  }
  if (!(sample_rate > 0.0)) throw ContractViolation("HRIR sample rate must be > 0");
}

std::span<const double> MagnitudeSpectrum::ear(Ear e) const {
  return std::span<const double>(bins).subspan(e == Ear::Left ? 0 : K, K);
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const auto n = a.size();
  if (!is_power_of_two(n)) throw ContractViolation("fft length " + std::to_string(n) + " is not a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        // Twiddles evaluated directly rather than by recurrence to keep round-off at 1e-15.
        const std::complex<double> w(std::cos(ang * static_cast<double>(k)), std::sin(ang * static_cast<double>(k)));
        const auto u = a[i + k];
        const auto v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
  if (inverse) {
    const double s = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= s;
  }
}

std::vector<std::complex<double>> fft(std::vector<std::complex<double>> signal, bool inverse) {
  fft_inplace(signal, inverse);
  return signal;
}

std::size_t magnitude_fft_size(std::size_t taps, std::size_t K) { return next_power_of_two(std::max(taps, 2 * K)); }

std::vector<double> magnitude_db(std::span<const double> signal, std::size_t fft_size, std::size_t K) {
  if (K == 0 || K > fft_size / 2) {
    throw ContractViolation("K=" + std::to_string(K) + " exceeds half the FFT size " + std::to_string(fft_size));
  }
  std::vector<std::complex<double>> buf(fft_size);
  for (std::size_t i = 0; i < signal.size() && i < fft_size; ++i) buf[i] = signal[i];
  fft_inplace(buf, false);
  std::vector<double> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    out[k] = 20.0 * std::log10(std::max(std::abs(buf[k + 1]), kMagnitudeFloor));
  }
  return out;
}

MagnitudeSpectrum hrir_to_magnitude(const Hrir& h, std::size_t K) {
  h.validate();
  const auto n = magnitude_fft_size(h.left.size(), K);
  MagnitudeSpectrum m;
  m.K = K;
  m.bins = magnitude_db(h.left, n, K);
  auto right = magnitude_db(h.right, n, K);
  m.bins.insert(m.bins.end(), right.begin(), right.end());
  m.bin_frequencies.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    m.bin_frequencies[k] = static_cast<double>(k + 1) * h.sample_rate / static_cast<double>(n);
  }
  return m;
}

std::vector<double> minimum_phase(const MagnitudeSpectrum& mag, Ear ear) {
  if (mag.bins.size() != 2 * mag.K) throw ContractViolation("magnitude spectrum must hold 2K bins");
  return minimum_phase(mag.ear(ear));
}

std::vector<double> minimum_phase(std::span<const double> ear_db) {
  const auto K = ear_db.size();
  if (K == 0) throw ContractViolation("minimum_phase: no bins");
  const auto n = 2 * K;
  if (!is_power_of_two(n)) throw ContractViolation("minimum_phase: 2K must be a power of two");
  for (double v : ear_db) {
    if (!std::isfinite(v)) throw ContractViolation("minimum_phase: non-finite magnitude");
  }
  constexpr double kNepersPerDb = std::numbers::ln10 / 20.0;

  // Natural-log magnitude on the full Hermitian grid: bins 1..K given, DC copies bin 1.
  std::vector<std::complex<double>> buf(n);
  buf[0] = ear_db[0] * kNepersPerDb;
  for (std::size_t k = 1; k <= K; ++k) buf[k] = ear_db[k - 1] * kNepersPerDb;
  for (std::size_t k = K + 1; k < n; ++k) buf[k] = buf[n - k];

  fft_inplace(buf, true);  // real cepstrum
  for (std::size_t i = 1; i < K; ++i) buf[i] = 2.0 * buf[i].real();
  buf[0] = buf[0].real();
  buf[K] = buf[K].real();
  for (std::size_t i = K + 1; i < n; ++i) buf[i] = 0.0;

  fft_inplace(buf, false);
  for (auto& x : buf) x = std::exp(x);
  fft_inplace(buf, true);

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real();
  return out;
}

double estimate_itd(const Hrir& h) {
  h.validate();
  auto peak = [](const std::vector<double>& x) {
    double p = 0.0;
    for (double v : x) p = std::max(p, std::abs(v));
    return p;
  };
  if (!(peak(h.left) > 0.0) || !(peak(h.right) > 0.0)) {
    throw DataError("cannot estimate ITD: silent channel");
  }
  const auto n = static_cast<std::ptrdiff_t>(h.left.size());
  const auto max_lag = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(std::floor(kMaxItdSeconds * h.sample_rate)),
                                                n - 1);
  // r(lag) = sum_i L[i] R[i + lag]; the maximizing lag is the right channel's delay.
  std::ptrdiff_t best_lag = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::ptrdiff_t mag = 0; mag <= max_lag; ++mag) {
    for (const std::ptrdiff_t lag : {mag, -mag}) {
      double r = 0.0;
      for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, -lag); i < n && i + lag < n; ++i) {
        r += h.left[static_cast<std::size_t>(i)] * h.right[static_cast<std::size_t>(i + lag)];
      }
      if (r > best) {
        best = r;
        best_lag = lag;
      }
      if (mag == 0) break;
    }
  }
  return -static_cast<double>(best_lag) / h.sample_rate;
}

}  // namespace graphnf::dsp
