#include "graphnf/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace graphnf {

FeatureKind feature_kind_from_name(std::string_view name) {
  if (name == "ild") return FeatureKind::Ild;
  if (name == "itd") return FeatureKind::Itd;
  if (name == "lsd") return FeatureKind::Lsd;
  throw ConfigError("unknown retrieval feature '" + std::string(name) + "' (expected ild, itd or lsd)");
}

std::string_view feature_kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Ild: return "ild";
    case FeatureKind::Itd: return "itd";
    case FeatureKind::Lsd: return "lsd";
  }
  return "?";
}

namespace {

template <typename T>
double ild_impl(std::span<const T> bins) {
  if (bins.empty() || bins.size() % 2 != 0) throw ContractViolation("ild: expected 2K bins");
  const auto K = bins.size() / 2;
  double acc = 0.0;
  for (std::size_t k = 0; k < K; ++k) acc += static_cast<double>(bins[k]) - static_cast<double>(bins[K + k]);
  return acc / static_cast<double>(K);
}

template <typename T>
double lsd_impl(std::span<const double> pred, std::span<const T> truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw ContractViolation("lsd: lengths " + std::to_string(pred.size()) + " and " + std::to_string(truth.size()));
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double d = pred[k] - static_cast<double>(truth[k]);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

}  // namespace

double ild_scalar(std::span<const double> bins) { return ild_impl(bins); }
double ild_scalar(std::span<const float> bins) { return ild_impl(bins); }
double lsd(std::span<const double> pred, std::span<const double> truth) { return lsd_impl(pred, truth); }
double lsd(std::span<const double> pred, std::span<const float> truth) { return lsd_impl(pred, truth); }

SubjectFeature subject_feature(const data::HrtfBundle& bundle, std::size_t subject,
                               std::span<const std::size_t> measured, FeatureKind kind) {
  SubjectFeature f;
  f.kind = kind;
  f.measured.assign(measured.begin(), measured.end());
  switch (kind) {
    case FeatureKind::Ild:
      for (auto d : measured) f.values.push_back(ild_scalar(bundle.magnitude(subject, d)));
      break;
    case FeatureKind::Itd:
      if (!bundle.has_hrirs()) throw DataError("ITD feature requested but the bundle has no HRIRs");
      for (auto d : measured) f.values.push_back(dsp::estimate_itd(bundle.hrir(subject, d)));
      break;
    case FeatureKind::Lsd:
      throw ContractViolation("LSD retrieval ranks candidates directly; it has no feature vector");
  }
  return f;
}

SubjectFeature feature_from_measurements(const Matrix& spectra, std::span<const std::size_t> measured,
                                         FeatureKind kind) {
  if (spectra.rows != measured.size()) throw ContractViolation("measured spectra rows differ from subset size");
  if (kind != FeatureKind::Ild) throw ContractViolation("only ILD can be computed from magnitude measurements");
  SubjectFeature f;
  f.kind = kind;
  f.measured.assign(measured.begin(), measured.end());
  for (std::size_t i = 0; i < spectra.rows; ++i) f.values.push_back(ild_scalar(spectra.row(i)));
  return f;
}

double mean_measured_lsd(const data::HrtfBundle& bundle, std::size_t candidate, const Matrix& target_spectra,
                         std::span<const std::size_t> measured) {
  if (target_spectra.rows != measured.size() || measured.empty()) {
    throw ContractViolation("target spectra must have one row per measured direction");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    acc += lsd(target_spectra.row(i), bundle.magnitude(candidate, measured[i]));
  }
  return acc / static_cast<double>(measured.size());
}

std::vector<std::string> retrieve_subjects_by_lsd(const data::HrtfBundle& bundle,
                                                  std::span<const std::string> candidates,
                                                  const Matrix& target_spectra,
                                                  std::span<const std::size_t> measured, std::size_t M) {
  if (M == 0 || M > candidates.size()) {
    throw DataError("retrieval: M = " + std::to_string(M) + " with " + std::to_string(candidates.size()) +
                    " candidates");
  }
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& id : candidates) {
    ranked.emplace_back(mean_measured_lsd(bundle, bundle.subject_index(id), target_spectra, measured), id);
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < M; ++i) out.push_back(ranked[i].second);
  return out;
}

FeatureStandardizer FeatureStandardizer::fit(std::span<const std::vector<double>> rows) {
  FeatureStandardizer s;
  if (rows.empty()) return s;
  const auto n = rows[0].size();
  s.mean.assign(n, 0.0);
  s.stddev.assign(n, 0.0);
  for (const auto& r : rows) {
    if (r.size() != n) throw ContractViolation("standardizer: ragged feature rows");
    for (std::size_t k = 0; k < n; ++k) s.mean[k] += r[k];
  }
  for (auto& m : s.mean) m /= static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < n; ++k) s.stddev[k] += (r[k] - s.mean[k]) * (r[k] - s.mean[k]);
  }
  for (auto& v : s.stddev) {
    v = std::sqrt(v / static_cast<double>(rows.size()));
    if (!(v > 1e-12)) v = 1.0;
  }
  return s;
}

std::vector<double> FeatureStandardizer::apply(std::span<const double> x) const {
  if (mean.empty() && stddev.empty()) return {x.begin(), x.end()};
  if (x.size() != mean.size()) throw ContractViolation("standardizer: dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = (x[k] - mean[k]) / stddev[k];
  return out;
}

SpectrumNormalizer SpectrumNormalizer::fit(const data::HrtfBundle& bundle, std::span<const std::size_t> subjects) {
  if (subjects.empty()) throw DataError("spectrum normalizer: no training subjects");
  const auto w = bundle.width();
  SpectrumNormalizer n;
  n.mean.assign(w, 0.0);
  n.stddev.assign(w, 0.0);
  double count = 0.0;
  for (auto s : subjects) {
    for (std::size_t d = 0; d < bundle.direction_count(); ++d) {
      const auto row = bundle.magnitude(s, d);
      for (std::size_t k = 0; k < w; ++k) n.mean[k] += row[k];
      count += 1.0;
    }
  }
  for (auto& m : n.mean) m /= count;
  for (auto s : subjects) {
    for (std::size_t d = 0; d < bundle.direction_count(); ++d) {
      const auto row = bundle.magnitude(s, d);
      for (std::size_t k = 0; k < w; ++k) n.stddev[k] += (row[k] - n.mean[k]) * (row[k] - n.mean[k]);
    }
  }
  for (auto& v : n.stddev) {
    v = std::sqrt(v / count);
    if (!(v > 1e-6)) v = 1.0;
  }
  return n;
}

SpectrumNormalizer SpectrumNormalizer::identity(std::size_t width) {
  SpectrumNormalizer n;
  n.mean.assign(width, 0.0);
  n.stddev.assign(width, 1.0);
  return n;
}

std::vector<double> SpectrumNormalizer::normalize(std::span<const double> db) const {
  if (db.size() != mean.size()) throw ContractViolation("spectrum normalizer: width mismatch");
  std::vector<double> out(db.size());
  for (std::size_t k = 0; k < db.size(); ++k) out[k] = (db[k] - mean[k]) / stddev[k];
  return out;
}

Clue build_clue(const Direction& d, std::span<const double> feature, const FeatureStandardizer* standardizer) {
  Clue c;
  c.direction = d;
  c.values = {deg_to_rad(d.azimuth), deg_to_rad(d.elevation)};
  const auto f = standardizer ? standardizer->apply(feature) : std::vector<double>(feature.begin(), feature.end());
  c.values.insert(c.values.end(), f.begin(), f.end());
  return c;
}

RffEncoder RffEncoder::make(std::size_t feature_count, std::size_t input_dim, double sigma, std::mt19937_64& rng) {
  if (feature_count == 0 || input_dim == 0) throw ContractViolation("RFF encoder needs positive dimensions");
  RffEncoder e;
  e.sigma = sigma;
  e.frequencies = Matrix(feature_count, input_dim);
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto& v : e.frequencies.data) v = normal(rng);
  return e;
}

std::vector<double> RffEncoder::encode(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    throw ContractViolation("RFF: input has " + std::to_string(x.size()) + " values, encoder expects " +
                            std::to_string(input_dim()));
  }
  const auto F = frequencies.rows;
  std::vector<double> out(2 * F);
  for (std::size_t i = 0; i < F; ++i) {
    double phase = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) phase += frequencies(i, j) * x[j];
    phase *= 2.0 * std::numbers::pi;
    out[i] = std::cos(phase);
    out[F + i] = std::sin(phase);
  }
  return out;
}

}  // namespace graphnf
