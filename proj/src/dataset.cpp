#include "graphnf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "binary_io.hpp"

namespace graphnf::data {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---- HrtfBundle -------------------------------------------------------------

std::span<const float> HrtfBundle::magnitude(std::size_t subject, std::size_t direction) const {
  if (subject >= subjects.size() || direction >= directions.size()) {
    throw ContractViolation("bundle index out of range");
  }
  const auto w = width();
  return std::span<const float>(magnitudes).subspan((subject * directions.size() + direction) * w, w);
}

std::vector<double> HrtfBundle::magnitude_db(std::size_t subject, std::size_t direction) const {
  auto m = magnitude(subject, direction);
  return {m.begin(), m.end()};
}

dsp::Hrir HrtfBundle::hrir(std::size_t subject, std::size_t direction) const {
  if (!has_hrirs()) throw DataError("bundle carries no HRIRs");
  if (subject >= subjects.size() || direction >= directions.size()) {
    throw ContractViolation("bundle index out of range");
  }
  const auto base = (subject * directions.size() + direction) * 2 * taps;
  dsp::Hrir h;
  h.sample_rate = sample_rate;
  h.left.assign(hrirs.begin() + static_cast<std::ptrdiff_t>(base),
                hrirs.begin() + static_cast<std::ptrdiff_t>(base + taps));
  h.right.assign(hrirs.begin() + static_cast<std::ptrdiff_t>(base + taps),
                 hrirs.begin() + static_cast<std::ptrdiff_t>(base + 2 * taps));
  return h;
}

std::size_t HrtfBundle::subject_index(const std::string& id) const {
  auto it = std::find(subjects.begin(), subjects.end(), id);
  if (it == subjects.end()) throw DataError("unknown subject '" + id + "'");
  return static_cast<std::size_t>(it - subjects.begin());
}

std::size_t HrtfBundle::direction_index(const Direction& d) const {
  for (std::size_t i = 0; i < directions.size(); ++i) {
    if (angular_distance(directions[i], d) < 1e-9) return i;
  }
  throw DataError("direction (" + std::to_string(d.azimuth) + ", " + std::to_string(d.elevation) +
                  ") not in bundle");
}

void HrtfBundle::validate() const {
  auto fail = [](BundleErrorKind kind, const std::string& msg) { throw BundleError(kind, msg); };
  if (subjects.empty()) fail(BundleErrorKind::InvalidContent, "bundle has no subjects");
  if (directions.empty()) fail(BundleErrorKind::InvalidContent, "bundle has no directions");
  if (K == 0) fail(BundleErrorKind::InvalidContent, "bundle K must be > 0");
  if (!(sample_rate > 0.0)) fail(BundleErrorKind::InvalidContent, "sample rate must be > 0");
  if (std::set<std::string>(subjects.begin(), subjects.end()).size() != subjects.size()) {
    fail(BundleErrorKind::InvalidContent, "duplicate subject ids");
  }
  for (std::size_t i = 0; i < directions.size(); ++i) {
    const auto& d = directions[i];
    if (!(d.azimuth >= 0.0 && d.azimuth < 360.0 && d.elevation >= -90.0 && d.elevation <= 90.0)) {
      fail(BundleErrorKind::InvalidContent, "direction " + std::to_string(i) + " out of range");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (angular_distance(directions[j], d) < 1e-9) {
        fail(BundleErrorKind::InvalidContent,
             "duplicate directions at indices " + std::to_string(j) + " and " + std::to_string(i));
      }
    }
  }
  const auto expected = subjects.size() * directions.size() * width();
  if (magnitudes.size() != expected) {
    fail(BundleErrorKind::ShapeMismatch, "magnitudes hold " + std::to_string(magnitudes.size()) +
                                             " values, expected " + std::to_string(expected));
  }
  for (float v : magnitudes) {
    if (!std::isfinite(v)) fail(BundleErrorKind::InvalidContent, "non-finite magnitude");
  }
  if (!hrirs.empty()) {
    if (taps == 0) fail(BundleErrorKind::ShapeMismatch, "HRIRs present but taps = 0");
    const auto expected_h = subjects.size() * directions.size() * 2 * taps;
    if (hrirs.size() != expected_h) {
      fail(BundleErrorKind::ShapeMismatch, "hrirs hold " + std::to_string(hrirs.size()) + " values, expected " +
                                               std::to_string(expected_h));
    }
  }
}

double hrir_consistency_excess(const HrtfBundle& bundle, double tolerance_db) {
  if (!bundle.has_hrirs()) return 0.0;
  double worst = 0.0;
  for (std::size_t s = 0; s < bundle.subject_count(); ++s) {
    for (std::size_t d = 0; d < bundle.direction_count(); ++d) {
      const auto mag = dsp::hrir_to_magnitude(bundle.hrir(s, d), bundle.K);
      const auto stored = bundle.magnitude(s, d);
      for (std::size_t k = 0; k < stored.size(); ++k) {
        const double slack = tolerance_db + std::abs(mag.bins[k]) * 0x1p-24;
        worst = std::max(worst, std::abs(mag.bins[k] - static_cast<double>(stored[k])) - slack);
      }
    }
  }
  return std::max(worst, 0.0);
}

namespace {

void write_floats(const fs::path& file, const std::vector<float>& values) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw BundleError(BundleErrorKind::Io, "cannot write " + file.string());
  for (float v : values) io::write_le(os, v);
  if (!os) throw BundleError(BundleErrorKind::Io, "write failed for " + file.string());
}

std::vector<float> read_floats(const fs::path& file, std::size_t expected) {
  std::error_code ec;
  const auto bytes = fs::file_size(file, ec);
  if (ec) throw BundleError(BundleErrorKind::Io, "cannot read " + file.string());
  if (bytes != expected * sizeof(float)) {
    throw BundleError(BundleErrorKind::ShapeMismatch,
                      file.filename().string() + " holds " + std::to_string(bytes / sizeof(float)) +
                          " floats, manifest implies " + std::to_string(expected));
  }
  std::ifstream is(file, std::ios::binary);
  std::vector<float> out(expected);
  for (auto& v : out) {
    if (!io::read_le(is, v)) throw BundleError(BundleErrorKind::Io, "short read in " + file.string());
  }
  return out;
}

}  // namespace

void save_bundle(const HrtfBundle& bundle, const fs::path& dir) {
  bundle.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw BundleError(BundleErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());

  json manifest;
  manifest["version"] = kBundleVersion;
  manifest["subjects"] = bundle.subjects;
  json dirs = json::array();
  for (const auto& d : bundle.directions) dirs.push_back({d.azimuth, d.elevation});
  manifest["directions"] = dirs;
  manifest["K"] = bundle.K;
  manifest["sample_rate"] = bundle.sample_rate;
  manifest["has_hrirs"] = bundle.has_hrirs();
  manifest["taps"] = bundle.has_hrirs() ? bundle.taps : 0;
  manifest["provenance"] = bundle.provenance;

  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) throw BundleError(BundleErrorKind::Io, "cannot write manifest in " + dir.string());
  os << manifest.dump(2) << "\n";
  os.close();

  write_floats(dir / "magnitudes.f32", bundle.magnitudes);
  if (bundle.has_hrirs()) {
    write_floats(dir / "hrirs.f32", bundle.hrirs);
  } else {
    fs::remove(dir / "hrirs.f32", ec);
  }
}

HrtfBundle load_bundle(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw BundleError(BundleErrorKind::Io, "cannot open " + (dir / "manifest.json").string());
  json manifest;
  try {
    manifest = json::parse(is);
  } catch (const json::exception& e) {
    throw BundleError(BundleErrorKind::MalformedManifest, std::string("manifest is not valid JSON: ") + e.what());
  }

  HrtfBundle b;
  try {
    if (!manifest.is_object()) throw BundleError(BundleErrorKind::MalformedManifest, "manifest must be an object");
    const int version = manifest.at("version").get<int>();
    if (version != kBundleVersion) {
      throw BundleError(BundleErrorKind::UnsupportedVersion,
                        "unsupported bundle version " + std::to_string(version));
    }
    b.subjects = manifest.at("subjects").get<std::vector<std::string>>();
    for (const auto& d : manifest.at("directions")) {
      if (!d.is_array() || d.size() != 2) {
        throw BundleError(BundleErrorKind::MalformedManifest, "direction entries must be [az, el] pairs");
      }
      b.directions.push_back(Direction{d[0].get<double>(), d[1].get<double>()});
    }
    b.K = manifest.at("K").get<std::size_t>();
    b.sample_rate = manifest.at("sample_rate").get<double>();
    const bool has_hrirs = manifest.at("has_hrirs").get<bool>();
    b.taps = manifest.value("taps", std::size_t{0});
    b.provenance = manifest.value("provenance", std::string{});
    if (b.K == 0) throw BundleError(BundleErrorKind::MalformedManifest, "K must be > 0");

    b.magnitudes = read_floats(dir / "magnitudes.f32", b.subjects.size() * b.directions.size() * b.width());
    if (has_hrirs) {
      if (b.taps == 0) throw BundleError(BundleErrorKind::MalformedManifest, "has_hrirs set but taps = 0");
      b.hrirs = read_floats(dir / "hrirs.f32", b.subjects.size() * b.directions.size() * 2 * b.taps);
    } else {
      b.taps = 0;
    }
  } catch (const json::exception& e) {
    throw BundleError(BundleErrorKind::MalformedManifest, std::string("manifest field error: ") + e.what());
  }
  b.validate();
  return b;
}

// ---- splits -----------------------------------------------------------------

void SplitSpec::validate(const HrtfBundle& bundle) const {
  std::set<std::string> seen;
  for (const auto* list : {&train, &validation, &test}) {
    for (const auto& id : *list) {
      bundle.subject_index(id);
      if (!seen.insert(id).second) throw DataError("subject '" + id + "' appears in more than one split");
    }
  }
  std::set<std::size_t> dirs;
  for (auto m : measured) {
    if (m >= bundle.direction_count()) throw DataError("measured direction index " + std::to_string(m) + " invalid");
    if (!dirs.insert(m).second) throw DataError("measured direction index " + std::to_string(m) + " repeated");
  }
}

std::vector<std::size_t> farthest_point_subset(std::span<const Direction> directions, std::size_t count) {
  if (count > directions.size()) {
    throw DataError("cannot pick " + std::to_string(count) + " of " + std::to_string(directions.size()) +
                    " directions");
  }
  std::vector<std::size_t> chosen;
  if (count == 0) return chosen;
  const Direction origin{0.0, 0.0};
  std::size_t first = 0;
  for (std::size_t i = 1; i < directions.size(); ++i) {
    if (angular_distance(directions[i], origin) < angular_distance(directions[first], origin)) first = i;
  }
  chosen.push_back(first);
  std::vector<double> nearest(directions.size());
  for (std::size_t i = 0; i < directions.size(); ++i) nearest[i] = angular_distance(directions[i], directions[first]);
  while (chosen.size() < count) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < directions.size(); ++i) {
      if (nearest[i] > nearest[best]) best = i;
    }
    chosen.push_back(best);
    for (std::size_t i = 0; i < directions.size(); ++i) {
      nearest[i] = std::min(nearest[i], angular_distance(directions[i], directions[best]));
    }
  }
  return chosen;
}

SplitSpec make_splits(const HrtfBundle& bundle, std::array<double, 3> fractions, std::size_t measurement_count,
                      std::uint64_t seed) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9 || fractions[0] < 0 || fractions[1] < 0 || fractions[2] < 0) {
    throw DataError("split fractions must be nonnegative and sum to 1");
  }
  const auto n = bundle.subject_count();
  const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n)));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw DataError("split fractions leave an empty train, validation or test set for " + std::to_string(n) +
                    " subjects");
  }
  if (measurement_count == 0 || measurement_count > bundle.direction_count()) {
    throw DataError("measurement count " + std::to_string(measurement_count) + " infeasible for " +
                    std::to_string(bundle.direction_count()) + " directions");
  }

  std::vector<std::string> ids = bundle.subjects;
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(ids[i - 1], ids[pick(rng)]);
  }

  SplitSpec s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                      ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
  s.measured = farthest_point_subset(bundle.directions, measurement_count);
  return s;
}

void save_splits(const SplitSpec& splits, const fs::path& file) {
  json j;
  j["train"] = splits.train;
  j["validation"] = splits.validation;
  j["test"] = splits.test;
  j["measured"] = splits.measured;
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw DataError("cannot write " + file.string());
  os << j.dump(2) << "\n";
}

SplitSpec load_splits(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw DataError("cannot open " + file.string());
  try {
    const auto j = json::parse(is);
    SplitSpec s;
    s.train = j.at("train").get<std::vector<std::string>>();
    s.validation = j.at("validation").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    s.measured = j.at("measured").get<std::vector<std::size_t>>();
    return s;
  } catch (const json::exception& e) {
    throw DataError("malformed splits file " + file.string() + ": " + e.what());
  }
}

// ---- synthetic --------------------------------------------------------------

void SyntheticConfig::validate() const {
  auto range_ok = [](const std::array<double, 2>& r) { return r[0] <= r[1]; };
  if (!(head_radius[0] > 0.06 && head_radius[1] < 0.12 && range_ok(head_radius))) {
    throw ContractViolation("head radius range must lie within (0.06, 0.12) m");
  }
  if (direction_count < 8) throw ContractViolation("synthetic direction count must be >= 8");
  if (K == 0 || K % 8 != 0) throw ContractViolation("K must be a positive multiple of 8");
  if (!dsp::is_power_of_two(2 * K)) throw ContractViolation("2K must be a power of two");
  if (subject_count == 0) throw ContractViolation("subject count must be >= 1");
  if (!(sample_rate > 0.0) || !(speed_of_sound > 0.0)) throw ContractViolation("rates must be > 0");
  if (!range_ok(resonance_frequency) || !range_ok(resonance_width) || !range_ok(resonance_gain) ||
      resonance_width[0] <= 0.0) {
    throw ContractViolation("invalid resonance parameter ranges");
  }
}

std::vector<Direction> uniform_ring_grid(std::size_t count) {
  if (count == 0) return {};
  auto rings = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(count) * std::numbers::pi / 4.0)));
  if (rings % 2 == 0) {
    const double ideal = std::sqrt(static_cast<double>(count) * std::numbers::pi / 4.0);
    rings = (ideal >= static_cast<double>(rings)) ? rings + 1 : rings - 1;
  }
  rings = std::max<std::size_t>(rings, 1);
  while (rings > count) rings -= 2;

  std::vector<double> elevation(rings), weight(rings);
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < rings; ++i) {
    elevation[i] = 180.0 * static_cast<double>(2 * i + 1) / static_cast<double>(2 * rings) - 90.0;
    weight[i] = std::cos(deg_to_rad(elevation[i]));
    weight_sum += weight[i];
  }
  std::vector<std::size_t> per_ring(rings);
  std::vector<double> remainder(rings);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < rings; ++i) {
    const double ideal = static_cast<double>(count) * weight[i] / weight_sum;
    per_ring[i] = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(ideal)));
    remainder[i] = ideal - static_cast<double>(per_ring[i]);
    assigned += per_ring[i];
  }
  while (assigned < count) {
    const auto i = static_cast<std::size_t>(std::max_element(remainder.begin(), remainder.end()) - remainder.begin());
    ++per_ring[i];
    remainder[i] -= 1.0;
    ++assigned;
  }
  while (assigned > count) {
    const auto i = static_cast<std::size_t>(std::max_element(per_ring.begin(), per_ring.end()) - per_ring.begin());
    --per_ring[i];
    --assigned;
  }

  std::vector<Direction> out;
  out.reserve(count);
  for (std::size_t i = 0; i < rings; ++i) {
    for (std::size_t j = 0; j < per_ring[i]; ++j) {
      out.push_back(Direction{360.0 * static_cast<double>(j) / static_cast<double>(per_ring[i]), elevation[i]});
    }
  }
  return out;
}

double woodworth_itd(double head_radius, double speed_of_sound, const Direction& d) {
  const double lateral = std::asin(std::clamp(d.unit_vector()[1], -1.0, 1.0));
  return head_radius / speed_of_sound * (lateral + std::sin(lateral));
}

namespace {

double incidence_angle(const Direction& d, dsp::Ear ear) {
  const auto u = d.unit_vector();
  const double c = ear == dsp::Ear::Left ? u[1] : -u[1];
  return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace

std::vector<double> synthetic_design_db(const SyntheticSubject& subject, const Direction& d, dsp::Ear ear,
                                        std::span<const double> frequencies, double speed_of_sound) {
  // Spherical-head shadow: one pole at w0 = c/r, zero moved by the incidence angle.
  constexpr double kAlphaMin = 0.1;
  constexpr double kThetaMin = 150.0 * std::numbers::pi / 180.0;
  const double theta = incidence_angle(d, ear);
  const double alpha = (1.0 + kAlphaMin / 2.0) + (1.0 - kAlphaMin / 2.0) * std::cos(theta / kThetaMin * std::numbers::pi);
  const double w0 = speed_of_sound / subject.head_radius;
  const auto u = d.unit_vector();
  const double elevation_shift = 1.0 + 0.25 * std::sin(deg_to_rad(d.elevation));
  const double ear_gain = (0.55 + 0.45 * std::cos(theta)) * (1.0 + 0.25 * u[0]);

  std::vector<double> out(frequencies.size());
  for (std::size_t k = 0; k < frequencies.size(); ++k) {
    const double f = frequencies[k];
    const double x = 2.0 * std::numbers::pi * f / (2.0 * w0);
    double db = 10.0 * std::log10((1.0 + alpha * alpha * x * x) / (1.0 + x * x));
    for (const auto& r : subject.resonances) {
      const double fc = r.frequency * elevation_shift;
      const double z = (f - fc) / r.width;
      db += r.gain_db * ear_gain * std::exp(-0.5 * z * z);
    }
    out[k] = db;
  }
  return out;
}

dsp::Hrir synthesize_hrir(const SyntheticSubject& subject, const Direction& d, const SyntheticConfig& cfg) {
  const auto n = 2 * cfg.K;
  std::vector<double> freqs(cfg.K);
  for (std::size_t k = 0; k < cfg.K; ++k) freqs[k] = static_cast<double>(k + 1) * cfg.sample_rate / static_cast<double>(n);

  // Common onset so the earlier ear never needs a negative delay.
  const double max_itd = cfg.head_radius[1] / cfg.speed_of_sound * (std::numbers::pi / 2.0 + 1.0);
  const double onset = max_itd / 2.0 + 2.0 / cfg.sample_rate;
  const double itd = woodworth_itd(subject.head_radius, cfg.speed_of_sound, d);

  dsp::Hrir h;
  h.sample_rate = cfg.sample_rate;
  for (auto ear : {dsp::Ear::Left, dsp::Ear::Right}) {
    const auto design = synthetic_design_db(subject, d, ear, freqs, cfg.speed_of_sound);
    const auto response = dsp::minimum_phase(design);
    const double arrival = ear == dsp::Ear::Left ? onset - itd / 2.0 : onset + itd / 2.0;
    const auto delay = static_cast<std::size_t>(std::llround(arrival * cfg.sample_rate));
    std::vector<double> out(n, 0.0);
    for (std::size_t i = delay; i < n; ++i) out[i] = response[i - delay];
    (ear == dsp::Ear::Left ? h.left : h.right) = std::move(out);
  }
  return h;
}

std::vector<SyntheticSubject> draw_synthetic_subjects(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  auto uniform = [&](const std::array<double, 2>& r) {
    return std::uniform_real_distribution<double>(r[0], r[1])(rng);
  };
  std::vector<SyntheticSubject> out(cfg.subject_count);
  for (auto& s : out) {
    s.head_radius = uniform(cfg.head_radius);
    // Larger heads (and pinnae) resonate lower.
    const double size_scale = std::sqrt(0.0875 / s.head_radius);
    for (std::size_t i = 0; i < cfg.resonance_count; ++i) {
      Resonance r;
      r.frequency = uniform(cfg.resonance_frequency) * size_scale;
      r.width = uniform(cfg.resonance_width);
      r.gain_db = uniform(cfg.resonance_gain);
      s.resonances.push_back(r);
    }
  }
  return out;
}

HrtfBundle generate_synthetic(const SyntheticConfig& cfg) {
  const auto subjects = draw_synthetic_subjects(cfg);
  HrtfBundle b;
  b.K = cfg.K;
  b.sample_rate = cfg.sample_rate;
  b.taps = 2 * cfg.K;
  b.directions = uniform_ring_grid(cfg.direction_count);
  char buf[32];
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    std::snprintf(buf, sizeof buf, "S%03zu", s);
    b.subjects.emplace_back(buf);
  }
  b.provenance = "synthetic spherical-head generator; seed=" + std::to_string(cfg.seed) +
                 " subjects=" + std::to_string(cfg.subject_count) + " directions=" + std::to_string(cfg.direction_count) +
                 " K=" + std::to_string(cfg.K);

  const auto per = b.direction_count();
  b.magnitudes.reserve(subjects.size() * per * b.width());
  b.hrirs.reserve(subjects.size() * per * 2 * b.taps);
  for (const auto& subject : subjects) {
    for (const auto& d : b.directions) {
      auto h = synthesize_hrir(subject, d, cfg);
      // Stored precision first, so magnitudes are exactly those of the stored HRIRs.
      for (auto* ch : {&h.left, &h.right}) {
        for (auto& v : *ch) v = static_cast<double>(static_cast<float>(v));
      }
      b.hrirs.insert(b.hrirs.end(), h.left.begin(), h.left.end());
      b.hrirs.insert(b.hrirs.end(), h.right.begin(), h.right.end());
      const auto mag = dsp::hrir_to_magnitude(h, cfg.K);
      for (double v : mag.bins) b.magnitudes.push_back(static_cast<float>(v));
    }
  }
  b.validate();
  return b;
}

}  // namespace graphnf::data
