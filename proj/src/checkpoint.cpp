#include "graphnf/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "binary_io.hpp"

namespace graphnf {

using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'G', 'N', 'F', 'C', 'K', 'P', 'T', '1'};

void write_string(std::ostream& os, const std::string& s) {
  io::write_le<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is, std::uint64_t limit) {
  std::uint64_t n = 0;
  if (!io::read_le(is, n) || n > limit) throw DataError("checkpoint: bad string length");
  std::string s(n, '\0');
  if (!is.read(s.data(), static_cast<std::streamsize>(n))) throw DataError("checkpoint: truncated string");
  return s;
}

StoredTensor store(const ad::Tensor& t) { return {t.shape(), {t.values().begin(), t.values().end()}}; }

StoredTensor store_vector(const std::vector<double>& v) { return {{v.size()}, v}; }

const StoredTensor& need(const CheckpointFile& f, const std::string& name) {
  auto it = f.tensors.find(name);
  if (it == f.tensors.end()) throw DataError("checkpoint: missing tensor '" + name + "'");
  return it->second;
}

void restore(const CheckpointFile& f, const std::string& name, ad::Tensor& into) {
  const auto& s = need(f, name);
  if (s.shape != into.shape()) {
    throw DataError("checkpoint: tensor '" + name + "' has shape " + ad::shape_str(s.shape) + ", model expects " +
                    ad::shape_str(into.shape()));
  }
  auto v = into.mutable_values();
  std::copy(s.values.begin(), s.values.end(), v.begin());
}

json p_config_json(const ModelPConfig& c) {
  return {{"K", c.K},
          {"clue_features", c.clue_features},
          {"gat1_heads", c.gat1_heads},
          {"gat1_dim", c.gat1_dim},
          {"gat2_dim", c.gat2_dim},
          {"fusion_heads", c.fusion_heads},
          {"fusion_dim", c.fusion_dim},
          {"rff_features", c.rff_features},
          {"rff_sigma", c.rff_sigma},
          {"variant", std::string(p_variant_name(c.variant))}};
}

ModelPConfig p_config_from_json(const json& j) {
  ModelPConfig c;
  c.K = j.at("K");
  c.clue_features = j.at("clue_features");
  c.gat1_heads = j.at("gat1_heads");
  c.gat1_dim = j.at("gat1_dim");
  c.gat2_dim = j.at("gat2_dim");
  c.fusion_heads = j.at("fusion_heads");
  c.fusion_dim = j.at("fusion_dim");
  c.rff_features = j.at("rff_features");
  c.rff_sigma = j.at("rff_sigma");
  c.variant = p_variant_from_name(j.at("variant").get<std::string>());
  return c;
}

}  // namespace

void write_checkpoint(const CheckpointFile& file, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof kMagic);
  io::write_le<std::uint32_t>(os, kCheckpointVersion);
  write_string(os, file.tag);
  write_string(os, file.metadata_json);
  io::write_le<std::uint64_t>(os, file.tensors.size());
  for (const auto& [name, t] : file.tensors) {
    write_string(os, name);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) io::write_le<std::uint64_t>(os, d);
    for (double v : t.values) io::write_le(os, v);
  }
  if (!os) throw DataError("write failed for checkpoint " + path.string());
}

CheckpointFile read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw DataError(path.string() + " is not a checkpoint file");
  }
  std::uint32_t version = 0;
  if (!io::read_le(is, version) || version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointFile f;
  f.tag = read_string(is, 64);
  f.metadata_json = read_string(is, 1 << 24);
  std::uint64_t count = 0;
  if (!io::read_le(is, count) || count > 100000) throw DataError("checkpoint: bad tensor count");
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name = read_string(is, 4096);
    std::uint32_t rank = 0;
    if (!io::read_le(is, rank) || rank > 8) throw DataError("checkpoint: bad rank for '" + name + "'");
    StoredTensor t;
    std::uint64_t total = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      std::uint64_t d = 0;
      if (!io::read_le(is, d) || d > (1u << 28)) throw DataError("checkpoint: bad dimension for '" + name + "'");
      t.shape.push_back(static_cast<std::size_t>(d));
      total *= d;
    }
    if (total > (1u << 28)) throw DataError("checkpoint: tensor '" + name + "' too large");
    t.values.resize(total);
    for (auto& v : t.values) {
      if (!io::read_le(is, v)) throw DataError("checkpoint: truncated tensor '" + name + "'");
    }
    f.tensors.emplace(std::move(name), std::move(t));
  }
  return f;
}

void save_model_p(const ModelP& model, const std::filesystem::path& path) {
  CheckpointFile f;
  f.tag = "MODEL_P";
  f.metadata_json = json{{"config", p_config_json(model.config)}}.dump();
  for (const auto& [name, t] : model.named_parameters()) f.tensors[name] = store(t);
  f.tensors["rff.frequencies"] = {{model.rff.frequencies.rows, model.rff.frequencies.cols}, model.rff.frequencies.data};
  f.tensors["normalizer.mean"] = store_vector(model.normalizer.mean);
  f.tensors["normalizer.stddev"] = store_vector(model.normalizer.stddev);
  f.tensors["clue.mean"] = store_vector(model.clue_standardizer.mean);
  f.tensors["clue.stddev"] = store_vector(model.clue_standardizer.stddev);
  write_checkpoint(f, path);
}

ModelP load_model_p(const std::filesystem::path& path) {
  const auto f = read_checkpoint(path);
  if (f.tag != "MODEL_P") throw DataError(path.string() + " holds " + f.tag + ", expected MODEL_P");
  ModelPConfig config;
  try {
    config = p_config_from_json(json::parse(f.metadata_json).at("config"));
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint metadata: ") + e.what());
  }
  auto m = ModelP::init(config, 0);
  for (auto& [name, t] : m.named_parameters()) restore(f, name, t);
  const auto& rff = need(f, "rff.frequencies");
  if (rff.shape != ad::Shape{m.rff.frequencies.rows, m.rff.frequencies.cols}) {
    throw DataError("checkpoint: RFF matrix shape mismatch");
  }
  m.rff.frequencies.data = rff.values;
  m.normalizer.mean = need(f, "normalizer.mean").values;
  m.normalizer.stddev = need(f, "normalizer.stddev").values;
  m.clue_standardizer.mean = need(f, "clue.mean").values;
  m.clue_standardizer.stddev = need(f, "clue.stddev").values;
  return m;
}

void save_model_u(const ModelU& model, const std::filesystem::path& path) {
  CheckpointFile f;
  f.tag = "MODEL_U";
  const auto& c = model.config;
  f.metadata_json =
      json{{"config", {{"K", c.K}, {"gat1_heads", c.gat1_heads}, {"gat1_dim", c.gat1_dim}, {"gat2_dim", c.gat2_dim}}}}
          .dump();
  for (const auto& [name, t] : model.named_parameters()) f.tensors[name] = store(t);
  f.tensors["normalizer.mean"] = store_vector(model.normalizer.mean);
  f.tensors["normalizer.stddev"] = store_vector(model.normalizer.stddev);
  write_checkpoint(f, path);
}

ModelU load_model_u(const std::filesystem::path& path) {
  const auto f = read_checkpoint(path);
  if (f.tag != "MODEL_U") throw DataError(path.string() + " holds " + f.tag + ", expected MODEL_U");
  ModelUConfig c;
  try {
    const auto j = json::parse(f.metadata_json).at("config");
    c.K = j.at("K");
    c.gat1_heads = j.at("gat1_heads");
    c.gat1_dim = j.at("gat1_dim");
    c.gat2_dim = j.at("gat2_dim");
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint metadata: ") + e.what());
  }
  auto m = ModelU::init(c, 0);
  for (auto& [name, t] : m.named_parameters()) restore(f, name, t);
  m.normalizer.mean = need(f, "normalizer.mean").values;
  m.normalizer.stddev = need(f, "normalizer.stddev").values;
  return m;
}

}  // namespace graphnf
