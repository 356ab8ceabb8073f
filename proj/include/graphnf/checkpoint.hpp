#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "graphnf/autodiff/tensor.hpp"
#include "graphnf/model_p.hpp"
#include "graphnf/model_u.hpp"

namespace graphnf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
  ad::Shape shape;
  std::vector<double> values;
};

// Raw checkpoint contents; see docs/checkpoint_format.md.
struct CheckpointFile {
  std::string tag;            // MODEL_P or MODEL_U
  std::string metadata_json;  // model configuration
  std::map<std::string, StoredTensor> tensors;
};

void write_checkpoint(const CheckpointFile& file, const std::filesystem::path& path);
CheckpointFile read_checkpoint(const std::filesystem::path& path);

void save_model_p(const ModelP& model, const std::filesystem::path& path);
ModelP load_model_p(const std::filesystem::path& path);
void save_model_u(const ModelU& model, const std::filesystem::path& path);
ModelU load_model_u(const std::filesystem::path& path);

}  // namespace graphnf
