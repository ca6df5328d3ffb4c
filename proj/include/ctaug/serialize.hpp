#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctaug/nn.hpp"
#include "ctaug/tensor.hpp"

namespace ctaug::nn {

// Single-file archive: ASCII magic line, little-endian u64 metadata length,
// metadata JSON (with a tensor table), then a raw float32 blob. Used for
// model-provider archives and both checkpoint formats.
class ArchiveWriter {
 public:
  explicit ArchiveWriter(std::string magic);

  nlohmann::json& meta() { return meta_; }
  void add_tensor(const std::string& name, const Tensor<float>& t);
  void write(const std::filesystem::path& path) const;

 private:
  std::string magic_;
  nlohmann::json meta_;
  nlohmann::json table_ = nlohmann::json::array();
  std::vector<float> blob_;
};

class ArchiveReader {
 public:
  ArchiveReader(const std::filesystem::path& path, const std::string& magic);

  const nlohmann::json& meta() const { return meta_; }
  bool has_tensor(const std::string& name) const;
  Tensor<float> tensor(const std::string& name) const;
  std::vector<std::string> tensor_names() const;

 private:
  nlohmann::json meta_;
  struct Entry {
    std::vector<int64_t> shape;
    size_t offset;  // floats
    size_t count;
  };
  std::map<std::string, Entry> index_;
  std::vector<float> blob_;
};

// Store / restore every named parameter of a layer stack.
void save_layer_params(ArchiveWriter& w, Layer<float>& layer,
                       const std::string& prefix);
void load_layer_params(const ArchiveReader& r, Layer<float>& layer,
                       const std::string& prefix);

}  // namespace ctaug::nn
