#include "ctaug/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "ctaug/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "archive format assumes a little-endian host");

namespace ctaug::nn {

ArchiveWriter::ArchiveWriter(std::string magic) : magic_(std::move(magic)) {}

void ArchiveWriter::add_tensor(const std::string& name, const Tensor<float>& t) {
  nlohmann::json e;
  e["name"] = name;
  e["shape"] = t.shape();
  e["offset"] = blob_.size();
  e["count"] = t.numel();
  table_.push_back(std::move(e));
  blob_.insert(blob_.end(), t.data(), t.data() + t.numel());
}

void ArchiveWriter::write(const std::filesystem::path& path) const {
  nlohmann::json full = meta_;
  full["tensors"] = table_;
  const std::string meta_bytes = full.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write archive: " + path.string());
  out << magic_ << '\n';
  const uint64_t len = meta_bytes.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(meta_bytes.data(), static_cast<std::streamsize>(meta_bytes.size()));
  out.write(reinterpret_cast<const char*>(blob_.data()),
            static_cast<std::streamsize>(blob_.size() * sizeof(float)));
  if (!out) throw DataError("failed writing archive: " + path.string());
}

ArchiveReader::ArchiveReader(const std::filesystem::path& path,
                             const std::string& magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("archive not found: " + path.string());
  std::string got_magic;
  std::getline(in, got_magic);
  if (got_magic != magic)
    throw DataError("archive " + path.string() + ": expected header \"" + magic +
                    "\", got \"" + got_magic + "\"");
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in) throw DataError("archive truncated: " + path.string());
  std::string meta_bytes(len, '\0');
  in.read(meta_bytes.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("archive truncated: " + path.string());
  meta_ = nlohmann::json::parse(meta_bytes);

  size_t total = 0;
  for (const auto& e : meta_.at("tensors")) {
    Entry entry;
    entry.shape = e.at("shape").get<std::vector<int64_t>>();
    entry.offset = e.at("offset").get<size_t>();
    entry.count = e.at("count").get<size_t>();
    total = std::max(total, entry.offset + entry.count);
    index_[e.at("name").get<std::string>()] = std::move(entry);
  }
  blob_.resize(total);
  in.read(reinterpret_cast<char*>(blob_.data()),
          static_cast<std::streamsize>(total * sizeof(float)));
  if (!in && total > 0) throw DataError("archive blob truncated: " + path.string());
}

bool ArchiveReader::has_tensor(const std::string& name) const {
  return index_.count(name) > 0;
}

Tensor<float> ArchiveReader::tensor(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end())
    throw DataError("archive has no tensor \"" + name + "\"");
  Tensor<float> t(it->second.shape);
  if (static_cast<size_t>(t.numel()) != it->second.count)
    throw DataError("archive tensor \"" + name + "\" has inconsistent shape");
  std::memcpy(t.data(), blob_.data() + it->second.offset,
              it->second.count * sizeof(float));
  return t;
}

std::vector<std::string> ArchiveReader::tensor_names() const {
  std::vector<std::string> names;
  names.reserve(index_.size());
  for (const auto& [name, _] : index_) names.push_back(name);
  return names;
}

void save_layer_params(ArchiveWriter& w, Layer<float>& layer,
                       const std::string& prefix) {
  for (Param<float>* p : named_params(layer, ""))
    w.add_tensor(prefix + p->name, p->value);
}

void load_layer_params(const ArchiveReader& r, Layer<float>& layer,
                       const std::string& prefix) {
  for (Param<float>* p : named_params(layer, "")) {
    Tensor<float> t = r.tensor(prefix + p->name);
    if (!t.same_shape(p->value))
      throw DataError("archive tensor \"" + prefix + p->name +
                      "\" shape mismatch: " + shape_string(t.shape()) + " vs " +
                      shape_string(p->value.shape()));
    p->value = std::move(t);
  }
}

}  // namespace ctaug::nn
