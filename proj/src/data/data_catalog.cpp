#include "ctaug/data_catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ctaug/errors.hpp"
#include "ctaug/rng.hpp"
#include "json.hpp"

namespace ctaug {

const char* to_string(Label l) { return l == Label::covid ? "covid" : "normal"; }
const char* to_string(Source s) {
  return s == Source::original ? "original" : "generated";
}
const char* to_string(Partition p) {
  switch (p) {
    case Partition::train: return "train";
    case Partition::val: return "val";
    default: return "test";
  }
}

Label label_from_string(const std::string& s) {
  if (s == "covid") return Label::covid;
  if (s == "normal") return Label::normal;
  throw DataError("unknown label \"" + s + "\"");
}

Partition partition_from_string(const std::string& s) {
  if (s == "train") return Partition::train;
  if (s == "val") return Partition::val;
  if (s == "test") return Partition::test;
  throw DataError("unknown partition \"" + s + "\"");
}

DatasetManifest::DatasetManifest(std::vector<SliceRecord> records)
    : records_(std::move(records)) {
  std::set<std::string> seen_paths;
  for (size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.patient_id.empty()) throw DataError("record with empty patient_id");
    if (r.slice_path.empty()) throw DataError("record with empty slice_path");
    if (!seen_paths.insert(r.slice_path).second)
      throw DataError("duplicate slice_path: " + r.slice_path);
    patients_[r.patient_id].push_back(i);
  }
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

Source source_from_string(const std::string& s, size_t line_no) {
  if (s == "original") return Source::original;
  if (s == "generated") return Source::generated;
  throw DataError("manifest line " + std::to_string(line_no) +
                  ": unknown source \"" + s + "\"");
}

DatasetManifest load_manifest_impl(const std::filesystem::path& path,
                                   bool check_files) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest not found: " + path.string());

  std::string line;
  size_t line_no = 0;
  bool has_source = false;
  std::vector<SliceRecord> records;
  std::set<std::string> seen_paths;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line == "patient_id,slice_path,label") {
        has_source = false;
      } else if (line == "patient_id,slice_path,label,source") {
        has_source = true;
      } else {
        throw DataError("manifest header must be "
                        "\"patient_id,slice_path,label[,source]\", got \"" +
                        line + "\"");
      }
      continue;
    }
    if (line.empty() && in.eof()) break;  // trailing newline
    const auto fields = split_fields(line);
    const size_t expected = has_source ? 4 : 3;
    if (fields.size() != expected)
      throw DataError("manifest line " + std::to_string(line_no) + ": expected " +
                      std::to_string(expected) + " columns, got " +
                      std::to_string(fields.size()));
    SliceRecord rec;
    rec.patient_id = fields[0];
    rec.slice_path = fields[1];
    if (rec.patient_id.empty())
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": empty patient_id");
    if (rec.slice_path.empty())
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": empty slice_path");
    try {
      rec.label = label_from_string(fields[2]);
    } catch (const DataError&) {
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": unknown label \"" + fields[2] + "\"");
    }
    if (has_source) rec.source = source_from_string(fields[3], line_no);
    if (!seen_paths.insert(rec.slice_path).second)
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": duplicate slice_path \"" + rec.slice_path + "\"");
    if (check_files) {
      std::ifstream probe(rec.slice_path, std::ios::binary);
      if (!probe)
        throw DataError("manifest line " + std::to_string(line_no) +
                        ": slice file not readable: " + rec.slice_path);
    }
    records.push_back(std::move(rec));
  }
  if (line_no == 0) throw DataError("manifest is empty (no header): " + path.string());
  return DatasetManifest(std::move(records));
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  return load_manifest_impl(path, false);
}

DatasetManifest load_manifest_checked(const std::filesystem::path& path) {
  return load_manifest_impl(path, true);
}

void save_manifest(const std::filesystem::path& path,
                   const DatasetManifest& manifest, bool with_source_column) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest: " + path.string());
  out << "patient_id,slice_path,label";
  if (with_source_column) out << ",source";
  out << "\n";
  for (const auto& r : manifest.records()) {
    if (r.slice_path.find(',') != std::string::npos ||
        r.patient_id.find(',') != std::string::npos)
      throw DataError("comma in manifest field is not representable: " +
                      r.slice_path);
    out << r.patient_id << ',' << r.slice_path << ',' << to_string(r.label);
    if (with_source_column) out << ',' << to_string(r.source);
    out << "\n";
  }
  if (!out) throw DataError("failed writing manifest: " + path.string());
}

std::string SplitAssignment::to_json() const {
  nlohmann::json j;  // std::map keys -> stable alphabetical order
  j["seed"] = seed;
  j["ratios"] = {ratios.train, ratios.val, ratios.test};
  nlohmann::json parts = nlohmann::json::object();
  for (const auto& [pid, part] : partition_of) parts[pid] = to_string(part);
  j["partition_of"] = parts;
  return j.dump(2) + "\n";
}

SplitAssignment SplitAssignment::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  SplitAssignment a;
  a.seed = j.at("seed").get<uint64_t>();
  const auto r = j.at("ratios");
  a.ratios = SplitRatios{r.at(0).get<double>(), r.at(1).get<double>(),
                         r.at(2).get<double>()};
  for (const auto& [pid, part] : j.at("partition_of").items())
    a.partition_of[pid] = partition_from_string(part.get<std::string>());
  return a;
}

SplitAssignment split_by_patient(const DatasetManifest& manifest,
                                 const SplitRatios& ratios, uint64_t seed) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0)
    throw DataError("split ratios must be non-negative");
  const double sum = ratios.train + ratios.val + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9)
    throw DataError("split ratios must sum to 1, got " + std::to_string(sum));
  if (manifest.patient_count() == 0)
    throw DataError("cannot split an empty manifest");

  // Sorted ids + seeded shuffle: independent of manifest row order.
  std::vector<std::string> ids;
  ids.reserve(manifest.patient_count());
  for (const auto& [pid, _] : manifest.patients()) ids.push_back(pid);
  Rng rng(seed);
  rng.shuffle(ids);

  const auto p = static_cast<int64_t>(ids.size());
  const auto n_val = static_cast<int64_t>(std::floor(ratios.val * static_cast<double>(p)));
  const auto n_test = static_cast<int64_t>(std::floor(ratios.test * static_cast<double>(p)));

  SplitAssignment out;
  out.ratios = ratios;
  out.seed = seed;
  for (int64_t i = 0; i < p; ++i) {
    Partition part = Partition::train;
    if (i < n_val)
      part = Partition::val;
    else if (i < n_val + n_test)
      part = Partition::test;
    out.partition_of[ids[static_cast<size_t>(i)]] = part;
  }
  return out;
}

std::vector<SliceRecord> slices_for(const SplitAssignment& assignment,
                                    const DatasetManifest& manifest,
                                    Partition part) {
  std::vector<SliceRecord> out;
  for (const auto& r : manifest.records()) {
    const auto it = assignment.partition_of.find(r.patient_id);
    if (it == assignment.partition_of.end())
      throw DataError("patient \"" + r.patient_id +
                      "\" is not covered by the split assignment");
    if (it->second == part) out.push_back(r);
  }
  return out;
}

std::pair<int64_t, int64_t> class_counts(const std::vector<SliceRecord>& records) {
  int64_t covid = 0, normal = 0;
  for (const auto& r : records)
    (r.label == Label::covid ? covid : normal) += 1;
  return {covid, normal};
}

}  // namespace ctaug
