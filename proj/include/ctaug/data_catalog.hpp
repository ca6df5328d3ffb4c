#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ctaug {

enum class Label { covid, normal };
enum class Source { original, generated };
enum class Partition { train, val, test };

const char* to_string(Label l);
const char* to_string(Source s);
const char* to_string(Partition p);
Label label_from_string(const std::string& s);        // throws DataError
Partition partition_from_string(const std::string& s);

// One labeled CT slice tied to a patient identity.
struct SliceRecord {
  std::string patient_id;
  std::string slice_path;
  Label label = Label::covid;
  Source source = Source::original;
};

// Immutable after construction; the patient index is derived from records.
class DatasetManifest {
 public:
  DatasetManifest() = default;
  explicit DatasetManifest(std::vector<SliceRecord> records);

  const std::vector<SliceRecord>& records() const { return records_; }
  const std::map<std::string, std::vector<size_t>>& patients() const {
    return patients_;
  }
  size_t size() const { return records_.size(); }
  size_t patient_count() const { return patients_.size(); }

 private:
  std::vector<SliceRecord> records_;
  std::map<std::string, std::vector<size_t>> patients_;
};

struct SplitRatios {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

struct SplitAssignment {
  std::map<std::string, Partition> partition_of;
  SplitRatios ratios;
  uint64_t seed = 0;

  std::string to_json() const;  // canonical bytes, stable across reruns
  static SplitAssignment from_json(const std::string& text);
};

// CSV manifest: header `patient_id,slice_path,label`, optional fourth column
// `source`. Rows are validated (column count, label, duplicate paths) and
// reported with their 1-based line number.
DatasetManifest load_manifest(const std::filesystem::path& path);

// Same, and additionally require every slice_path to be a readable file.
DatasetManifest load_manifest_checked(const std::filesystem::path& path);

void save_manifest(const std::filesystem::path& path,
                   const DatasetManifest& manifest, bool with_source_column);

// Patients are shuffled deterministically by seed (over the sorted id list),
// val and test take floor(ratio * P) patients each, train absorbs the rest.
SplitAssignment split_by_patient(const DatasetManifest& manifest,
                                 const SplitRatios& ratios, uint64_t seed);

// Records whose patient is assigned to `part`, in manifest order. Generated
// records follow their source patient and are train-only by construction.
std::vector<SliceRecord> slices_for(const SplitAssignment& assignment,
                                    const DatasetManifest& manifest,
                                    Partition part);

// (covid, normal)
std::pair<int64_t, int64_t> class_counts(const std::vector<SliceRecord>& records);

}  // namespace ctaug
