#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fcdd/core/types.hpp"

namespace fcdd {

enum class Split { kTrain = 0, kCalibration = 1, kTest = 2, kUnassigned = 3 };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct SampleRecord {
  std::string path;
  int label = 0;  // 0 normal, 1 anomalous
  Split split = Split::kUnassigned;
  std::string id;  // stable content-independent hash of the path
};

struct DatasetManifest {
  std::string root;
  std::uint64_t split_seed = 0;
  std::vector<SampleRecord> records;

  std::array<Index, 2> class_counts() const;
  std::array<Index, 2> class_counts(Split split) const;
  std::vector<const SampleRecord*> in_split(Split split) const;
};

/// FNV-1a 64 of the path, rendered as 16 hex digits.
std::string stable_id(const std::string& path);

/// Lists <root>/normal and <root>/anomalous, one record per readable image,
/// ordered by path. Unreadable images are reported in skipped, not fatal.
/// Missing class directories raise DatasetLayoutError.
DatasetManifest scan_dataset(const std::string& root, std::vector<std::string>* skipped = nullptr);

/// Stratified per class: seeded shuffle, then largest-remainder apportioning
/// of the ratio with ties resolved toward earlier splits (train first). A
/// class with fewer records than splits goes wholly to train with a warning
/// on stderr.
DatasetManifest split_manifest(const DatasetManifest& m, const std::array<int, 3>& ratio,
                               std::uint64_t seed);

/// Tab-separated: path, label, split, id; one header line.
void save_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::string& path);

/// Decoded unit-scaled images for the given records, order preserved.
struct LoadedBatch {
  std::vector<Mat<float>> images;
  std::vector<int> labels;
  std::vector<std::string> ids;
};
LoadedBatch load_batch(const std::vector<const SampleRecord*>& records, Index target_h,
                       Index target_w);

}  // namespace fcdd
