#include "fcdd/data/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fcdd/data/image_io.hpp"
#include "fcdd/util/errors.hpp"
#include "fcdd/util/rng.hpp"

namespace fs = std::filesystem;

namespace fcdd {

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kCalibration: return "calibration";
    case Split::kTest: return "test";
    case Split::kUnassigned: return "unassigned";
  }
  return "unassigned";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "calibration") return Split::kCalibration;
  if (name == "test") return Split::kTest;
  if (name == "unassigned") return Split::kUnassigned;
  throw InvalidInputError("unknown split name \"" + name + "\"");
}

std::array<Index, 2> DatasetManifest::class_counts() const {
  std::array<Index, 2> counts{0, 0};
  for (const auto& r : records) ++counts[std::size_t(r.label)];
  return counts;
}

std::array<Index, 2> DatasetManifest::class_counts(Split split) const {
  std::array<Index, 2> counts{0, 0};
  for (const auto& r : records) {
    if (r.split == split) ++counts[std::size_t(r.label)];
  }
  return counts;
}

std::vector<const SampleRecord*> DatasetManifest::in_split(Split split) const {
  std::vector<const SampleRecord*> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(&r);
  }
  return out;
}

std::string stable_id(const std::string& path) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : path) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

namespace {

bool looks_like_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

DatasetManifest scan_dataset(const std::string& root, std::vector<std::string>* skipped) {
  DatasetManifest m;
  m.root = root;
  const std::pair<const char*, int> classes[] = {{"normal", 0}, {"anomalous", 1}};
  for (const auto& [dir, label] : classes) {
    const fs::path class_dir = fs::path(root) / dir;
    std::error_code ec;
    if (!fs::is_directory(class_dir, ec)) {
      throw DatasetLayoutError("missing class directory " + class_dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dir)) {
      if (entry.is_regular_file() && looks_like_image(entry.path())) {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      // A quick header decode filters out files that would fail later.
      try {
        load_image(f.string());
      } catch (const ImageLoadError&) {
        if (skipped != nullptr) skipped->push_back(f.string());
        continue;
      }
      SampleRecord r;
      r.path = f.string();
      r.label = label;
      r.split = Split::kUnassigned;
      r.id = stable_id(r.path);
      m.records.push_back(std::move(r));
    }
  }
  return m;
}

DatasetManifest split_manifest(const DatasetManifest& m, const std::array<int, 3>& ratio,
                               std::uint64_t seed) {
  for (int part : ratio) {
    if (part <= 0) throw InvalidParameterError("split ratio parts must be positive");
  }
  const double parts = double(ratio[0] + ratio[1] + ratio[2]);
  DatasetManifest out = m;
  out.split_seed = seed;
  for (int label = 0; label < 2; ++label) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < out.records.size(); ++i) {
      if (out.records[i].label == label) idx.push_back(i);
    }
    const std::size_t n = idx.size();
    if (n == 0) continue;
    if (n < 3) {
      std::cerr << "warning: class " << label << " has only " << n
                << " record(s); assigning all to train\n";
      for (std::size_t i : idx) out.records[i].split = Split::kTrain;
      continue;
    }
    Rng rng = Rng::derived(seed, 0x73706c6974u + std::uint64_t(label));  // "split"
    deterministic_shuffle(idx, rng);

    // Largest-remainder apportionment; ties favor earlier splits, so spare
    // samples lean toward train.
    std::array<std::size_t, 3> want{};
    std::array<double, 3> frac{};
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double exact = double(n) * double(ratio[std::size_t(s)]) / parts;
      want[std::size_t(s)] = std::size_t(exact);
      frac[std::size_t(s)] = exact - double(want[std::size_t(s)]);
      assigned += want[std::size_t(s)];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return frac[std::size_t(a)] > frac[std::size_t(b)]; });
    for (std::size_t left = n - assigned, k = 0; left > 0; --left, ++k) {
      ++want[std::size_t(order[k % 3])];
    }

    std::size_t at = 0;
    for (int s = 0; s < 3; ++s) {
      for (std::size_t k = 0; k < want[std::size_t(s)]; ++k) {
        out.records[idx[at++]].split = Split(s);
      }
    }
  }
  return out;
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream out(path);
  if (!out) throw FileWriteError("cannot open " + path + " for writing");
  out << "path\tlabel\tsplit\tid\n";
  for (const auto& r : m.records) {
    out << r.path << '\t' << r.label << '\t' << split_name(r.split) << '\t' << r.id << '\n';
  }
  out.close();
  if (!out) throw FileWriteError("failed writing " + path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open manifest " + path);
  DatasetManifest m;
  std::string line;
  if (!std::getline(in, line) || line != "path\tlabel\tsplit\tid") {
    throw InvalidInputError("manifest " + path + " has an unexpected header");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    SampleRecord r;
    std::string label, split;
    if (!std::getline(ss, r.path, '\t') || !std::getline(ss, label, '\t') ||
        !std::getline(ss, split, '\t') || !std::getline(ss, r.id)) {
      throw InvalidInputError("manifest " + path + " line " + std::to_string(lineno) +
                              " is malformed");
    }
    if (label != "0" && label != "1") {
      throw InvalidInputError("manifest " + path + " line " + std::to_string(lineno) +
                              " has a bad label");
    }
    r.label = label == "1" ? 1 : 0;
    r.split = split_from_name(split);
    m.records.push_back(std::move(r));
  }
  return m;
}

LoadedBatch load_batch(const std::vector<const SampleRecord*>& records, Index target_h,
                       Index target_w) {
  LoadedBatch batch;
  batch.images.reserve(records.size());
  for (const SampleRecord* r : records) {
    batch.images.push_back(load_unit_image(r->path, target_h, target_w));
    batch.labels.push_back(r->label);
    batch.ids.push_back(r->id);
  }
  return batch;
}

}  // namespace fcdd
