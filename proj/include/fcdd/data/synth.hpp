#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fcdd/core/types.hpp"

namespace fcdd {

/// Desk-scale corpus: smooth low-frequency textures, anomalies carry one
/// dark line or blob defect over the same texture.
struct SynthParams {
  Index n_normal = 400;
  Index n_anomalous = 100;
  Index image_size = 224;
  Index texture_cells = 8;        // coarse noise grid resolution
  std::string defect_kind = "line";  // "line" or "blob"
  double defect_contrast = 0.5;   // multiplicative darkening, > 0
  Index line_width = 5;           // pixels, line defects only
  std::uint64_t seed = 1;
};

/// Half-open pixel box [x0, x1) x [y0, y1); x is the column, y the row.
struct DefectBox {
  Index x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

/// The texture an image would have without its defect; anomalous image i
/// shares the background of this call with the same index.
Mat<float> synth_normal_image(const SynthParams& p, Index index);
Mat<float> synth_anomalous_image(const SynthParams& p, Index index, DefectBox* box);

/// Writes normal/, anomalous/ and defects.tsv (relative path + box per
/// anomaly) under out_dir. Byte-identical for equal params.
void synth_dataset(const SynthParams& p, const std::string& out_dir);

std::vector<std::pair<std::string, DefectBox>> load_defect_boxes(const std::string& path);

}  // namespace fcdd
