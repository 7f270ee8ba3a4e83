#include "fcdd/explain/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fcdd/data/image_io.hpp"
#include "fcdd/util/errors.hpp"

namespace fcdd {

std::array<float, 3> colormap_rgb(double t) {
  t = std::clamp(t, 0.0, 1.0);
  if (t < 0.5) {
    const float u = float(2.0 * t);
    return {u, u, 1.0f - u};
  }
  const float u = float(2.0 * t - 1.0);
  return {1.0f, 1.0f - u, 0.0f};
}

void render_heatmap_image(const Heatmap<float>& hm, const HeatmapConfig& cfg,
                          const std::string& path, const Mat<float>* underlay) {
  validate_heatmap_config(cfg);
  const Index h = hm.values.rows();
  const Index w = hm.values.cols();
  if (h < 1 || w < 1) throw InvalidInputError("render_heatmap_image on an empty heatmap");
  if (underlay != nullptr && (underlay->rows() != h * w || underlay->cols() != 3)) {
    throw InvalidInputError("underlay shape does not match the heatmap");
  }
  Mat<float> rgb(h * w, 3);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      const auto color = colormap_rgb(double(hm.values(y, x)));
      const Index r = y * w + x;
      for (Index c = 0; c < 3; ++c) rgb(r, c) = color[std::size_t(c)];
    }
  }
  if (underlay != nullptr) {
    rgb = 0.5f * rgb + 0.5f * (*underlay);
  }
  save_png(path, to_image_u8(rgb, h, w));
}

ScoreHistogram score_histogram(const std::vector<double>& scores, const std::vector<int>& labels,
                               Index bins) {
  if (scores.empty()) throw InvalidInputError("score_histogram needs at least one score");
  if (scores.size() != labels.size()) {
    throw InvalidInputError("score_histogram scores and labels differ in length");
  }
  if (bins < 1) throw InvalidParameterError("score_histogram needs at least one bin");
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it;
  const double span = *hi_it - lo > 0.0 ? *hi_it - lo : 1.0;
  ScoreHistogram hist;
  hist.edges.resize(std::size_t(bins) + 1);
  for (Index b = 0; b <= bins; ++b) {
    hist.edges[std::size_t(b)] = lo + span * double(b) / double(bins);
  }
  hist.count_normal.assign(std::size_t(bins), 0);
  hist.count_anomalous.assign(std::size_t(bins), 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double offset = (scores[i] - lo) / span * double(bins);
    const Index b = std::min<Index>(bins - 1, Index(offset));
    (labels[i] == 1 ? hist.count_anomalous : hist.count_normal)[std::size_t(b)] += 1;
  }
  return hist;
}

void save_histogram(const std::string& path, const ScoreHistogram& hist) {
  std::ofstream out(path);
  if (!out) throw FileWriteError("cannot open " + path + " for writing");
  out << "bin_lo\tbin_hi\tcount_normal\tcount_anomalous\n";
  out.precision(17);
  for (std::size_t b = 0; b + 1 < hist.edges.size(); ++b) {
    out << hist.edges[b] << '\t' << hist.edges[b + 1] << '\t' << hist.count_normal[b] << '\t'
        << hist.count_anomalous[b] << '\n';
  }
  out.close();
  if (!out) throw FileWriteError("failed writing " + path);
}

}  // namespace fcdd
