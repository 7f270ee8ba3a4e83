#pragma once

#include <array>
#include <string>
#include <vector>

#include "fcdd/core/types.hpp"
#include "fcdd/explain/heatmap.hpp"

namespace fcdd {

/// The "damage" colormap: piecewise-linear blue (0) -> yellow (0.5) ->
/// red (1), unit-scaled rgb. Input outside [0, 1] is clamped.
std::array<float, 3> colormap_rgb(double t);

/// Writes the colorized heatmap as a PNG. The heatmap must already be
/// display-normalized to [0, 1]. With an underlay ((h*w) x 3, unit scale)
/// the color is alpha-blended over it at the fixed ratio 0.5.
void render_heatmap_image(const Heatmap<float>& hm, const HeatmapConfig& cfg,
                          const std::string& path, const Mat<float>* underlay = nullptr);

struct ScoreHistogram {
  std::vector<double> edges;  // bins + 1, strictly increasing
  std::vector<Index> count_normal;
  std::vector<Index> count_anomalous;
};

/// Equal-width bins over [min, max] of all scores, last bin right-closed.
/// A zero-width range falls back to a unit span above the minimum.
ScoreHistogram score_histogram(const std::vector<double>& scores, const std::vector<int>& labels,
                               Index bins);

/// Tab-separated: bin_lo, bin_hi, count_normal, count_anomalous.
void save_histogram(const std::string& path, const ScoreHistogram& hist);

}  // namespace fcdd
