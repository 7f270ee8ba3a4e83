#pragma once

#include <cmath>
#include <string>

#include "fcdd/core/types.hpp"
#include "fcdd/net/spec.hpp"
#include "fcdd/util/errors.hpp"

namespace fcdd {

/// Full-resolution damage heatmap, row y / column x.
template <typename Scalar>
struct Heatmap {
  Mat<Scalar> values;  // h x w
  std::string image_id;
};

struct HeatmapConfig {
  double sigma = 8.0;              // input pixels; default is one cell stride
  double display_quantile = 0.25;  // in (0, 1]
  std::string colormap = "damage";
  double truncation_radius = 4.0;  // in sigmas, >= 3
};

inline void validate_heatmap_config(const HeatmapConfig& cfg) {
  if (!(cfg.sigma > 0.0)) throw InvalidParameterError("heatmap sigma must be positive");
  if (!(cfg.display_quantile > 0.0) || cfg.display_quantile > 1.0) {
    throw InvalidParameterError("display_quantile must lie in (0, 1]");
  }
  if (!(cfg.truncation_radius >= 3.0)) {
    throw InvalidParameterError("truncation_radius must be at least 3 sigmas");
  }
  if (cfg.colormap != "damage") {
    throw InvalidParameterError("unknown colormap \"" + cfg.colormap + "\"");
  }
}

namespace detail {

/// One axis of the separable kernel over rows [lo, hi]: the returned vector
/// holds exp(-(i - center)^2 / (2 sigma^2)) / sqrt(2 pi sigma^2).
template <typename Scalar>
Vec<Scalar> gauss_axis(double center, double sigma, Index lo, Index hi) {
  Vec<Scalar> v(hi - lo + 1);
  const double norm = 1.0 / std::sqrt(2.0 * 3.14159265358979323846 * sigma * sigma);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (Index i = lo; i <= hi; ++i) {
    const double d = double(i) - center;
    v[i - lo] = Scalar(norm * std::exp(-d * d * inv));
  }
  return v;
}

struct AxisWindow {
  Index lo = 0, hi = -1;
};

inline AxisWindow axis_window(double center, double radius, Index extent) {
  AxisWindow w;
  w.lo = std::max<Index>(0, Index(std::ceil(center - radius)));
  w.hi = std::min<Index>(extent - 1, Index(std::floor(center + radius)));
  return w;
}

}  // namespace detail

/// Normalized 2D Gaussian centered at row m1, column m2: entry (x, y) is
/// exp(-((x-m1)^2 + (y-m2)^2) / (2 sigma^2)) / (2 pi sigma^2), truncated to
/// exact zero outside a window of truncation_radius sigmas per axis.
template <typename Scalar>
Heatmap<Scalar> gaussian_kernel(double m1, double m2, double sigma, Index h, Index w,
                                double truncation_radius = 4.0) {
  if (!(sigma > 0.0)) throw InvalidParameterError("gaussian_kernel sigma must be positive");
  if (h < 1 || w < 1) throw InvalidInputError("gaussian_kernel needs a positive extent");
  Heatmap<Scalar> hm;
  hm.values = Mat<Scalar>::Zero(h, w);
  const double radius = truncation_radius * sigma;
  const auto rows = detail::axis_window(m1, radius, h);
  const auto cols = detail::axis_window(m2, radius, w);
  if (rows.lo > rows.hi || cols.lo > cols.hi) return hm;
  const Vec<Scalar> gr = detail::gauss_axis<Scalar>(m1, sigma, rows.lo, rows.hi);
  const Vec<Scalar> gc = detail::gauss_axis<Scalar>(m2, sigma, cols.lo, cols.hi);
  hm.values.block(rows.lo, cols.lo, gr.size(), gc.size()) = gr * gc.transpose();
  return hm;
}

/// Splats every cell of the low-resolution map as a unit-mass Gaussian at
/// that cell's center: H' = sum_d d * G2(c1(d), c2(d), sigma). Output is
/// (map_rows * stride_rows) x (map_cols * stride_cols).
template <typename Scalar>
Heatmap<Scalar> upsample_heatmap(const ReceptiveFieldMap<Scalar>& map, const FieldGeometry& g,
                                 const HeatmapConfig& cfg) {
  validate_heatmap_config(cfg);
  if (map.values.rows() != g.map_rows || map.values.cols() != g.map_cols ||
      Index(g.row_centers.size()) != g.map_rows || Index(g.col_centers.size()) != g.map_cols) {
    throw InvalidInputError("receptive-field map does not match the field geometry");
  }
  const Index h = g.map_rows * g.stride_rows;
  const Index w = g.map_cols * g.stride_cols;
  Heatmap<Scalar> hm;
  hm.image_id = map.image_id;
  hm.values = Mat<Scalar>::Zero(h, w);
  const double radius = cfg.truncation_radius * cfg.sigma;
  for (Index i = 0; i < g.map_rows; ++i) {
    const auto rows = detail::axis_window(g.row_centers[std::size_t(i)], radius, h);
    if (rows.lo > rows.hi) continue;
    const Vec<Scalar> gr =
        detail::gauss_axis<Scalar>(g.row_centers[std::size_t(i)], cfg.sigma, rows.lo, rows.hi);
    for (Index j = 0; j < g.map_cols; ++j) {
      const Scalar d = map.values(i, j);
      if (d == Scalar(0)) continue;
      const auto cols = detail::axis_window(g.col_centers[std::size_t(j)], radius, w);
      if (cols.lo > cols.hi) continue;
      const Vec<Scalar> gc =
          detail::gauss_axis<Scalar>(g.col_centers[std::size_t(j)], cfg.sigma, cols.lo, cols.hi);
      hm.values.block(rows.lo, cols.lo, gr.size(), gc.size()) += d * gr * gc.transpose();
    }
  }
  return hm;
}

/// Maps the raw heatmap into display range [v_lo, v_lo + q * (max - v_lo)]
/// and clamps to [0, 1]; a constant input yields all zeros.
template <typename Scalar>
Heatmap<Scalar> display_normalize(const Heatmap<Scalar>& hm, const HeatmapConfig& cfg) {
  validate_heatmap_config(cfg);
  if (hm.values.size() == 0) throw InvalidInputError("display_normalize on an empty heatmap");
  if (!hm.values.allFinite()) throw InvalidInputError("display_normalize needs finite values");
  Heatmap<Scalar> out;
  out.image_id = hm.image_id;
  const Scalar v_lo = hm.values.minCoeff();
  const Scalar span = hm.values.maxCoeff() - v_lo;
  if (span == Scalar(0)) {
    out.values = Mat<Scalar>::Zero(hm.values.rows(), hm.values.cols());
    return out;
  }
  const Scalar window = Scalar(cfg.display_quantile) * span;
  out.values = ((hm.values.array() - v_lo) / window).cwiseMin(Scalar(1)).cwiseMax(Scalar(0));
  return out;
}

}  // namespace fcdd
