#pragma once

#include <cstring>

#include "fcdd/core/types.hpp"
#include "fcdd/net/spec.hpp"

namespace fcdd::net {

/// Activations are (H*W) x C matrices: one column per channel, each column a
/// row-major raster, pixel (y, x) at index y*W + x. The helpers below keep
/// that layout on both sides.

struct ConvGeom {
  Index h = 0, w = 0;          // source raster
  Index out_h = 0, out_w = 0;  // destination raster
  int kernel = 1;
  int stride = 1;
  Index pad_top = 0, pad_left = 0;

  static ConvGeom from(const Shape3& src, const LayerSpec& layer) {
    const auto ph = detail::pad_for(src.h, layer.kernel, layer.stride, layer.padding);
    const auto pw = detail::pad_for(src.w, layer.kernel, layer.stride, layer.padding);
    return {src.h, src.w, ph.out, pw.out, layer.kernel, layer.stride, ph.before, pw.before};
  }
};

/// Gathers k*k patches into a (out_h*out_w) x (k*k*C) matrix. Column
/// (ky*k + kx)*C + ci holds, for every output position, the source value at
/// channel ci and offset (ky, kx); out-of-range taps read as zero.
template <typename Scalar>
void im2col(const Mat<Scalar>& src, const ConvGeom& g, Mat<Scalar>& cols) {
  const Index channels = src.cols();
  cols.resize(g.out_h * g.out_w, Index(g.kernel) * g.kernel * channels);
  for (int ky = 0; ky < g.kernel; ++ky) {
    for (int kx = 0; kx < g.kernel; ++kx) {
      for (Index ci = 0; ci < channels; ++ci) {
        const Index q = (Index(ky) * g.kernel + kx) * channels + ci;
        Scalar* dst = cols.col(q).data();
        const Scalar* plane = src.col(ci).data();
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy * g.stride + ky - g.pad_top;
          Scalar* drow = dst + oy * g.out_w;
          if (iy < 0 || iy >= g.h) {
            std::memset(drow, 0, std::size_t(g.out_w) * sizeof(Scalar));
            continue;
          }
          const Scalar* srow = plane + iy * g.w;
          if (g.stride == 1) {
            // valid ox range: 0 <= ox + kx - pad_left < w
            const Index lo = std::max<Index>(0, g.pad_left - kx);
            const Index hi = std::min<Index>(g.out_w, g.w + g.pad_left - kx);
            if (lo > 0) std::memset(drow, 0, std::size_t(lo) * sizeof(Scalar));
            if (hi > lo) {
              std::memcpy(drow + lo, srow + lo + kx - g.pad_left,
                          std::size_t(hi - lo) * sizeof(Scalar));
            }
            if (hi < g.out_w) {
              std::memset(drow + std::max<Index>(hi, 0), 0,
                          std::size_t(g.out_w - std::max<Index>(hi, 0)) * sizeof(Scalar));
            }
          } else {
            for (Index ox = 0; ox < g.out_w; ++ox) {
              const Index ix = ox * g.stride + kx - g.pad_left;
              drow[ox] = (ix >= 0 && ix < g.w) ? srow[ix] : Scalar(0);
            }
          }
        }
      }
    }
  }
}

/// Transpose of im2col: scatter-adds patch gradients back onto the source
/// raster. Overlapping taps accumulate; dst must be presized and zeroed by
/// the caller when starting a fresh gradient.
template <typename Scalar>
void col2im_add(const Mat<Scalar>& cols, const ConvGeom& g, Mat<Scalar>& dst) {
  const Index channels = dst.cols();
  for (int ky = 0; ky < g.kernel; ++ky) {
    for (int kx = 0; kx < g.kernel; ++kx) {
      for (Index ci = 0; ci < channels; ++ci) {
        const Index q = (Index(ky) * g.kernel + kx) * channels + ci;
        const Scalar* srcp = cols.col(q).data();
        Scalar* plane = dst.col(ci).data();
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy * g.stride + ky - g.pad_top;
          if (iy < 0 || iy >= g.h) continue;
          const Scalar* srow = srcp + oy * g.out_w;
          Scalar* drow = plane + iy * g.w;
          for (Index ox = 0; ox < g.out_w; ++ox) {
            const Index ix = ox * g.stride + kx - g.pad_left;
            if (ix >= 0 && ix < g.w) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

using ArgmaxMat = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>;

/// Max pooling; argmax records the winning source raster index per output
/// cell and channel for the backward scatter. Windows always intersect the
/// raster under the supported paddings.
template <typename Scalar>
void maxpool_forward(const Mat<Scalar>& src, const ConvGeom& g, Mat<Scalar>& dst,
                     ArgmaxMat* argmax) {
  const Index channels = src.cols();
  dst.resize(g.out_h * g.out_w, channels);
  if (argmax != nullptr) argmax->resize(g.out_h * g.out_w, channels);
  for (Index ci = 0; ci < channels; ++ci) {
    const Scalar* plane = src.col(ci).data();
    for (Index oy = 0; oy < g.out_h; ++oy) {
      const Index y0 = std::max<Index>(oy * g.stride - g.pad_top, 0);
      const Index y1 = std::min<Index>(oy * g.stride - g.pad_top + g.kernel, g.h);
      for (Index ox = 0; ox < g.out_w; ++ox) {
        const Index x0 = std::max<Index>(ox * g.stride - g.pad_left, 0);
        const Index x1 = std::min<Index>(ox * g.stride - g.pad_left + g.kernel, g.w);
        Index best = y0 * g.w + x0;
        Scalar best_v = plane[best];
        for (Index iy = y0; iy < y1; ++iy) {
          for (Index ix = x0; ix < x1; ++ix) {
            const Index at = iy * g.w + ix;
            if (plane[at] > best_v) {
              best_v = plane[at];
              best = at;
            }
          }
        }
        dst(oy * g.out_w + ox, ci) = best_v;
        if (argmax != nullptr) (*argmax)(oy * g.out_w + ox, ci) = best;
      }
    }
  }
}

template <typename Scalar>
void maxpool_backward(const Mat<Scalar>& grad_out, const ArgmaxMat& argmax, Mat<Scalar>& grad_src) {
  for (Index ci = 0; ci < grad_out.cols(); ++ci) {
    for (Index o = 0; o < grad_out.rows(); ++o) {
      grad_src(argmax(o, ci), ci) += grad_out(o, ci);
    }
  }
}

/// Average pooling over the in-bounds part of each window, so border cells
/// divide by their true coverage.
template <typename Scalar>
void avgpool_forward(const Mat<Scalar>& src, const ConvGeom& g, Mat<Scalar>& dst) {
  const Index channels = src.cols();
  dst.resize(g.out_h * g.out_w, channels);
  for (Index ci = 0; ci < channels; ++ci) {
    const Scalar* plane = src.col(ci).data();
    for (Index oy = 0; oy < g.out_h; ++oy) {
      const Index y0 = std::max<Index>(oy * g.stride - g.pad_top, 0);
      const Index y1 = std::min<Index>(oy * g.stride - g.pad_top + g.kernel, g.h);
      for (Index ox = 0; ox < g.out_w; ++ox) {
        const Index x0 = std::max<Index>(ox * g.stride - g.pad_left, 0);
        const Index x1 = std::min<Index>(ox * g.stride - g.pad_left + g.kernel, g.w);
        Scalar acc = 0;
        for (Index iy = y0; iy < y1; ++iy) {
          for (Index ix = x0; ix < x1; ++ix) acc += plane[iy * g.w + ix];
        }
        dst(oy * g.out_w + ox, ci) = acc / Scalar((y1 - y0) * (x1 - x0));
      }
    }
  }
}

template <typename Scalar>
void avgpool_backward(const Mat<Scalar>& grad_out, const ConvGeom& g, Mat<Scalar>& grad_src) {
  const Index channels = grad_out.cols();
  for (Index ci = 0; ci < channels; ++ci) {
    Scalar* plane = grad_src.col(ci).data();
    for (Index oy = 0; oy < g.out_h; ++oy) {
      const Index y0 = std::max<Index>(oy * g.stride - g.pad_top, 0);
      const Index y1 = std::min<Index>(oy * g.stride - g.pad_top + g.kernel, g.h);
      for (Index ox = 0; ox < g.out_w; ++ox) {
        const Index x0 = std::max<Index>(ox * g.stride - g.pad_left, 0);
        const Index x1 = std::min<Index>(ox * g.stride - g.pad_left + g.kernel, g.w);
        const Scalar share = grad_out(oy * g.out_w + ox, ci) / Scalar((y1 - y0) * (x1 - x0));
        for (Index iy = y0; iy < y1; ++iy) {
          for (Index ix = x0; ix < x1; ++ix) plane[iy * g.w + ix] += share;
        }
      }
    }
  }
}

}  // namespace fcdd::net
