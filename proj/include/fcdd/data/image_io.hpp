#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fcdd/core/types.hpp"

namespace fcdd {

/// Decoded 8-bit raster, interleaved channels, row-major. channels is 1 or 3.
struct ImageU8 {
  Index height = 0;
  Index width = 0;
  Index channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(Index y, Index x, Index c) const {
    return pixels[std::size_t((y * width + x) * channels + c)];
  }
};

/// PNG or JPEG by content sniffing, not extension. Decode problems raise
/// ImageLoadError naming the path.
ImageU8 load_image(const std::string& path);

void save_png(const std::string& path, const ImageU8& image);

/// Separable bilinear resample of an (h*w) x c activation matrix.
Mat<float> bilinear_resize(const Mat<float>& src, Index src_h, Index src_w, Index dst_h,
                           Index dst_w);

/// Decode, scale to [0, 1], replicate grayscale to 3 channels, and resize to
/// the target. Result is (target_h*target_w) x 3.
Mat<float> load_unit_image(const std::string& path, Index target_h, Index target_w);

/// Inverse of the unit scaling for rendering: clamps to [0, 1] and quantizes
/// round-to-nearest to 8 bits.
ImageU8 to_image_u8(const Mat<float>& values, Index height, Index width);

}  // namespace fcdd
