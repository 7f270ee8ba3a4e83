#include "fcdd/data/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include <jpeglib.h>
#include <png.h>

#include "fcdd/util/errors.hpp"

namespace fcdd {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

ImageU8 load_png_file(FILE* fp, const std::string& path) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageLoadError("png decoder setup failed for " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageLoadError("corrupt png: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  // Normalize everything to 8-bit gray or rgb.
  png_set_expand(png);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  png_set_strip_alpha(png);
  const png_byte color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  png_read_update_info(png, info);

  ImageU8 img;
  img.height = Index(png_get_image_height(png, info));
  img.width = Index(png_get_image_width(png, info));
  img.channels = Index(png_get_channels(png, info));
  if (img.channels != 1 && img.channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageLoadError("unsupported png channel count in " + path);
  }
  img.pixels.resize(std::size_t(img.height * img.width * img.channels));
  std::vector<png_bytep> rows(std::size_t(img.height));
  const std::size_t stride = std::size_t(img.width * img.channels);
  for (Index y = 0; y < img.height; ++y) {
    rows[std::size_t(y)] = img.pixels.data() + std::size_t(y) * stride;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(mgr->jump, 1);
}

ImageU8 load_jpeg_file(FILE* fp, const std::string& path) {
  jpeg_decompress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw ImageLoadError("corrupt jpeg: " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);

  ImageU8 img;
  img.height = Index(cinfo.output_height);
  img.width = Index(cinfo.output_width);
  img.channels = Index(cinfo.output_components);
  img.pixels.resize(std::size_t(img.height * img.width * img.channels));
  const std::size_t stride = std::size_t(img.width * img.channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.pixels.data() + std::size_t(cinfo.output_scanline) * stride;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

}  // namespace

ImageU8 load_image(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (fp == nullptr) throw ImageLoadError("cannot open image " + path);
  unsigned char sig[8] = {};
  const std::size_t got = std::fread(sig, 1, sizeof(sig), fp.get());
  std::rewind(fp.get());
  if (got >= 8 && png_sig_cmp(sig, 0, 8) == 0) {
    return load_png_file(fp.get(), path);
  }
  if (got >= 2 && sig[0] == 0xFF && sig[1] == 0xD8) {
    return load_jpeg_file(fp.get(), path);
  }
  throw ImageLoadError("unrecognized image format in " + path);
}

void save_png(const std::string& path, const ImageU8& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw InvalidInputError("save_png expects 1 or 3 channels");
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (fp == nullptr) throw FileWriteError("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    throw FileWriteError("png encoder setup failed for " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FileWriteError("png write failed for " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, png_uint_32(image.width), png_uint_32(image.height), 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = std::size_t(image.width * image.channels);
  for (Index y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() + std::size_t(y) * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Mat<float> bilinear_resize(const Mat<float>& src, Index src_h, Index src_w, Index dst_h,
                           Index dst_w) {
  if (src.rows() != src_h * src_w || src_h < 1 || src_w < 1 || dst_h < 1 || dst_w < 1) {
    throw InvalidInputError("bilinear_resize shape mismatch");
  }
  if (src_h == dst_h && src_w == dst_w) return src;
  const Index channels = src.cols();
  Mat<float> dst(dst_h * dst_w, channels);
  const double sy = double(src_h) / double(dst_h);
  const double sx = double(src_w) / double(dst_w);
  for (Index y = 0; y < dst_h; ++y) {
    // Pixel centers align: target center (y+0.5) maps to source coordinate.
    const double fy = std::clamp((double(y) + 0.5) * sy - 0.5, 0.0, double(src_h - 1));
    const Index y0 = Index(fy);
    const Index y1 = std::min(y0 + 1, src_h - 1);
    const float wy = float(fy - double(y0));
    for (Index x = 0; x < dst_w; ++x) {
      const double fx = std::clamp((double(x) + 0.5) * sx - 0.5, 0.0, double(src_w - 1));
      const Index x0 = Index(fx);
      const Index x1 = std::min(x0 + 1, src_w - 1);
      const float wx = float(fx - double(x0));
      for (Index c = 0; c < channels; ++c) {
        const float top = (1.0f - wx) * src(y0 * src_w + x0, c) + wx * src(y0 * src_w + x1, c);
        const float bot = (1.0f - wx) * src(y1 * src_w + x0, c) + wx * src(y1 * src_w + x1, c);
        dst(y * dst_w + x, c) = (1.0f - wy) * top + wy * bot;
      }
    }
  }
  return dst;
}

Mat<float> load_unit_image(const std::string& path, Index target_h, Index target_w) {
  const ImageU8 img = load_image(path);
  Mat<float> unit(img.height * img.width, 3);
  const float inv = 1.0f / 255.0f;
  for (Index y = 0; y < img.height; ++y) {
    for (Index x = 0; x < img.width; ++x) {
      const Index r = y * img.width + x;
      if (img.channels == 1) {
        const float v = float(img.at(y, x, 0)) * inv;
        unit(r, 0) = v;
        unit(r, 1) = v;
        unit(r, 2) = v;
      } else {
        unit(r, 0) = float(img.at(y, x, 0)) * inv;
        unit(r, 1) = float(img.at(y, x, 1)) * inv;
        unit(r, 2) = float(img.at(y, x, 2)) * inv;
      }
    }
  }
  return bilinear_resize(unit, img.height, img.width, target_h, target_w);
}

ImageU8 to_image_u8(const Mat<float>& values, Index height, Index width) {
  if (values.rows() != height * width || (values.cols() != 1 && values.cols() != 3)) {
    throw InvalidInputError("to_image_u8 shape mismatch");
  }
  ImageU8 img;
  img.height = height;
  img.width = width;
  img.channels = values.cols();
  img.pixels.resize(std::size_t(height * width * img.channels));
  for (Index r = 0; r < values.rows(); ++r) {
    for (Index c = 0; c < img.channels; ++c) {
      const float v = std::clamp(values(r, c), 0.0f, 1.0f);
      img.pixels[std::size_t(r * img.channels + c)] =
          std::uint8_t(std::lround(double(v) * 255.0));
    }
  }
  return img;
}

}  // namespace fcdd
