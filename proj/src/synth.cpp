#include "fcdd/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fcdd/data/image_io.hpp"
#include "fcdd/util/errors.hpp"
#include "fcdd/util/rng.hpp"

namespace fs = std::filesystem;

namespace fcdd {

namespace {

constexpr std::uint64_t kBackgroundTag = 0xb0'0000'0000ull;
constexpr std::uint64_t kDefectTag = 0xde'0000'0000ull;

void validate(const SynthParams& p) {
  if (p.n_normal < 0 || p.n_anomalous < 0) {
    throw InvalidParameterError("synth counts must be nonnegative");
  }
  if (p.image_size < 32) throw InvalidParameterError("synth image size must be at least 32");
  if (p.texture_cells < 1) throw InvalidParameterError("texture_cells must be positive");
  if (!(p.defect_contrast > 0.0)) throw InvalidParameterError("defect_contrast must be positive");
  if (p.defect_kind != "line" && p.defect_kind != "blob") {
    throw InvalidParameterError("defect_kind must be \"line\" or \"blob\"");
  }
  if (p.line_width < 1) throw InvalidParameterError("line_width must be positive");
}

Mat<float> background(const SynthParams& p, std::uint64_t tag) {
  Rng rng = Rng::derived(p.seed, tag);
  const Index cells = p.texture_cells;
  const Index nodes = cells + 1;
  // Coarse luminance field with a faint per-channel tint.
  std::vector<std::array<double, 3>> grid(std::size_t(nodes * nodes));
  for (auto& node : grid) {
    const double lum = 0.40 + 0.35 * rng.uniform();
    for (int c = 0; c < 3; ++c) {
      node[std::size_t(c)] = std::clamp(lum + 0.04 * (rng.uniform() - 0.5), 0.0, 1.0);
    }
  }
  const Index size = p.image_size;
  Mat<float> img(size * size, 3);
  const double scale = double(cells) / double(size);
  for (Index y = 0; y < size; ++y) {
    const double gy = (double(y) + 0.5) * scale - 0.5;
    const double cy = std::clamp(gy, 0.0, double(cells));
    const Index y0 = std::min(Index(cy), cells - 1);
    const double wy = cy - double(y0);
    for (Index x = 0; x < size; ++x) {
      const double gx = (double(x) + 0.5) * scale - 0.5;
      const double cx = std::clamp(gx, 0.0, double(cells));
      const Index x0 = std::min(Index(cx), cells - 1);
      const double wx = cx - double(x0);
      const double grain = 0.02 * (rng.uniform() - 0.5);
      for (Index c = 0; c < 3; ++c) {
        const double v00 = grid[std::size_t(y0 * nodes + x0)][std::size_t(c)];
        const double v01 = grid[std::size_t(y0 * nodes + x0 + 1)][std::size_t(c)];
        const double v10 = grid[std::size_t((y0 + 1) * nodes + x0)][std::size_t(c)];
        const double v11 = grid[std::size_t((y0 + 1) * nodes + x0 + 1)][std::size_t(c)];
        const double top = (1.0 - wx) * v00 + wx * v01;
        const double bot = (1.0 - wx) * v10 + wx * v11;
        img(y * size + x, c) = float(std::clamp((1.0 - wy) * top + wy * bot + grain, 0.0, 1.0));
      }
    }
  }
  return img;
}

/// Multiplicative darkening by contrast * mask, mask in [0, 1] with a one
/// pixel soft edge.
void darken(Mat<float>& img, Index size, double contrast, Index x, Index y, double mask) {
  if (mask <= 0.0) return;
  const double factor = std::max(0.0, 1.0 - contrast * mask);
  for (Index c = 0; c < 3; ++c) {
    img(y * size + x, c) = float(img(y * size + x, c) * factor);
  }
}

DefectBox draw_line(Mat<float>& img, const SynthParams& p, Rng& rng) {
  const Index size = p.image_size;
  const double margin = double(size) / 7.0;
  const double x0 = rng.uniform(margin, double(size) - margin);
  const double y0 = rng.uniform(margin, double(size) - margin);
  const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const double len = rng.uniform(0.18, 0.45) * double(size);
  double x1 = x0 + len * std::cos(angle);
  double y1 = y0 + len * std::sin(angle);
  x1 = std::clamp(x1, 4.0, double(size) - 5.0);
  y1 = std::clamp(y1, 4.0, double(size) - 5.0);
  const double half = double(p.line_width) / 2.0;

  const double lo_x = std::min(x0, x1) - half - 1.0, hi_x = std::max(x0, x1) + half + 1.0;
  const double lo_y = std::min(y0, y1) - half - 1.0, hi_y = std::max(y0, y1) + half + 1.0;
  DefectBox box;
  box.x0 = std::max<Index>(0, Index(std::floor(lo_x)));
  box.y0 = std::max<Index>(0, Index(std::floor(lo_y)));
  box.x1 = std::min<Index>(size, Index(std::ceil(hi_x)) + 1);
  box.y1 = std::min<Index>(size, Index(std::ceil(hi_y)) + 1);

  const double dx = x1 - x0, dy = y1 - y0;
  const double len2 = std::max(dx * dx + dy * dy, 1e-9);
  for (Index y = box.y0; y < box.y1; ++y) {
    for (Index x = box.x0; x < box.x1; ++x) {
      const double t = std::clamp(((double(x) - x0) * dx + (double(y) - y0) * dy) / len2, 0.0, 1.0);
      const double px = x0 + t * dx, py = y0 + t * dy;
      const double dist = std::hypot(double(x) - px, double(y) - py);
      const double mask = std::clamp(half + 0.5 - dist, 0.0, 1.0);
      darken(img, size, p.defect_contrast, x, y, mask);
    }
  }
  return box;
}

DefectBox draw_blob(Mat<float>& img, const SynthParams& p, Rng& rng) {
  const Index size = p.image_size;
  const double margin = double(size) / 6.0;
  const double cx = rng.uniform(margin, double(size) - margin);
  const double cy = rng.uniform(margin, double(size) - margin);
  const double radius = rng.uniform(0.045, 0.11) * double(size);

  DefectBox box;
  box.x0 = std::max<Index>(0, Index(std::floor(cx - radius - 2.0)));
  box.y0 = std::max<Index>(0, Index(std::floor(cy - radius - 2.0)));
  box.x1 = std::min<Index>(size, Index(std::ceil(cx + radius + 2.0)) + 1);
  box.y1 = std::min<Index>(size, Index(std::ceil(cy + radius + 2.0)) + 1);

  for (Index y = box.y0; y < box.y1; ++y) {
    for (Index x = box.x0; x < box.x1; ++x) {
      const double dist = std::hypot(double(x) - cx, double(y) - cy);
      const double mask = std::clamp(radius + 0.5 - dist, 0.0, 1.0);
      darken(img, size, p.defect_contrast, x, y, mask);
    }
  }
  return box;
}

}  // namespace

Mat<float> synth_normal_image(const SynthParams& p, Index index) {
  validate(p);
  return background(p, kBackgroundTag + std::uint64_t(index));
}

Mat<float> synth_anomalous_image(const SynthParams& p, Index index, DefectBox* box) {
  validate(p);
  Mat<float> img = background(p, kBackgroundTag + std::uint64_t(index));
  Rng rng = Rng::derived(p.seed, kDefectTag + std::uint64_t(index));
  const DefectBox b =
      p.defect_kind == "line" ? draw_line(img, p, rng) : draw_blob(img, p, rng);
  if (box != nullptr) *box = b;
  return img;
}

void synth_dataset(const SynthParams& p, const std::string& out_dir) {
  validate(p);
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "normal", ec);
  fs::create_directories(fs::path(out_dir) / "anomalous", ec);
  if (ec) throw FileWriteError("cannot create dataset directories under " + out_dir);

  char name[64];
  for (Index i = 0; i < p.n_normal; ++i) {
    std::snprintf(name, sizeof(name), "normal/normal_%04lld.png", (long long)i);
    const Mat<float> img = synth_normal_image(p, i);
    save_png((fs::path(out_dir) / name).string(), to_image_u8(img, p.image_size, p.image_size));
  }
  std::ofstream boxes_out(fs::path(out_dir) / "defects.tsv");
  if (!boxes_out) throw FileWriteError("cannot write defects.tsv under " + out_dir);
  boxes_out << "path\tx0\ty0\tx1\ty1\n";
  for (Index i = 0; i < p.n_anomalous; ++i) {
    std::snprintf(name, sizeof(name), "anomalous/anomalous_%04lld.png", (long long)i);
    DefectBox box;
    const Mat<float> img = synth_anomalous_image(p, i, &box);
    save_png((fs::path(out_dir) / name).string(), to_image_u8(img, p.image_size, p.image_size));
    boxes_out << name << '\t' << box.x0 << '\t' << box.y0 << '\t' << box.x1 << '\t' << box.y1
              << '\n';
  }
  boxes_out.close();
  if (!boxes_out) throw FileWriteError("failed writing defects.tsv under " + out_dir);
}

std::vector<std::pair<std::string, DefectBox>> load_defect_boxes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open defect table " + path);
  std::string line;
  if (!std::getline(in, line) || line != "path\tx0\ty0\tx1\ty1") {
    throw InvalidInputError("defect table " + path + " has an unexpected header");
  }
  std::vector<std::pair<std::string, DefectBox>> boxes;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string file;
    DefectBox b;
    if (!(std::getline(ss, file, '\t') && ss >> b.x0 && ss.ignore(1) && ss >> b.y0 &&
          ss.ignore(1) && ss >> b.x1 && ss.ignore(1) && ss >> b.y1)) {
      throw InvalidInputError("defect table " + path + " is malformed");
    }
    boxes.emplace_back(std::move(file), b);
  }
  return boxes;
}

}  // namespace fcdd
