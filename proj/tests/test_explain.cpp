#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "fcdd/data/image_io.hpp"
#include "fcdd/explain/heatmap.hpp"
#include "fcdd/explain/render.hpp"
#include "fcdd/net/builders.hpp"
#include "fcdd/util/errors.hpp"
#include "fcdd/util/rng.hpp"

using namespace fcdd;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

FieldGeometry grid_geometry(Index u, Index v, Index stride) {
  FieldGeometry g;
  g.map_rows = u;
  g.map_cols = v;
  g.stride_rows = stride;
  g.stride_cols = stride;
  for (Index i = 0; i < u; ++i) g.row_centers.push_back((double(i) + 0.5) * double(stride));
  for (Index j = 0; j < v; ++j) g.col_centers.push_back((double(j) + 0.5) * double(stride));
  return g;
}

ReceptiveFieldMap<double> random_map(Index u, Index v, std::uint64_t seed) {
  ReceptiveFieldMap<double> m;
  m.values.resize(u, v);
  Rng rng(seed);
  for (Index i = 0; i < u; ++i) {
    for (Index j = 0; j < v; ++j) m.values(i, j) = rng.uniform(0.0, 3.0);
  }
  return m;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) : path(fs::path("explain_tmp") / tag) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string sub(const std::string& rel) const { return (path / rel).string(); }
};

}  // namespace

TEST_CASE("gaussian kernel hits the closed-form values") {
  const auto k = gaussian_kernel<double>(10.0, 10.0, 1.0, 21, 21);
  CHECK(k.values(10, 10) == doctest::Approx(1.0 / (2.0 * kPi)).epsilon(1e-12));
  CHECK(k.values(10, 10) == doctest::Approx(0.159155).epsilon(1e-5));
  const double off = std::exp(-0.5) / (2.0 * kPi);
  CHECK(k.values(11, 10) == doctest::Approx(off).epsilon(1e-12));
  CHECK(k.values(10, 11) == doctest::Approx(off).epsilon(1e-12));
  CHECK(k.values(9, 10) == doctest::Approx(0.096532).epsilon(1e-4));

  CHECK_THROWS_AS(gaussian_kernel<double>(0, 0, 0.0, 4, 4), InvalidParameterError);
  CHECK_THROWS_AS(gaussian_kernel<double>(0, 0, -1.0, 4, 4), InvalidParameterError);
}

TEST_CASE("gaussian kernel integrates to one on a wide grid") {
  const auto k = gaussian_kernel<double>(15.3, 14.2, 1.5, 31, 31);
  CHECK(k.values.sum() == doctest::Approx(1.0).epsilon(1e-3));

  // Row index follows m1, column index follows m2.
  Index argr = 0, argc = 0;
  k.values.maxCoeff(&argr, &argc);
  CHECK(argr == 15);
  CHECK(argc == 14);
}

TEST_CASE("gaussian kernel is exactly zero outside the truncation window") {
  const auto k = gaussian_kernel<double>(10.0, 10.0, 1.0, 21, 21, 4.0);
  CHECK(k.values(10, 14) > 0.0);
  CHECK(k.values(10, 16) == 0.0);
  CHECK(k.values(16, 16) == 0.0);
  CHECK(k.values(0, 0) == 0.0);
}

TEST_CASE("upsampling an all-zero map yields an all-zero heatmap") {
  const FieldGeometry g = grid_geometry(7, 5, 8);
  ReceptiveFieldMap<double> m;
  m.values = Mat<double>::Zero(7, 5);
  const HeatmapConfig cfg;
  const auto hm = upsample_heatmap(m, g, cfg);
  CHECK(hm.values.rows() == 56);
  CHECK(hm.values.cols() == 40);
  CHECK(hm.values.maxCoeff() == 0.0);
  CHECK(hm.values.minCoeff() == 0.0);
}

TEST_CASE("a single interior cell keeps its mass and lands on its center") {
  const FieldGeometry g = grid_geometry(28, 28, 8);
  ReceptiveFieldMap<double> m;
  m.values = Mat<double>::Zero(28, 28);
  m.values(13, 7) = 5.0;
  HeatmapConfig cfg;
  cfg.sigma = 2.0;
  const auto hm = upsample_heatmap(m, g, cfg);
  CHECK(hm.values.rows() == 224);
  CHECK(hm.values.cols() == 224);
  CHECK(hm.values.sum() == doctest::Approx(5.0).epsilon(1e-3));

  Index argr = 0, argc = 0;
  hm.values.maxCoeff(&argr, &argc);
  const double dr = double(argr) - g.row_centers[13];
  const double dc = double(argc) - g.col_centers[7];
  CHECK(std::abs(dr) <= 0.5 * double(g.stride_rows));
  CHECK(std::abs(dc) <= 0.5 * double(g.stride_cols));
  CHECK(hm.values.minCoeff() >= 0.0);
}

TEST_CASE("upsampling is linear in the map") {
  const FieldGeometry g = grid_geometry(7, 7, 8);
  HeatmapConfig cfg;
  cfg.sigma = 8.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    ReceptiveFieldMap<double> m1 = random_map(7, 7, 1000 + seed);
    ReceptiveFieldMap<double> m2 = random_map(7, 7, 2000 + seed);
    ReceptiveFieldMap<double> sum;
    sum.values = m1.values + m2.values;
    const Mat<double> lhs = upsample_heatmap(sum, g, cfg).values;
    const Mat<double> rhs = upsample_heatmap(m1, g, cfg).values + upsample_heatmap(m2, g, cfg).values;
    const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() / scale <= 1e-9);
  }
}

TEST_CASE("mass is preserved for interior-supported maps") {
  const FieldGeometry g = grid_geometry(28, 28, 8);
  HeatmapConfig cfg;  // sigma 8, truncation 4 -> 32 px span
  ReceptiveFieldMap<double> m;
  m.values = Mat<double>::Zero(28, 28);
  Rng rng(77);
  for (Index i = 4; i <= 23; ++i) {
    for (Index j = 4; j <= 23; ++j) m.values(i, j) = rng.uniform(0.0, 2.0);
  }
  const auto hm = upsample_heatmap(m, g, cfg);
  const double in_mass = m.values.sum();
  CHECK(hm.values.sum() == doctest::Approx(in_mass).epsilon(1e-3));
}

TEST_CASE("upsampling validates geometry and config") {
  const FieldGeometry g = grid_geometry(7, 7, 8);
  ReceptiveFieldMap<double> wrong;
  wrong.values = Mat<double>::Zero(5, 5);
  CHECK_THROWS_AS(upsample_heatmap(wrong, g, HeatmapConfig{}), InvalidInputError);

  ReceptiveFieldMap<double> ok;
  ok.values = Mat<double>::Zero(7, 7);
  HeatmapConfig bad;
  bad.sigma = 0.0;
  CHECK_THROWS_AS(upsample_heatmap(ok, g, bad), InvalidParameterError);
  bad = HeatmapConfig{};
  bad.display_quantile = 0.0;
  CHECK_THROWS_AS(upsample_heatmap(ok, g, bad), InvalidParameterError);
  bad = HeatmapConfig{};
  bad.truncation_radius = 2.0;
  CHECK_THROWS_AS(upsample_heatmap(ok, g, bad), InvalidParameterError);
  bad = HeatmapConfig{};
  bad.colormap = "viridis";
  CHECK_THROWS_AS(upsample_heatmap(ok, g, bad), InvalidParameterError);
}

TEST_CASE("display normalization follows the quantile window rule") {
  HeatmapConfig cfg;  // quantile 0.25
  Heatmap<double> hm;
  hm.values.resize(1, 6);
  hm.values << 0.0, 0.1, 0.2, 0.25, 0.3, 1.0;
  const auto out = display_normalize(hm, cfg);
  CHECK(out.values(0, 0) == 0.0);
  CHECK(out.values(0, 1) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(out.values(0, 2) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(out.values(0, 3) == 1.0);
  CHECK(out.values(0, 4) == 1.0);
  CHECK(out.values(0, 5) == 1.0);

  Heatmap<double> span26;
  span26.values.resize(1, 4);
  span26.values << 2.0, 2.5, 3.0, 6.0;
  const auto got = display_normalize(span26, cfg);
  CHECK(got.values(0, 0) == 0.0);
  CHECK(got.values(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(got.values(0, 2) == 1.0);
  CHECK(got.values(0, 3) == 1.0);
}

TEST_CASE("display normalization handles degenerate and transformed inputs") {
  HeatmapConfig cfg;
  Heatmap<double> flat;
  flat.values = Mat<double>::Constant(5, 4, 3.7);
  const auto zeros = display_normalize(flat, cfg);
  CHECK(zeros.values.minCoeff() == 0.0);
  CHECK(zeros.values.maxCoeff() == 0.0);

  Heatmap<double> hm;
  hm.values.resize(9, 11);
  Rng rng(5);
  for (Index i = 0; i < hm.values.size(); ++i) {
    hm.values(i / 11, i % 11) = rng.uniform(-2.0, 7.0);
  }
  const auto base = display_normalize(hm, cfg);
  CHECK(base.values.minCoeff() >= 0.0);
  CHECK(base.values.maxCoeff() <= 1.0);

  Heatmap<double> affine;
  affine.values = 2.7 * hm.values.array() - 1.3;
  const auto moved = display_normalize(affine, cfg);
  CHECK((moved.values - base.values).cwiseAbs().maxCoeff() <= 1e-12);

  Heatmap<double> empty;
  CHECK_THROWS_AS(display_normalize(empty, cfg), InvalidInputError);
  Heatmap<double> bad;
  bad.values = Mat<double>::Constant(2, 2, std::nan(""));
  CHECK_THROWS_AS(display_normalize(bad, cfg), InvalidInputError);
}

TEST_CASE("colormap endpoints and midpoints are pinned") {
  CHECK(colormap_rgb(0.0) == std::array<float, 3>{0.0f, 0.0f, 1.0f});
  CHECK(colormap_rgb(0.5) == std::array<float, 3>{1.0f, 1.0f, 0.0f});
  CHECK(colormap_rgb(1.0) == std::array<float, 3>{1.0f, 0.0f, 0.0f});
  CHECK(colormap_rgb(0.25) == std::array<float, 3>{0.5f, 0.5f, 0.5f});
  CHECK(colormap_rgb(0.75) == std::array<float, 3>{1.0f, 0.5f, 0.0f});
  CHECK(colormap_rgb(-3.0) == colormap_rgb(0.0));
  CHECK(colormap_rgb(4.0) == colormap_rgb(1.0));

  float last_r = 0.0f, last_b = 1.0f;
  for (int i = 0; i <= 100; ++i) {
    const auto c = colormap_rgb(i / 100.0);
    CHECK(c[0] >= last_r);
    CHECK(c[2] <= last_b);
    last_r = c[0];
    last_b = c[2];
  }
}

TEST_CASE("rendered heatmaps honor the colormap and blend rule") {
  TempDir dir("render");
  const HeatmapConfig cfg;

  Heatmap<float> hm;
  hm.values = Mat<float>::Zero(4, 5);
  hm.values(2, 3) = 1.0f;
  render_heatmap_image(hm, cfg, dir.sub("plain.png"));
  const ImageU8 img = load_image(dir.sub("plain.png"));
  REQUIRE(img.height == 4);
  REQUIRE(img.width == 5);
  REQUIRE(img.channels == 3);
  CHECK(int(img.at(0, 0, 0)) == 0);
  CHECK(int(img.at(0, 0, 1)) == 0);
  CHECK(int(img.at(0, 0, 2)) == 255);
  CHECK(int(img.at(2, 3, 0)) == 255);
  CHECK(int(img.at(2, 3, 1)) == 0);
  CHECK(int(img.at(2, 3, 2)) == 0);

  const Mat<float> black = Mat<float>::Zero(20, 3);
  render_heatmap_image(hm, cfg, dir.sub("blend.png"), &black);
  const ImageU8 mixed = load_image(dir.sub("blend.png"));
  CHECK(int(mixed.at(0, 0, 2)) == 128);
  CHECK(int(mixed.at(0, 0, 0)) == 0);
  CHECK(int(mixed.at(2, 3, 0)) == 128);
  CHECK(int(mixed.at(2, 3, 2)) == 0);

  const Mat<float> wrong = Mat<float>::Zero(6, 3);
  CHECK_THROWS_AS(render_heatmap_image(hm, cfg, dir.sub("bad.png"), &wrong), InvalidInputError);
}

TEST_CASE("the full-size pipeline geometry feeds the renderer") {
  const auto spec = backbone_spec("cnn27");
  const FieldGeometry g = receptive_geometry(spec);
  ReceptiveFieldMap<float> m;
  m.values = Mat<float>::Constant(g.map_rows, g.map_cols, 0.25f);
  m.values(10, 20) = 4.0f;
  HeatmapConfig cfg;
  const auto hm = upsample_heatmap(m, g, cfg);
  CHECK(hm.values.rows() == 224);
  CHECK(hm.values.cols() == 224);
  CHECK(hm.values.allFinite());
  CHECK(hm.values.minCoeff() >= 0.0f);

  Index argr = 0, argc = 0;
  hm.values.maxCoeff(&argr, &argc);
  CHECK(std::abs(double(argr) - g.row_centers[10]) <= 4.0);
  CHECK(std::abs(double(argc) - g.col_centers[20]) <= 4.0);

  TempDir dir("full");
  render_heatmap_image({display_normalize(hm, cfg).values, hm.image_id}, cfg, dir.sub("hm.png"));
  const ImageU8 img = load_image(dir.sub("hm.png"));
  CHECK(img.height == 224);
  CHECK(img.width == 224);
}

TEST_CASE("score histogram bins match the published arithmetic") {
  const ScoreHistogram h = score_histogram({0.0, 1.0, 2.0, 3.0}, {0, 0, 0, 0}, 2);
  REQUIRE(h.edges.size() == 3);
  CHECK(h.edges[0] == 0.0);
  CHECK(h.edges[1] == 1.5);
  CHECK(h.edges[2] == 3.0);
  CHECK(h.count_normal == std::vector<Index>{2, 2});
  CHECK(h.count_anomalous == std::vector<Index>{0, 0});

  const ScoreHistogram single = score_histogram({5.0}, {1}, 1);
  REQUIRE(single.edges.size() == 2);
  CHECK(single.edges[0] == 5.0);
  CHECK(single.edges[1] > single.edges[0]);
  CHECK(single.count_anomalous == std::vector<Index>{1});

  // The maximum itself lands in the last (right-closed) bin.
  const ScoreHistogram closed = score_histogram({0.0, 0.5, 1.0}, {0, 0, 0}, 2);
  CHECK(closed.count_normal == std::vector<Index>{1, 2});
}

TEST_CASE("score histogram conserves per-class counts") {
  Rng rng(31);
  std::vector<double> scores;
  std::vector<int> labels;
  Index want_normal = 0, want_anomalous = 0;
  for (int i = 0; i < 200; ++i) {
    scores.push_back(rng.normal() * 3.0 + 1.0);
    labels.push_back(int(rng.below(2)));
    (labels.back() == 1 ? want_anomalous : want_normal) += 1;
  }
  const ScoreHistogram h = score_histogram(scores, labels, 7);
  Index got_normal = 0, got_anomalous = 0;
  for (std::size_t b = 0; b < h.count_normal.size(); ++b) {
    got_normal += h.count_normal[b];
    got_anomalous += h.count_anomalous[b];
  }
  CHECK(got_normal == want_normal);
  CHECK(got_anomalous == want_anomalous);
  for (std::size_t b = 1; b < h.edges.size(); ++b) CHECK(h.edges[b] > h.edges[b - 1]);

  CHECK_THROWS_AS(score_histogram({}, {}, 3), InvalidInputError);
  CHECK_THROWS_AS(score_histogram({1.0}, {0, 1}, 3), InvalidInputError);
  CHECK_THROWS_AS(score_histogram({1.0}, {0}, 0), InvalidParameterError);
}

TEST_CASE("histogram files carry the four documented columns") {
  TempDir dir("hist");
  const ScoreHistogram h = score_histogram({0.0, 1.0, 2.0, 4.0}, {0, 1, 0, 1}, 2);
  save_histogram(dir.sub("histogram.tsv"), h);
  std::ifstream in(dir.sub("histogram.tsv"));
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "bin_lo\tbin_hi\tcount_normal\tcount_anomalous");
  int rows = 0;
  Index normal = 0, anomalous = 0;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    double lo = 0, hi = 0;
    Index n = 0, a = 0;
    REQUIRE((ss >> lo >> hi >> n >> a));
    ++rows;
    normal += n;
    anomalous += a;
  }
  CHECK(rows == 2);
  CHECK(normal == 2);
  CHECK(anomalous == 2);
}
