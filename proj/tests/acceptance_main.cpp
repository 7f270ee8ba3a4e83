// End-to-end acceptance gate. Each numbered check prints exactly one
// PASS/FAIL line; the process exits 0 only if every check passed. The desk
// experiment (checks 6 through 8) trains real models and dominates the
// runtime.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fcdd/core/loss.hpp"
#include "fcdd/data/image_io.hpp"
#include "fcdd/data/manifest.hpp"
#include "fcdd/data/synth.hpp"
#include "fcdd/eval/evaluator.hpp"
#include "fcdd/explain/heatmap.hpp"
#include "fcdd/explain/render.hpp"
#include "fcdd/net/builders.hpp"
#include "fcdd/net/forward.hpp"
#include "fcdd/train/trainer.hpp"
#include "fcdd/util/rng.hpp"

using namespace fcdd;
namespace fs = std::filesystem;

namespace {

constexpr Index kDeskEpochs = 2;  // within the published 10-epoch cap
constexpr double kDeskAucBar = 0.95;
constexpr double kDeskRecallBar = 0.90;
constexpr int kDeskSeeds = 5;
constexpr int kDeskSeedsRequired = 4;
constexpr double kDeskBudgetSeconds = 30.0 * 60.0;

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << " - " << detail
            << std::endl;
}

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double value, int precision = 4) {
  std::ostringstream out;
  out.precision(precision);
  out << value;
  return out.str();
}

// --- criterion 1: analytic loss gradients against central differences ----

FeatureVolume<double> random_volume(Rng& rng, Index u, Index v, Index c) {
  FeatureVolume<double> fv;
  fv.rows_u = u;
  fv.cols_v = v;
  fv.values = Mat<double>::Zero(u * v, c);
  for (Index r = 0; r < fv.values.rows(); ++r) {
    for (Index col = 0; col < fv.values.cols(); ++col) {
      fv.values(r, col) = rng.normal();
    }
  }
  return fv;
}

void criterion_gradients() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(41);
  LabeledSampleBatch<double> batch;
  batch.features.push_back(random_volume(rng, 5, 5, 8));
  batch.features.push_back(random_volume(rng, 5, 5, 8));
  batch.labels = {0, 1};
  SVDDConfig<double> cfg;

  const std::vector<Mat<double>> analytic = loss_gradients(batch, cfg);
  int checked = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 128; ++trial) {
    const std::size_t s = rng.below(2);
    const Index r = Index(rng.below(std::uint64_t(batch.features[s].values.rows())));
    const Index c = Index(rng.below(std::uint64_t(batch.features[s].values.cols())));
    const double saved = batch.features[s].values(r, c);
    const double h = 1e-6 * std::max(1.0, std::abs(saved));
    batch.features[s].values(r, c) = saved + h;
    const double up = fcdd_spatial_loss(batch, cfg);
    batch.features[s].values(r, c) = saved - h;
    const double down = fcdd_spatial_loss(batch, cfg);
    batch.features[s].values(r, c) = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double exact = analytic[s](r, c);
    const double rel =
        std::abs(numeric - exact) / std::max(1e-12, std::max(std::abs(numeric), std::abs(exact)));
    worst = std::max(worst, rel);
    ++checked;
  }
  const double elapsed = seconds_since(start);
  report(1, checked >= 100 && worst < 1e-4 && elapsed < 60.0,
         std::to_string(checked) + " entries over both labels, worst relative error " +
             fmt(worst, 3) + ", " + fmt(elapsed, 3) + " s");
}

// --- criterion 2: closed-form loss values ---------------------------------

FeatureVolume<double> uniform_response_volume(Index u, Index v, double response) {
  // One channel with |z| chosen so the per-cell pseudo-Huber value is
  // exactly `response`.
  FeatureVolume<double> fv;
  fv.rows_u = u;
  fv.cols_v = v;
  const double z = std::sqrt((response + 1.0) * (response + 1.0) - 1.0);
  fv.values = Mat<double>::Constant(u * v, 1, z);
  return fv;
}

void criterion_loss_forms() {
  SVDDConfig<double> cfg;
  bool pass = true;
  std::string detail;

  {
    LabeledSampleBatch<double> batch;
    batch.features.push_back(uniform_response_volume(6, 7, 0.375));
    batch.labels = {0};
    const double loss = fcdd_spatial_loss(batch, cfg);
    pass = pass && std::abs(loss - 0.375) <= 1e-9;
    detail += "normal uniform 0.375 -> " + fmt(loss, 10);
  }
  {
    LabeledSampleBatch<double> batch;
    batch.features.push_back(uniform_response_volume(4, 4, std::log(2.0)));
    batch.labels = {1};
    const double loss = fcdd_spatial_loss(batch, cfg);
    pass = pass && std::abs(loss - std::log(2.0)) <= 1e-9;
    detail += ", anomalous mean ln2 -> " + fmt(loss, 10);
  }
  {
    LabeledSampleBatch<double> batch;
    batch.features.push_back(uniform_response_volume(4, 4, 0.0));
    batch.labels = {1};
    const double loss = fcdd_spatial_loss(batch, cfg);
    pass = pass && std::isfinite(loss);
    detail += ", anomalous zero map finite (" + fmt(loss, 4) + ")";
  }
  report(2, pass, detail);
}

// --- criterion 3: Gaussian upsampling fidelity -----------------------------

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

void criterion_upsampling() {
  const auto start = std::chrono::steady_clock::now();
  const FieldGeometry g = grid_geometry(8, 8, 8);
  HeatmapConfig cfg;
  cfg.sigma = 2.0;

  ReceptiveFieldMap<double> map;
  map.values = Mat<double>::Zero(8, 8);
  map.values(3, 4) = 5.0;
  const Heatmap<double> hm = upsample_heatmap(map, g, cfg);
  const double mass = hm.values.sum();
  const bool mass_ok = std::abs(mass - 5.0) <= 0.005 * 5.0;

  Index arg_r = 0, arg_c = 0;
  hm.values.maxCoeff(&arg_r, &arg_c);
  const double center_r = g.row_centers[3];
  const double center_c = g.col_centers[4];
  const bool argmax_ok = std::abs(double(arg_r) - center_r) <= 4.0 &&
                         std::abs(double(arg_c) - center_c) <= 4.0;

  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    ReceptiveFieldMap<double> a, b;
    a.values = Mat<double>::Zero(8, 8);
    b.values = Mat<double>::Zero(8, 8);
    for (Index i = 0; i < 8; ++i) {
      for (Index j = 0; j < 8; ++j) {
        a.values(i, j) = rng.uniform();
        b.values(i, j) = rng.uniform();
      }
    }
    const double alpha = rng.uniform(-2.0, 2.0);
    const double beta = rng.uniform(-2.0, 2.0);
    ReceptiveFieldMap<double> mix;
    mix.values = alpha * a.values + beta * b.values;
    const Mat<double> left = upsample_heatmap(mix, g, cfg).values;
    const Mat<double> right =
        alpha * upsample_heatmap(a, g, cfg).values + beta * upsample_heatmap(b, g, cfg).values;
    const double denom = std::max(1e-12, right.cwiseAbs().maxCoeff());
    worst = std::max(worst, (left - right).cwiseAbs().maxCoeff() / denom);
  }
  const bool linear_ok = worst <= 1e-9;
  const double elapsed = seconds_since(start);
  report(3, mass_ok && argmax_ok && linear_ok && elapsed < 60.0,
         "mass " + fmt(mass, 6) + " of 5, argmax (" + std::to_string(arg_r) + "," +
             std::to_string(arg_c) + ") vs center (" + fmt(center_r, 3) + "," + fmt(center_c, 3) +
             "), linearity worst " + fmt(worst, 3) + ", " + fmt(elapsed, 3) + " s");
}

// --- criterion 4: CNN27 architecture conformance ---------------------------

void criterion_architecture() {
  const BackboneSpec spec = backbone_spec("cnn27");
  const std::vector<Shape3> shapes = infer_shapes(spec);
  std::map<std::string, Shape3> by_name;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) by_name[spec.layers[i].name] = shapes[i];

  const std::vector<std::pair<std::string, Shape3>> plan{
      {"relu1", {224, 224, 64}}, {"pool1", {112, 112, 64}}, {"relu2", {112, 112, 128}},
      {"pool2", {56, 56, 128}},  {"relu3", {56, 56, 256}},  {"relu4", {56, 56, 256}},
      {"pool3", {28, 28, 256}},  {"relu5", {28, 28, 512}},  {"relu6", {28, 28, 512}},
      {"relu7", {28, 28, 512}},  {"conv8", {28, 28, 512}},
  };
  bool shapes_ok = true;
  for (const auto& [name, want] : plan) {
    shapes_ok = shapes_ok && by_name.count(name) > 0 && by_name[name] == want;
  }

  const ParamCountReport params = param_count(spec);
  std::map<std::string, std::int64_t> counts(params.per_layer.begin(), params.per_layer.end());
  const bool pinned_ok = counts["conv1"] == 1'792 && counts["conv2"] == 73'856 &&
                         counts["conv3"] == 295'168 && counts["conv5"] == 1'180'160;
  // The published running total (4.4M) is not reproducible from the layer
  // plan; the formula-derived total is the normative one here.
  const bool total_ok = params.total == 7'127'808;

  report(4, shapes_ok && pinned_ok && total_ok,
         std::string("shape plan ") + (shapes_ok ? "ok" : "bad") + ", conv1/2/3/5 counts " +
             (pinned_ok ? "ok" : "bad") + ", formula total " + std::to_string(params.total));
}

// --- criterion 5: metric oracles -------------------------------------------

std::vector<ScoreRecord> random_records(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<ScoreRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].id = "r" + std::to_string(i);
    out[i].score = double(rng.below(33)) / 8.0;
    out[i].label = int(rng.below(2));
  }
  out[0].label = 0;
  out[1].label = 1;
  return out;
}

double brute_force_auc(const std::vector<ScoreRecord>& records) {
  std::int64_t wins = 0, ties = 0, pairs = 0;
  for (const ScoreRecord& a : records) {
    if (a.label != 1) continue;
    for (const ScoreRecord& n : records) {
      if (n.label != 0) continue;
      ++pairs;
      if (a.score > n.score) ++wins;
      if (a.score == n.score) ++ties;
    }
  }
  return (double(wins) + 0.5 * double(ties)) / double(pairs);
}

double exhaustive_best_threshold(const std::vector<ScoreRecord>& records) {
  std::vector<double> distinct;
  for (const ScoreRecord& r : records) distinct.push_back(r.score);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<double> candidates{-std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
    candidates.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  }
  candidates.push_back(std::numeric_limits<double>::infinity());
  double best = candidates.front();
  double best_f1 = -1.0;
  for (const double t : candidates) {
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (const ScoreRecord& r : records) {
      const bool positive = r.score >= t;
      if (r.label == 1 && positive) ++tp;
      if (r.label == 0 && positive) ++fp;
      if (r.label == 1 && !positive) ++fn;
    }
    const std::int64_t denom = 2 * tp + fp + fn;
    const double f1 = denom == 0 ? 0.0 : 2.0 * double(tp) / double(denom);
    if (f1 > best_f1) {
      best_f1 = f1;
      best = t;
    }
  }
  return best;
}

void criterion_metric_oracles() {
  const auto start = std::chrono::steady_clock::now();
  int auc_matches = 0;
  int threshold_matches = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto records = random_records(seed, 200);
    if (roc_auc(records) == brute_force_auc(records)) ++auc_matches;
    const auto calibration = random_records(1000 + seed, 120);
    if (calibrate_threshold(calibration) == exhaustive_best_threshold(calibration)) {
      ++threshold_matches;
    }
  }
  const double elapsed = seconds_since(start);
  report(5, auc_matches == 20 && threshold_matches == 20 && elapsed < 60.0,
         "auc oracle " + std::to_string(auc_matches) + "/20, threshold oracle " +
             std::to_string(threshold_matches) + "/20, " + fmt(elapsed, 3) + " s");
}

// --- criteria 6-8: the desk experiment -------------------------------------

struct SeedOutcome {
  std::uint64_t seed = 0;
  double auc = 0.0;
  double recall = 0.0;
  std::vector<double> loss_trace;
  Checkpoint checkpoint;
  std::string metrics_text;
};

std::string metrics_document(const MetricsReport& report, const fs::path& scratch) {
  const std::string path = (scratch / "metrics_tmp.txt").string();
  save_metrics(path, report);
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

SeedOutcome run_desk_seed(const DatasetManifest& manifest, std::uint64_t seed,
                          const fs::path& scratch) {
  TrainConfig cfg;
  cfg.epochs = kDeskEpochs;
  cfg.seed = seed;
  const TrainResult result = train(cfg, manifest);

  SeedOutcome outcome;
  outcome.seed = seed;
  outcome.loss_trace = result.checkpoint.loss_trace;
  outcome.checkpoint = result.checkpoint;

  const auto calibration = score_dataset(result.checkpoint, manifest, Split::kCalibration);
  const double threshold = calibrate_threshold(calibration);
  auto test = score_dataset(result.checkpoint, manifest, Split::kTest);
  const MetricsReport report = classification_metrics(test, threshold);
  outcome.auc = report.auc;
  outcome.recall = report.recall;
  outcome.metrics_text = metrics_document(report, scratch);
  return outcome;
}

void criteria_desk(const fs::path& scratch) {
  // The published budget covers the whole experiment, synthesis included.
  const auto start = std::chrono::steady_clock::now();
  const std::string corpus = (scratch / "corpus").string();
  SynthParams params;  // published desk protocol: 400/100 at 224, line defects
  params.seed = 1;
  synth_dataset(params, corpus);
  const DatasetManifest manifest = split_manifest(scan_dataset(corpus), {7, 1, 2}, 1);
  std::vector<SeedOutcome> outcomes;
  int passing = 0;
  std::string per_seed;
  for (int seed = 1; seed <= kDeskSeeds; ++seed) {
    outcomes.push_back(run_desk_seed(manifest, std::uint64_t(seed), scratch));
    // Only the first seed's model is revisited, by criteria 7 and 8.
    if (seed != 1) outcomes.back().checkpoint.tensors.clear();
    const SeedOutcome& o = outcomes.back();
    const bool ok = o.auc >= kDeskAucBar && o.recall >= kDeskRecallBar;
    if (ok) ++passing;
    per_seed += " s" + std::to_string(seed) + " auc " + fmt(o.auc, 4) + " recall " +
                fmt(o.recall, 3) + (ok ? "" : " (below bar)");
  }
  const double elapsed = seconds_since(start);
  report(6,
         passing >= kDeskSeedsRequired && elapsed <= kDeskBudgetSeconds,
         std::to_string(passing) + "/" + std::to_string(kDeskSeeds) + " seeds at auc >= " +
             fmt(kDeskAucBar, 3) + " and recall >= " + fmt(kDeskRecallBar, 3) + " with " +
             std::to_string(kDeskEpochs) + " epoch(s)," + per_seed + ", " + fmt(elapsed / 60.0, 3) +
             " min");

  // criterion 7: an identical rerun of the first seed, trace and metrics
  // compared bitwise.
  const SeedOutcome rerun = run_desk_seed(manifest, 1, scratch);
  const bool trace_same = rerun.loss_trace == outcomes[0].loss_trace;
  const bool metrics_same = rerun.metrics_text == outcomes[0].metrics_text;
  report(7, trace_same && metrics_same,
         std::string("loss trace ") + (trace_same ? "bitwise identical" : "differs") +
             ", metrics document " + (metrics_same ? "identical" : "differs"));

  // criterion 8: heatmap argmax localization on the test anomalies of the
  // first seed's model.
  const BackboneSpec spec = backbone_spec("cnn27");
  ParamState<float> net;
  net.tensors = outcomes[0].checkpoint.tensors;
  const FieldGeometry geom = receptive_geometry(spec);
  HeatmapConfig hcfg;  // sigma 8 = one stride

  std::map<std::string, DefectBox> boxes;
  for (const auto& [rel, box] : load_defect_boxes(corpus + "/defects.tsv")) {
    boxes[fs::path(rel).filename().string()] = box;
  }

  Index hits = 0, total = 0;
  bool rendered_one = false;
  for (const SampleRecord* record : manifest.in_split(Split::kTest)) {
    if (record->label != 1) continue;
    const auto box_it = boxes.find(fs::path(record->path).filename().string());
    if (box_it == boxes.end()) continue;
    ++total;

    Mat<float> image = load_unit_image(record->path, spec.input.h, spec.input.w);
    std::vector<Mat<float>> batch{image};
    auto features = forward_eval(spec, net, std::move(batch));
    const Heatmap<float> hm = upsample_heatmap(pseudo_huber_map(features[0]), geom, hcfg);
    Index arg_r = 0, arg_c = 0;
    hm.values.maxCoeff(&arg_r, &arg_c);

    const DefectBox& box = box_it->second;
    const Index dilate = geom.stride_rows;
    if (arg_r >= box.y0 - dilate && arg_r < box.y1 + dilate && arg_c >= box.x0 - dilate &&
        arg_c < box.x1 + dilate) {
      ++hits;
    }
    if (!rendered_one) {
      render_heatmap_image(display_normalize(hm, hcfg), hcfg,
                           (scratch / "heatmap_example.png").string(), &image);
      rendered_one = true;
    }
  }
  const double fraction = total == 0 ? 0.0 : double(hits) / double(total);
  report(8, total > 0 && fraction >= 0.80,
         std::to_string(hits) + "/" + std::to_string(total) +
             " test anomalies localized inside the stride-dilated defect box (" +
             fmt(100.0 * fraction, 4) + "%)");
}

// --- criterion 9: split conformance ----------------------------------------

DatasetManifest fabricated_manifest(Index n_normal, Index n_anomalous) {
  DatasetManifest m;
  for (Index i = 0; i < n_normal; ++i) {
    SampleRecord r;
    r.path = "normal/n_" + std::to_string(i) + ".png";
    r.label = 0;
    r.id = stable_id(r.path);
    m.records.push_back(r);
  }
  for (Index i = 0; i < n_anomalous; ++i) {
    SampleRecord r;
    r.path = "anomalous/a_" + std::to_string(i) + ".png";
    r.label = 1;
    r.id = stable_id(r.path);
    m.records.push_back(r);
  }
  return m;
}

void criterion_split() {
  const DatasetManifest hundred = split_manifest(fabricated_manifest(100, 0), {7, 1, 2}, 1);
  const bool exact = hundred.class_counts(Split::kTrain)[0] == 70 &&
                     hundred.class_counts(Split::kCalibration)[0] == 10 &&
                     hundred.class_counts(Split::kTest)[0] == 20;

  bool stratified = true;
  for (const std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const DatasetManifest m = split_manifest(fabricated_manifest(57, 23), {7, 1, 2}, seed);
    for (const int cls : {0, 1}) {
      const double n = cls == 0 ? 57.0 : 23.0;
      const double targets[3] = {0.7 * n, 0.1 * n, 0.2 * n};
      const Index got[3] = {m.class_counts(Split::kTrain)[std::size_t(cls)],
                            m.class_counts(Split::kCalibration)[std::size_t(cls)],
                            m.class_counts(Split::kTest)[std::size_t(cls)]};
      for (int s = 0; s < 3; ++s) {
        stratified = stratified && std::abs(double(got[s]) - targets[s]) <= 1.0;
      }
    }
  }
  report(9, exact && stratified,
         std::string("100 -> 70/10/20 ") + (exact ? "exact" : "bad") +
             ", imbalanced 57/23 within +-1 per class " + (stratified ? "ok" : "bad"));
}

}  // namespace

int main() {
  const fs::path scratch = "acceptance_tmp";
  fs::create_directories(scratch);

  criterion_gradients();
  criterion_loss_forms();
  criterion_upsampling();
  criterion_architecture();
  criterion_metric_oracles();
  criteria_desk(scratch);
  criterion_split();

  std::cout << (failures == 0 ? "all criteria passed"
                              : std::to_string(failures) + " criterion(s) failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
