#include <CLI11.hpp>

#include <algorithm>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "fcdd/core/loss.hpp"
#include "fcdd/data/image_io.hpp"
#include "fcdd/data/manifest.hpp"
#include "fcdd/data/synth.hpp"
#include "fcdd/eval/evaluator.hpp"
#include "fcdd/explain/heatmap.hpp"
#include "fcdd/explain/render.hpp"
#include "fcdd/io/checkpoint.hpp"
#include "fcdd/net/builders.hpp"
#include "fcdd/net/forward.hpp"
#include "fcdd/train/trainer.hpp"
#include "fcdd/util/config.hpp"
#include "fcdd/util/errors.hpp"

namespace fs = std::filesystem;
using namespace fcdd;

namespace {

/// Every command echoes the settings it actually ran with, so a run can be
/// repeated from its output directory alone. One file per command; a later
/// command in the same directory must not clobber an earlier one's record.
void write_effective_config(const RunConfig& cfg, const fs::path& dir,
                            const std::string& command) {
  fs::create_directories(dir);
  const fs::path path = dir / ("config." + command + ".txt");
  std::ofstream out(path);
  if (!out) throw FileWriteError("cannot open " + path.string() + " for writing");
  out << cfg.to_text();
  out.close();
  if (!out) throw FileWriteError("failed writing " + path.string());
}

std::uint64_t seed_of(const RunConfig& cfg) {
  return std::uint64_t(cfg.get_int("run.seed"));
}

fs::path out_dir(const RunConfig& cfg) { return fs::path(cfg.get("run.out_dir")); }

std::string manifest_path(const RunConfig& cfg) {
  const std::string& explicit_path = cfg.get("run.manifest");
  return explicit_path.empty() ? (out_dir(cfg) / "manifest.tsv").string() : explicit_path;
}

std::string model_path(const RunConfig& cfg) {
  const std::string& explicit_path = cfg.get("run.model");
  return explicit_path.empty() ? (out_dir(cfg) / "checkpoint.bin").string() : explicit_path;
}

SynthParams synth_params(const RunConfig& cfg) {
  SynthParams p;
  p.n_normal = cfg.get_int("synth.n_normal");
  p.n_anomalous = cfg.get_int("synth.n_anomalous");
  p.image_size = cfg.get_int("synth.image_size");
  p.texture_cells = cfg.get_int("synth.texture_cells");
  p.defect_kind = cfg.get("synth.defect_kind");
  p.defect_contrast = cfg.get_double("synth.defect_contrast");
  p.line_width = cfg.get_int("synth.line_width");
  p.seed = seed_of(cfg);
  return p;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.backbone = cfg.get("train.backbone");
  t.batch_size = cfg.get_int("train.batch_size");
  t.epochs = cfg.get_int("train.epochs");
  t.learning_rate = cfg.get_double("train.learning_rate");
  t.grad_decay = cfg.get_double("train.grad_decay");
  t.sq_grad_decay = cfg.get_double("train.sq_grad_decay");
  t.stability_floor = cfg.get_double("train.stability_floor");
  t.use_anomalous_in_train = cfg.get_bool("train.use_anomalous");
  t.seed = seed_of(cfg);
  return t;
}

HeatmapConfig heatmap_config(const RunConfig& cfg, const FieldGeometry& geom) {
  HeatmapConfig h;
  h.sigma = cfg.get_double("heatmap.sigma");
  if (h.sigma == 0.0) h.sigma = double(geom.stride_rows);
  h.display_quantile = cfg.get_double("heatmap.quantile");
  h.truncation_radius = cfg.get_double("heatmap.truncation");
  h.colormap = cfg.get("heatmap.colormap");
  validate_heatmap_config(h);
  return h;
}

std::string required(const RunConfig& cfg, const std::string& key, const std::string& flag) {
  const std::string& value = cfg.get(key);
  if (value.empty()) throw ConfigError(key + " is required (" + flag + ")");
  return value;
}

void cmd_synth(const RunConfig& cfg) {
  const std::string root = required(cfg, "dataset.root", "--out");
  const SynthParams p = synth_params(cfg);
  synth_dataset(p, root);
  write_effective_config(cfg, root, "synth");
  std::cout << "wrote " << p.n_normal << " normal and " << p.n_anomalous
            << " anomalous images under " << root << "\n";
}

void cmd_split(const RunConfig& cfg) {
  const std::string root = required(cfg, "dataset.root", "--input");
  std::vector<std::string> skipped;
  const DatasetManifest scanned = scan_dataset(root, &skipped);
  for (const std::string& path : skipped) {
    std::cerr << "warning: skipped unreadable image " << path << "\n";
  }
  const std::array<int, 3> ratio{int(cfg.get_int("split.train")),
                                 int(cfg.get_int("split.calibration")),
                                 int(cfg.get_int("split.test"))};
  const DatasetManifest m = split_manifest(scanned, ratio, seed_of(cfg));
  const fs::path out = out_dir(cfg);
  fs::create_directories(out);
  save_manifest((out / "manifest.tsv").string(), m);
  write_effective_config(cfg, out, "split");
  for (const Split s : {Split::kTrain, Split::kCalibration, Split::kTest}) {
    const auto counts = m.class_counts(s);
    std::cout << split_name(s) << ": " << counts[0] << " normal, " << counts[1]
              << " anomalous\n";
  }
}

void cmd_train(const RunConfig& cfg) {
  const DatasetManifest m = load_manifest(manifest_path(cfg));
  const TrainResult result = train(train_config(cfg), m);
  const fs::path out = out_dir(cfg);
  fs::create_directories(out);
  save_checkpoint((out / "checkpoint.bin").string(), result.checkpoint);
  save_train_log((out / "train_log.tsv").string(), result.log);
  write_effective_config(cfg, out, "train");
  std::cout << "trained " << result.checkpoint.config.backbone << " for "
            << result.checkpoint.epochs_completed << " epoch(s)";
  if (!result.checkpoint.loss_trace.empty()) {
    std::cout << ", final mean loss " << result.checkpoint.loss_trace.back();
  }
  std::cout << "\n";
}

void cmd_score(const RunConfig& cfg) {
  const Checkpoint ckpt = load_checkpoint(model_path(cfg));
  const DatasetManifest m = load_manifest(manifest_path(cfg));
  const Split split = split_from_name(cfg.get("eval.split"));
  const std::vector<ScoreRecord> records = score_dataset(ckpt, m, split);
  const fs::path out = out_dir(cfg);
  fs::create_directories(out);
  save_scores((out / "scores.tsv").string(), records);
  write_effective_config(cfg, out, "score");
  std::cout << "scored " << records.size() << " image(s) from the " << split_name(split)
            << " split\n";
}

void cmd_eval(const RunConfig& cfg) {
  const Checkpoint ckpt = load_checkpoint(model_path(cfg));
  const DatasetManifest m = load_manifest(manifest_path(cfg));
  const Split eval_split = split_from_name(cfg.get("eval.split"));
  const Split cal_split = split_from_name(cfg.get("eval.calibration_split"));

  const std::vector<ScoreRecord> calibration = score_dataset(ckpt, m, cal_split);
  const double threshold = calibrate_threshold(calibration);
  std::vector<ScoreRecord> records = score_dataset(ckpt, m, eval_split);
  const MetricsReport report = classification_metrics(records, threshold);
  if (!report.auc_defined) {
    throw UndefinedMetricError(std::string("split ") + split_name(eval_split) +
                               " has a single class; AUC is undefined");
  }

  const fs::path out = out_dir(cfg);
  fs::create_directories(out);
  save_scores((out / "scores.tsv").string(), records);
  save_metrics((out / "metrics.txt").string(), report);
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(records.size());
  labels.reserve(records.size());
  for (const ScoreRecord& r : records) {
    scores.push_back(r.score);
    labels.push_back(r.label);
  }
  save_histogram((out / "histogram.tsv").string(),
                 score_histogram(scores, labels, cfg.get_int("eval.bins")));
  write_effective_config(cfg, out, "eval");
  std::cout << "auc " << report.auc << " f1 " << report.f1 << " precision " << report.precision
            << " recall " << report.recall << " threshold " << threshold << "\n";
}

void cmd_heatmap(const RunConfig& cfg) {
  const std::string images_dir = required(cfg, "heatmap.images", "--images");
  const Checkpoint ckpt = load_checkpoint(model_path(cfg));
  const BackboneSpec spec = backbone_spec(ckpt.config.backbone);
  ParamState<float> params;
  params.tensors = ckpt.tensors;
  if (tensor_manifest(params) != tensor_manifest(init_params<float>(spec, 0))) {
    throw WeightLoadError("checkpoint tensors do not match backbone " + ckpt.config.backbone);
  }
  const FieldGeometry geom = receptive_geometry(spec);
  const HeatmapConfig hcfg = heatmap_config(cfg, geom);
  const bool underlay = cfg.get_bool("heatmap.underlay");

  std::vector<fs::path> files;
  for (const fs::directory_entry& entry : fs::directory_iterator(images_dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  const fs::path out = out_dir(cfg) / "heatmaps";
  fs::create_directories(out);
  Index rendered = 0;
  for (const fs::path& file : files) {
    Mat<float> image;
    try {
      image = load_unit_image(file.string(), spec.input.h, spec.input.w);
    } catch (const ImageLoadError& e) {
      std::cerr << "warning: skipped " << file << ": " << e.what() << "\n";
      continue;
    }
    std::vector<Mat<float>> batch{image};
    std::vector<FeatureVolume<float>> features = forward_eval(spec, params, std::move(batch));
    features[0].image_id = file.stem().string();
    const Heatmap<float> hm =
        display_normalize(upsample_heatmap(pseudo_huber_map(features[0]), geom, hcfg), hcfg);
    render_heatmap_image(hm, hcfg, (out / (file.stem().string() + ".png")).string(),
                         underlay ? &image : nullptr);
    ++rendered;
  }
  if (rendered == 0) {
    throw InvalidInputError("no readable images in " + images_dir);
  }
  write_effective_config(cfg, out_dir(cfg), "heatmap");
  std::cout << "rendered " << rendered << " heatmap(s) under " << out.string() << "\n";
}

struct BoundFlag {
  CLI::Option* option;
  std::string key;
  const std::string* value;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-class defect detection with receptive-field heatmaps"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "key=value settings file applied over defaults");
  app.add_option("--set", overrides, "single key=value override, applied after --config")
      ->allow_extra_args(false);

  std::deque<std::string> storage;
  std::vector<BoundFlag> bound;
  const auto bind = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                        const std::string& help) {
    storage.emplace_back();
    const std::string with_default = help + " [" + RunConfig::defaults().at(key) + "]";
    bound.push_back({sub->add_option(flag, storage.back(), with_default), key, &storage.back()});
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic textured defect corpus");
  bind(synth, "--out", "dataset.root", "directory to create");
  bind(synth, "--n-normal", "synth.n_normal", "defect-free image count");
  bind(synth, "--n-anomalous", "synth.n_anomalous", "defective image count");
  bind(synth, "--size", "synth.image_size", "square image side in pixels");
  bind(synth, "--cells", "synth.texture_cells", "texture coarseness");
  bind(synth, "--kind", "synth.defect_kind", "defect shape, line or blob");
  bind(synth, "--contrast", "synth.defect_contrast", "defect darkening strength");
  bind(synth, "--line-width", "synth.line_width", "line defect width in pixels");
  bind(synth, "--seed", "run.seed", "corpus seed");

  CLI::App* split = app.add_subcommand("split", "Scan a dataset and write a split manifest");
  bind(split, "--input", "dataset.root", "dataset with normal/ and anomalous/");
  bind(split, "--out", "run.out_dir", "run directory for manifest.tsv");
  bind(split, "--seed", "run.seed", "shuffle seed");
  std::string ratio_text;
  CLI::Option* ratio_opt =
      split->add_option("--ratio", ratio_text, "train:calibration:test proportions [7:1:2]");

  CLI::App* train_cmd = app.add_subcommand("train", "Train a detector on the train split");
  bind(train_cmd, "--manifest", "run.manifest", "manifest path, default <out>/manifest.tsv");
  bind(train_cmd, "--out", "run.out_dir", "run directory for checkpoint.bin and train_log.tsv");
  bind(train_cmd, "--backbone", "train.backbone", "network architecture");
  bind(train_cmd, "--batch-size", "train.batch_size", "images per optimization step");
  bind(train_cmd, "--epochs", "train.epochs", "passes over the train split");
  bind(train_cmd, "--learning-rate", "train.learning_rate", "Adam step size");
  bind(train_cmd, "--use-anomalous", "train.use_anomalous", "include anomalous train images");
  bind(train_cmd, "--seed", "run.seed", "initialization and shuffle seed");

  CLI::App* score = app.add_subcommand("score", "Write per-image anomaly scores for a split");
  bind(score, "--manifest", "run.manifest", "manifest path, default <out>/manifest.tsv");
  bind(score, "--model", "run.model", "checkpoint path, default <out>/checkpoint.bin");
  bind(score, "--out", "run.out_dir", "run directory for scores.tsv");
  bind(score, "--split", "eval.split", "split to score");

  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Calibrate a threshold and report detection metrics");
  bind(eval_cmd, "--manifest", "run.manifest", "manifest path, default <out>/manifest.tsv");
  bind(eval_cmd, "--model", "run.model", "checkpoint path, default <out>/checkpoint.bin");
  bind(eval_cmd, "--out", "run.out_dir", "run directory for metrics and scores");
  bind(eval_cmd, "--split", "eval.split", "split to evaluate");
  bind(eval_cmd, "--calibration-split", "eval.calibration_split", "split that picks the threshold");
  bind(eval_cmd, "--bins", "eval.bins", "score histogram resolution");

  CLI::App* heatmap =
      app.add_subcommand("heatmap", "Render anomaly heatmaps for a directory of images");
  bind(heatmap, "--model", "run.model", "checkpoint path, default <out>/checkpoint.bin");
  bind(heatmap, "--images", "heatmap.images", "directory of input images");
  bind(heatmap, "--out", "run.out_dir", "run directory; rasters land in heatmaps/");
  bind(heatmap, "--sigma", "heatmap.sigma", "Gaussian width in pixels, 0 = one stride");
  bind(heatmap, "--quantile", "heatmap.quantile", "display range fraction in (0, 1]");
  bind(heatmap, "--underlay", "heatmap.underlay", "blend over the source image");

  for (CLI::App* sub : {synth, split, train_cmd, score, eval_cmd, heatmap}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);

    RunConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const std::string& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + kv);
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const BoundFlag& flag : bound) {
      if (flag.option->count() > 0) cfg.set(flag.key, *flag.value);
    }
    if (ratio_opt->count() > 0) {
      const auto first = ratio_text.find(':');
      const auto second = first == std::string::npos ? first : ratio_text.find(':', first + 1);
      if (second == std::string::npos) {
        throw ConfigError("--ratio expects a:b:c, got: " + ratio_text);
      }
      cfg.set("split.train", ratio_text.substr(0, first));
      cfg.set("split.calibration", ratio_text.substr(first + 1, second - first - 1));
      cfg.set("split.test", ratio_text.substr(second + 1));
      // get_int later rejects non-numeric parts with the offending key named.
      cfg.get_int("split.train");
      cfg.get_int("split.calibration");
      cfg.get_int("split.test");
    }

    if (synth->parsed()) cmd_synth(cfg);
    if (split->parsed()) cmd_split(cfg);
    if (train_cmd->parsed()) cmd_train(cfg);
    if (score->parsed()) cmd_score(cfg);
    if (eval_cmd->parsed()) cmd_eval(cfg);
    if (heatmap->parsed()) cmd_heatmap(cfg);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
