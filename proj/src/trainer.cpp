#include "fcdd/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <utility>

#include "fcdd/core/loss.hpp"
#include "fcdd/net/backward.hpp"
#include "fcdd/net/builders.hpp"
#include "fcdd/net/forward.hpp"
#include "fcdd/train/adam.hpp"
#include "fcdd/util/errors.hpp"
#include "fcdd/util/rng.hpp"

namespace fcdd {

namespace {

constexpr std::uint64_t kEpochTag = 0x65706f6368ull;  // "epoch"

std::string step_name(Index epoch, Index step) {
  return "epoch " + std::to_string(epoch) + " step " + std::to_string(step);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const DatasetManifest& manifest) {
  validate_train_config(cfg);
  auto [spec, params] = build_backbone<float>(cfg.backbone, cfg.seed);

  std::vector<const SampleRecord*> train_records;
  for (const SampleRecord* r : manifest.in_split(Split::kTrain)) {
    if (!cfg.use_anomalous_in_train && r->label == 1) continue;
    train_records.push_back(r);
  }
  if (train_records.empty()) {
    throw ConfigError("manifest has no usable train records for this configuration");
  }

  SVDDConfig<float> svdd;
  svdd.stability_floor = float(cfg.stability_floor);
  OptState<float> opt = init_opt_state(params);

  TrainResult result;
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(train_records.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    Rng shuffle_rng = Rng::derived(cfg.seed, kEpochTag + std::uint64_t(epoch));
    deterministic_shuffle(order, shuffle_rng);

    double loss_sum = 0.0;
    Index steps = 0;
    for (std::size_t at = 0; at < order.size(); at += std::size_t(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), at + std::size_t(cfg.batch_size));
      std::vector<const SampleRecord*> chunk;
      chunk.reserve(end - at);
      for (std::size_t i = at; i < end; ++i) chunk.push_back(train_records[order[i]]);

      LoadedBatch loaded = load_batch(chunk, spec.input.h, spec.input.w);
      NetTrace<float> trace;
      LabeledSampleBatch<float> batch;
      batch.features =
          forward(spec, params, std::move(loaded.images), RunMode::kTrain, &trace);
      batch.labels = std::move(loaded.labels);

      for (const FeatureVolume<float>& fv : batch.features) {
        if (!fv.values.allFinite()) {
          throw TrainingDivergedError("non-finite activations at " + step_name(epoch, steps));
        }
      }
      const float loss = fcdd_spatial_loss(batch, svdd);
      if (!std::isfinite(loss)) {
        throw TrainingDivergedError("non-finite loss at " + step_name(epoch, steps));
      }
      NamedTensors<float> grads =
          backward(spec, params, trace, loss_gradients(batch, svdd));
      for (const auto& [name, grad] : grads) {
        if (!grad.data.allFinite()) {
          throw TrainingDivergedError("non-finite gradient for " + name + " at " +
                                      step_name(epoch, steps));
        }
      }
      adam_step(params, grads, opt, cfg);
      loss_sum += double(loss);
      ++steps;
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    const double mean_loss = loss_sum / double(steps);
    result.checkpoint.loss_trace.push_back(mean_loss);
    result.log.push_back({epoch, mean_loss, wall});
  }

  result.checkpoint.config = cfg;
  result.checkpoint.epochs_completed = cfg.epochs;
  result.checkpoint.tensors = std::move(params.tensors);
  return result;
}

void save_train_log(const std::string& path, const std::vector<TrainLogEntry>& log) {
  std::ofstream out(path);
  if (!out) throw FileWriteError("cannot open " + path + " for writing");
  out << "epoch\tmean_loss\twall_seconds\n";
  out.precision(17);
  for (const TrainLogEntry& entry : log) {
    out << entry.epoch << '\t' << entry.mean_loss << '\t' << entry.wall_seconds << '\n';
  }
  out.close();
  if (!out) throw FileWriteError("failed writing " + path);
}

}  // namespace fcdd
