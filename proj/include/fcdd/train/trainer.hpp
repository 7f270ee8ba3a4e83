#pragma once

#include <string>
#include <vector>

#include "fcdd/data/manifest.hpp"
#include "fcdd/io/checkpoint.hpp"
#include "fcdd/train/train_config.hpp"

namespace fcdd {

struct TrainLogEntry {
  Index epoch = 0;
  double mean_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainLogEntry> log;
};

/// Runs epochs x ceil(n / batch) optimization steps over the manifest's
/// train split. Deterministic for a fixed (config, manifest): batches are
/// reshuffled per epoch from seeds derived off config.seed. With zero
/// epochs the checkpoint is the untouched initialization. Non-finite loss
/// or gradients raise TrainingDivergedError naming the step.
TrainResult train(const TrainConfig& cfg, const DatasetManifest& manifest);

/// Tab-separated: epoch, mean_loss, wall_seconds.
void save_train_log(const std::string& path, const std::vector<TrainLogEntry>& log);

}  // namespace fcdd
