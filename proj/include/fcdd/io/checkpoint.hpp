#pragma once

#include <cstdint>
#include <vector>

#include "fcdd/net/params.hpp"
#include "fcdd/train/train_config.hpp"

namespace fcdd {

/// Everything needed to resume or score: the run configuration, how many
/// epochs finished, the mean loss per finished epoch, and all tensors
/// including batchnorm running statistics.
struct Checkpoint {
  TrainConfig config;
  std::int64_t epochs_completed = 0;
  std::vector<double> loss_trace;
  NamedTensors<float> tensors;
};

/// "FCDDCKP1" | backbone | config scalars | loss trace | tensor archive
/// body, all little-endian. A different magic (older or unknown version)
/// and any malformed body raise CheckpointFormatError.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fcdd
