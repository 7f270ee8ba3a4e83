#pragma once

#include <cstdint>
#include <string>

#include "fcdd/core/types.hpp"
#include "fcdd/util/errors.hpp"

namespace fcdd {

/// Published protocol: batch 30, 50 epochs, Adam at 1e-4 with decays
/// 0.9 / 0.99. Anomalous training images participate by default.
struct TrainConfig {
  Index batch_size = 30;
  Index epochs = 50;
  double learning_rate = 1e-4;
  double grad_decay = 0.9;
  double sq_grad_decay = 0.99;
  std::uint64_t seed = 1;
  bool use_anomalous_in_train = true;
  std::string backbone = "cnn27";
  double stability_floor = 1e-6;
};

inline void validate_train_config(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw InvalidParameterError("batch_size must be at least 1");
  if (cfg.epochs < 0) throw InvalidParameterError("epochs must be nonnegative");
  if (!(cfg.learning_rate > 0.0)) throw InvalidParameterError("learning_rate must be positive");
  if (!(cfg.grad_decay > 0.0) || cfg.grad_decay >= 1.0) {
    throw InvalidParameterError("grad_decay must lie in (0, 1)");
  }
  if (!(cfg.sq_grad_decay > 0.0) || cfg.sq_grad_decay >= 1.0) {
    throw InvalidParameterError("sq_grad_decay must lie in (0, 1)");
  }
  if (!(cfg.stability_floor > 0.0)) {
    throw InvalidParameterError("stability_floor must be positive");
  }
}

}  // namespace fcdd
