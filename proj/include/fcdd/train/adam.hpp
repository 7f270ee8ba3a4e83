#pragma once

#include <cmath>
#include <cstdint>

#include "fcdd/net/params.hpp"
#include "fcdd/train/train_config.hpp"
#include "fcdd/util/errors.hpp"

namespace fcdd {

/// Adam accumulators, one pair per learnable tensor.
template <typename Scalar>
struct OptState {
  NamedTensors<Scalar> first_moment;
  NamedTensors<Scalar> second_moment;
  std::int64_t step = 0;
};

template <typename Scalar>
OptState<Scalar> init_opt_state(const ParamState<Scalar>& params) {
  OptState<Scalar> opt;
  for (const auto& [name, tensor] : params.tensors) {
    if (!is_learnable(name)) continue;
    Tensor<Scalar> zero;
    zero.shape = tensor.shape;
    zero.data = Vec<Scalar>::Zero(tensor.data.size());
    opt.first_moment[name] = zero;
    opt.second_moment[name] = std::move(zero);
  }
  return opt;
}

/// Bias-corrected Adam with epsilon 1e-8. Gradients cover any subset of the
/// learnable tensors; tensors without a gradient entry are left untouched,
/// and batchnorm running statistics are never eligible.
template <typename Scalar>
void adam_step(ParamState<Scalar>& params, const NamedTensors<Scalar>& grads,
               OptState<Scalar>& opt, const TrainConfig& cfg) {
  validate_train_config(cfg);
  opt.step += 1;
  const double b1 = cfg.grad_decay;
  const double b2 = cfg.sq_grad_decay;
  const double bias1 = 1.0 - std::pow(b1, double(opt.step));
  const double bias2 = 1.0 - std::pow(b2, double(opt.step));
  const double eps = 1e-8;
  for (const auto& [name, grad] : grads) {
    if (!is_learnable(name)) {
      throw InvalidInputError("gradient offered for non-learnable tensor " + name);
    }
    const auto p_it = params.tensors.find(name);
    const auto m_it = opt.first_moment.find(name);
    const auto v_it = opt.second_moment.find(name);
    if (p_it == params.tensors.end() || m_it == opt.first_moment.end() ||
        v_it == opt.second_moment.end()) {
      throw InvalidInputError("gradient for unknown tensor " + name);
    }
    if (grad.shape != p_it->second.shape || grad.data.size() != p_it->second.data.size()) {
      throw InvalidInputError("gradient shape mismatch for tensor " + name);
    }
    const Eigen::ArrayXd g = grad.data.template cast<double>().array();
    Eigen::ArrayXd m = m_it->second.data.template cast<double>().array();
    Eigen::ArrayXd v = v_it->second.data.template cast<double>().array();
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.square();
    const Eigen::ArrayXd update =
        cfg.learning_rate * (m / bias1) / ((v / bias2).sqrt() + eps);
    p_it->second.data -= update.cast<Scalar>().matrix();
    m_it->second.data = m.cast<Scalar>().matrix();
    v_it->second.data = v.cast<Scalar>().matrix();
  }
}

}  // namespace fcdd
