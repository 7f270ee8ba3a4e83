#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fcdd/core/types.hpp"
#include "fcdd/net/spec.hpp"
#include "fcdd/util/errors.hpp"
#include "fcdd/util/rng.hpp"

namespace fcdd {

/// Flat named tensor. Conv weights use shape {k, k, cin, cout} with the data
/// laid out as a (k*k*cin) x cout matrix in column-major order, so column q
/// of an im2col patch matrix indexes (ky*k + kx)*cin + ci. Per-channel
/// vectors use shape {c}.
template <typename Scalar>
struct Tensor {
  std::vector<Index> shape;
  Vec<Scalar> data;

  Index size() const {
    Index n = 1;
    for (Index d : shape) n *= d;
    return n;
  }
};

template <typename Scalar>
using NamedTensors = std::map<std::string, Tensor<Scalar>>;

/// All trainable state of a backbone plus batchnorm running statistics.
template <typename Scalar>
struct ParamState {
  NamedTensors<Scalar> tensors;
};

/// Running statistics are updated by forward passes, not by the optimizer.
inline bool is_learnable(const std::string& name) {
  return !name.ends_with(".running_mean") && !name.ends_with(".running_var");
}

namespace detail {

inline Index channels_into(const BackboneSpec& spec, const std::vector<Shape3>& shapes,
                           std::size_t layer) {
  const int in = spec.layers[layer].inputs.front();
  return in < 0 ? spec.input.c : shapes[std::size_t(in)].c;
}

}  // namespace detail

/// He-normal conv weights, zero biases, identity batchnorm with zeroed
/// running statistics. Draw order is the layer order, so a seed pins every
/// tensor bit for bit.
template <typename Scalar>
ParamState<Scalar> init_params(const BackboneSpec& spec, std::uint64_t seed) {
  const auto shapes = infer_shapes(spec);
  Rng rng = Rng::derived(seed, 0x706172616d73ull);  // "params"
  ParamState<Scalar> state;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (layer.kind == LayerKind::kConv) {
      const Index cin = detail::channels_into(spec, shapes, i);
      const Index k = layer.kernel;
      const Index cout = layer.out_channels;
      Tensor<Scalar> w;
      w.shape = {k, k, cin, cout};
      w.data.resize(k * k * cin * cout);
      const double stddev = std::sqrt(2.0 / double(k * k * cin));
      for (Index j = 0; j < w.data.size(); ++j) {
        w.data[j] = Scalar(stddev * rng.normal());
      }
      state.tensors[layer.name + ".weight"] = std::move(w);
      Tensor<Scalar> b;
      b.shape = {cout};
      b.data = Vec<Scalar>::Zero(cout);
      state.tensors[layer.name + ".bias"] = std::move(b);
    } else if (layer.kind == LayerKind::kBatchNorm) {
      const Index c = shapes[i].c;
      auto filled = [c](Scalar v) {
        Tensor<Scalar> t;
        t.shape = {c};
        t.data = Vec<Scalar>::Constant(c, v);
        return t;
      };
      state.tensors[layer.name + ".weight"] = filled(1);
      state.tensors[layer.name + ".bias"] = filled(0);
      state.tensors[layer.name + ".running_mean"] = filled(0);
      state.tensors[layer.name + ".running_var"] = filled(1);
    }
  }
  return state;
}

/// Sorted name -> shape listing, the interchange contract for weight
/// archives.
template <typename Scalar>
std::vector<std::pair<std::string, std::vector<Index>>> tensor_manifest(
    const ParamState<Scalar>& state) {
  std::vector<std::pair<std::string, std::vector<Index>>> out;
  out.reserve(state.tensors.size());
  for (const auto& [name, tensor] : state.tensors) {
    out.emplace_back(name, tensor.shape);
  }
  return out;
}

}  // namespace fcdd
