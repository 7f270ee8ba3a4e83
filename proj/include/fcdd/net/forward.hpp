#pragma once

#include <vector>

#include "fcdd/core/types.hpp"
#include "fcdd/net/conv_ops.hpp"
#include "fcdd/net/params.hpp"
#include "fcdd/net/spec.hpp"
#include "fcdd/util/errors.hpp"

namespace fcdd {

enum class RunMode { kTrain, kEval };

/// Activations retained by a train-mode forward for the matching backward.
/// `out` is populated only for layer kinds whose values are read again:
/// relu and pool outputs (conv weight gradients and relu masks), concat
/// outputs. Batchnorm keeps normalized activations and batch inverse
/// deviations instead of outputs.
template <typename Scalar>
struct NetTrace {
  std::vector<Mat<Scalar>> input;
  std::vector<std::vector<Mat<Scalar>>> out;
  std::vector<std::vector<Mat<Scalar>>> xhat;
  std::vector<Vec<Scalar>> inv_std;
  std::vector<std::vector<net::ArgmaxMat>> argmax;
};

namespace detail {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;  // running = m*running + (1-m)*batch

inline bool retains_output(LayerKind kind) {
  switch (kind) {
    case LayerKind::kRelu:
    case LayerKind::kMaxPool:
    case LayerKind::kAvgPool:
    case LayerKind::kConcat:
      return true;
    default:
      return false;
  }
}

template <typename Scalar>
const Tensor<Scalar>& named(const ParamState<Scalar>& params, const std::string& name,
                            Index expect_size) {
  auto it = params.tensors.find(name);
  if (it == params.tensors.end() || it->second.data.size() != expect_size) {
    throw WeightLoadError("tensor " + name + " missing or of unexpected size");
  }
  return it->second;
}

}  // namespace detail

/// Runs the batch through the graph. Train mode updates batchnorm running
/// statistics in `params` and, when `trace` is given, retains what backward
/// needs. Eval mode leaves `params` untouched and normalizes by the stored
/// running statistics. The batch is taken by value so retained inputs move
/// instead of copying.
template <typename Scalar>
std::vector<FeatureVolume<Scalar>> forward(const BackboneSpec& spec, ParamState<Scalar>& params,
                                           std::vector<Mat<Scalar>> batch, RunMode mode,
                                           NetTrace<Scalar>* trace = nullptr) {
  const auto shapes = infer_shapes(spec);
  const std::size_t layer_count = spec.layers.size();
  const std::size_t batch_size = batch.size();
  if (batch_size == 0) throw InvalidInputError("empty batch");
  for (const Mat<Scalar>& img : batch) {
    if (img.rows() != spec.input.h * spec.input.w || img.cols() != spec.input.c) {
      throw InvalidInputError("batch image does not match the backbone input size");
    }
  }
  const bool training = mode == RunMode::kTrain;
  if (trace != nullptr) {
    trace->out.assign(layer_count, {});
    trace->xhat.assign(layer_count, {});
    trace->inv_std.assign(layer_count, Vec<Scalar>());
    trace->argmax.assign(layer_count, {});
  }

  // Consumer counts drive buffer release; the last layer keeps one use for
  // the returned volumes.
  std::vector<int> uses(layer_count, 0);
  for (const LayerSpec& layer : spec.layers) {
    for (int p : layer.inputs) {
      if (p >= 0) ++uses[std::size_t(p)];
    }
  }
  ++uses[layer_count - 1];

  std::vector<std::vector<Mat<Scalar>>> buf(layer_count);
  auto src_of = [&](int p) -> std::vector<Mat<Scalar>>& {
    return p < 0 ? batch : buf[std::size_t(p)];
  };
  auto shape_of = [&](int p) -> const Shape3& {
    return p < 0 ? spec.input : shapes[std::size_t(p)];
  };
  // Elementwise layers may reuse a producer buffer when it has a single
  // consumer and is not retained for backward.
  auto take = [&](int p, std::size_t b) -> Mat<Scalar> {
    std::vector<Mat<Scalar>>& src = src_of(p);
    const bool steal =
        p >= 0 && uses[std::size_t(p)] == 1 &&
        !(trace != nullptr && detail::retains_output(spec.layers[std::size_t(p)].kind));
    if (steal) return std::move(src[b]);
    return src[b];
  };

  Mat<Scalar> cols;
  for (std::size_t i = 0; i < layer_count; ++i) {
    const LayerSpec& layer = spec.layers[i];
    const int p0 = layer.inputs.front();
    const Shape3& in_shape = shape_of(p0);
    buf[i].resize(batch_size);
    switch (layer.kind) {
      case LayerKind::kConv: {
        const net::ConvGeom g = net::ConvGeom::from(in_shape, layer);
        const Index khat = Index(layer.kernel) * layer.kernel * in_shape.c;
        const auto& wt = detail::named(params, layer.name + ".weight", khat * layer.out_channels);
        const auto& bt = detail::named(params, layer.name + ".bias", Index(layer.out_channels));
        Eigen::Map<const Mat<Scalar>> wmap(wt.data.data(), khat, layer.out_channels);
        for (std::size_t b = 0; b < batch_size; ++b) {
          net::im2col(src_of(p0)[b], g, cols);
          buf[i][b].noalias() = cols * wmap;
          buf[i][b].rowwise() += bt.data.transpose();
        }
        break;
      }
      case LayerKind::kBatchNorm: {
        const Index channels = in_shape.c;
        auto& gamma = detail::named(params, layer.name + ".weight", channels).data;
        auto& beta = detail::named(params, layer.name + ".bias", channels).data;
        if (training) {
          const double count = double(batch_size) * double(in_shape.h * in_shape.w);
          Eigen::VectorXd sum = Eigen::VectorXd::Zero(channels);
          Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(channels);
          for (std::size_t b = 0; b < batch_size; ++b) {
            const auto& x = src_of(p0)[b];
            sum += x.template cast<double>().colwise().sum().transpose();
            sumsq += x.template cast<double>().array().square().colwise().sum().matrix().transpose();
          }
          const Eigen::VectorXd mean_d = sum / count;
          const Eigen::VectorXd var_d =
              (sumsq / count - mean_d.array().square().matrix()).cwiseMax(0.0);
          const Vec<Scalar> mean = mean_d.cast<Scalar>();
          const Vec<Scalar> inv_std =
              (var_d.array() + detail::kBnEps).rsqrt().matrix().cast<Scalar>();
          if (trace != nullptr) {
            trace->inv_std[i] = inv_std;
            trace->xhat[i].resize(batch_size);
          }
          for (std::size_t b = 0; b < batch_size; ++b) {
            Mat<Scalar> x = take(p0, b);
            x.array().rowwise() -= mean.transpose().array();
            x.array().rowwise() *= inv_std.transpose().array();
            buf[i][b] = x;
            buf[i][b].array().rowwise() *= gamma.transpose().array();
            buf[i][b].array().rowwise() += beta.transpose().array();
            if (trace != nullptr) trace->xhat[i][b] = std::move(x);
          }
          // Biased batch variance feeds the running estimate.
          auto& rmean = params.tensors.at(layer.name + ".running_mean").data;
          auto& rvar = params.tensors.at(layer.name + ".running_var").data;
          const Scalar m = Scalar(detail::kBnMomentum);
          rmean = m * rmean + (Scalar(1) - m) * mean;
          rvar = m * rvar + (Scalar(1) - m) * var_d.cast<Scalar>();
        } else {
          const auto& rmean = detail::named(params, layer.name + ".running_mean", channels).data;
          const auto& rvar = detail::named(params, layer.name + ".running_var", channels).data;
          const Vec<Scalar> scale =
              (gamma.array() / (rvar.array() + Scalar(detail::kBnEps)).sqrt()).matrix();
          const Vec<Scalar> shift = (beta.array() - rmean.array() * scale.array()).matrix();
          for (std::size_t b = 0; b < batch_size; ++b) {
            Mat<Scalar> x = take(p0, b);
            x.array().rowwise() *= scale.transpose().array();
            x.array().rowwise() += shift.transpose().array();
            buf[i][b] = std::move(x);
          }
        }
        break;
      }
      case LayerKind::kRelu: {
        for (std::size_t b = 0; b < batch_size; ++b) {
          Mat<Scalar> x = take(p0, b);
          x = x.cwiseMax(Scalar(0));
          buf[i][b] = std::move(x);
        }
        break;
      }
      case LayerKind::kMaxPool: {
        const net::ConvGeom g = net::ConvGeom::from(in_shape, layer);
        if (trace != nullptr) trace->argmax[i].resize(batch_size);
        for (std::size_t b = 0; b < batch_size; ++b) {
          net::maxpool_forward(src_of(p0)[b], g, buf[i][b],
                               trace != nullptr ? &trace->argmax[i][b] : nullptr);
        }
        break;
      }
      case LayerKind::kAvgPool: {
        const net::ConvGeom g = net::ConvGeom::from(in_shape, layer);
        for (std::size_t b = 0; b < batch_size; ++b) {
          net::avgpool_forward(src_of(p0)[b], g, buf[i][b]);
        }
        break;
      }
      case LayerKind::kAdd: {
        for (std::size_t b = 0; b < batch_size; ++b) {
          Mat<Scalar> acc = take(p0, b);
          for (std::size_t j = 1; j < layer.inputs.size(); ++j) {
            acc += src_of(layer.inputs[j])[b];
          }
          buf[i][b] = std::move(acc);
        }
        break;
      }
      case LayerKind::kConcat: {
        const Index rows = in_shape.h * in_shape.w;
        for (std::size_t b = 0; b < batch_size; ++b) {
          buf[i][b].resize(rows, shapes[i].c);
          Index off = 0;
          for (int p : layer.inputs) {
            const Mat<Scalar>& part = src_of(p)[b];
            buf[i][b].middleCols(off, part.cols()) = part;
            off += part.cols();
          }
        }
        break;
      }
    }
    // Release or archive producers whose last consumer this was.
    for (int p : layer.inputs) {
      if (p < 0) continue;
      const auto pi = std::size_t(p);
      if (--uses[pi] == 0) {
        if (trace != nullptr && detail::retains_output(spec.layers[pi].kind)) {
          trace->out[pi] = std::move(buf[pi]);
        }
        buf[pi] = {};
      }
    }
  }

  const std::size_t last = layer_count - 1;
  if (trace != nullptr && detail::retains_output(spec.layers[last].kind)) {
    trace->out[last] = buf[last];
  }
  if (trace != nullptr) trace->input = std::move(batch);

  std::vector<FeatureVolume<Scalar>> volumes(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    volumes[b].rows_u = spec.output.h;
    volumes[b].cols_v = spec.output.w;
    volumes[b].values = std::move(buf[last][b]);
  }
  return volumes;
}

/// Eval-mode convenience over const parameters; forward in eval mode never
/// writes to them.
template <typename Scalar>
std::vector<FeatureVolume<Scalar>> forward_eval(const BackboneSpec& spec,
                                                const ParamState<Scalar>& params,
                                                std::vector<Mat<Scalar>> batch) {
  return forward(spec, const_cast<ParamState<Scalar>&>(params), std::move(batch), RunMode::kEval);
}

}  // namespace fcdd
