#pragma once

#include <vector>

#include "fcdd/core/types.hpp"
#include "fcdd/net/conv_ops.hpp"
#include "fcdd/net/forward.hpp"
#include "fcdd/net/params.hpp"
#include "fcdd/net/spec.hpp"
#include "fcdd/util/errors.hpp"

namespace fcdd {

namespace detail {

template <typename Scalar>
const std::vector<Mat<Scalar>>& producer_out(const NetTrace<Scalar>& trace, int p) {
  if (p < 0) return trace.input;
  const auto& out = trace.out[std::size_t(p)];
  if (out.empty()) {
    throw Error("backward needs an activation the forward trace did not retain");
  }
  return out;
}

}  // namespace detail

/// Backpropagates volume gradients through a train-mode trace and returns
/// gradients for every learnable tensor, in parameter shapes. `grad_out` is
/// consumed. The trace must come from the same spec, params, and batch.
template <typename Scalar>
NamedTensors<Scalar> backward(const BackboneSpec& spec, const ParamState<Scalar>& params,
                              const NetTrace<Scalar>& trace, std::vector<Mat<Scalar>> grad_out) {
  const auto shapes = infer_shapes(spec);
  const std::size_t layer_count = spec.layers.size();
  const std::size_t batch_size = grad_out.size();
  if (trace.input.size() != batch_size) {
    throw InvalidInputError("gradient batch does not match the trace batch");
  }

  NamedTensors<Scalar> grads;
  for (const auto& [name, tensor] : params.tensors) {
    if (!is_learnable(name)) continue;
    Tensor<Scalar> g;
    g.shape = tensor.shape;
    g.data = Vec<Scalar>::Zero(tensor.data.size());
    grads[name] = std::move(g);
  }

  std::vector<std::vector<Mat<Scalar>>> gbuf(layer_count);
  gbuf[layer_count - 1] = std::move(grad_out);

  auto shape_of = [&](int p) -> const Shape3& {
    return p < 0 ? spec.input : shapes[std::size_t(p)];
  };
  // Gradients fan in: first contribution assigns, later ones accumulate.
  auto sink = [&](int p, std::size_t b) -> Mat<Scalar>* {
    if (p < 0) return nullptr;
    auto& slot = gbuf[std::size_t(p)];
    if (slot.empty()) slot.resize(batch_size);
    return &slot[b];
  };
  auto add_into = [&](Mat<Scalar>* dst, Mat<Scalar>&& g) {
    if (dst == nullptr) return;
    if (dst->size() == 0) {
      *dst = std::move(g);
    } else {
      *dst += g;
    }
  };

  Mat<Scalar> cols;
  for (std::size_t ri = layer_count; ri-- > 0;) {
    const LayerSpec& layer = spec.layers[ri];
    std::vector<Mat<Scalar>>& gy = gbuf[ri];
    if (gy.empty()) continue;  // no path to the output
    const int p0 = layer.inputs.front();
    const Shape3& in_shape = shape_of(p0);
    switch (layer.kind) {
      case LayerKind::kConv: {
        const net::ConvGeom g = net::ConvGeom::from(in_shape, layer);
        const Index khat = Index(layer.kernel) * layer.kernel * in_shape.c;
        const auto& wt = params.tensors.at(layer.name + ".weight");
        Eigen::Map<const Mat<Scalar>> wmap(wt.data.data(), khat, layer.out_channels);
        auto& gw = grads.at(layer.name + ".weight").data;
        auto& gb = grads.at(layer.name + ".bias").data;
        Eigen::Map<Mat<Scalar>> gwmap(gw.data(), khat, layer.out_channels);
        const auto& src = detail::producer_out(trace, p0);
        for (std::size_t b = 0; b < batch_size; ++b) {
          net::im2col(src[b], g, cols);
          gwmap.noalias() += cols.transpose() * gy[b];
          gb += gy[b].colwise().sum().transpose();
          if (p0 >= 0) {
            Mat<Scalar>* dst = sink(p0, b);
            if (dst->size() == 0) *dst = Mat<Scalar>::Zero(in_shape.h * in_shape.w, in_shape.c);
            cols.noalias() = gy[b] * wmap.transpose();
            net::col2im_add(cols, g, *dst);
          }
          gy[b] = {};
        }
        break;
      }
      case LayerKind::kBatchNorm: {
        const Index channels = in_shape.c;
        const auto& gamma = params.tensors.at(layer.name + ".weight").data;
        const auto& xhat = trace.xhat[ri];
        const Vec<Scalar>& inv_std = trace.inv_std[ri];
        if (xhat.size() != batch_size || inv_std.size() != channels) {
          throw Error("batchnorm trace is incomplete");
        }
        const double count = double(batch_size) * double(in_shape.h * in_shape.w);
        Eigen::VectorXd dbeta = Eigen::VectorXd::Zero(channels);
        Eigen::VectorXd dgamma = Eigen::VectorXd::Zero(channels);
        for (std::size_t b = 0; b < batch_size; ++b) {
          dbeta += gy[b].template cast<double>().colwise().sum().transpose();
          dgamma += (gy[b].template cast<double>().array() *
                     xhat[b].template cast<double>().array())
                        .colwise()
                        .sum()
                        .matrix()
                        .transpose();
        }
        grads.at(layer.name + ".weight").data += dgamma.cast<Scalar>();
        grads.at(layer.name + ".bias").data += dbeta.cast<Scalar>();
        const Vec<Scalar> mean_dy = (dbeta / count).cast<Scalar>();
        const Vec<Scalar> mean_dy_xhat = (dgamma / count).cast<Scalar>();
        const Vec<Scalar> gis = (gamma.array() * inv_std.array()).matrix();
        for (std::size_t b = 0; b < batch_size; ++b) {
          for (Index c = 0; c < channels; ++c) {
            gy[b].col(c) =
                gis[c] *
                (gy[b].col(c).array() - mean_dy[c] - xhat[b].col(c).array() * mean_dy_xhat[c])
                    .matrix();
          }
          add_into(sink(p0, b), std::move(gy[b]));
        }
        break;
      }
      case LayerKind::kRelu: {
        const auto& own = trace.out[ri];
        if (own.size() != batch_size) throw Error("relu trace is incomplete");
        for (std::size_t b = 0; b < batch_size; ++b) {
          gy[b] = (own[b].array() > Scalar(0)).select(gy[b], Scalar(0));
          add_into(sink(p0, b), std::move(gy[b]));
        }
        break;
      }
      case LayerKind::kMaxPool: {
        const auto& argmax = trace.argmax[ri];
        if (argmax.size() != batch_size) throw Error("maxpool trace is incomplete");
        for (std::size_t b = 0; b < batch_size; ++b) {
          Mat<Scalar>* dst = sink(p0, b);
          if (dst != nullptr) {
            if (dst->size() == 0) *dst = Mat<Scalar>::Zero(in_shape.h * in_shape.w, in_shape.c);
            net::maxpool_backward(gy[b], argmax[b], *dst);
          }
          gy[b] = {};
        }
        break;
      }
      case LayerKind::kAvgPool: {
        const net::ConvGeom g = net::ConvGeom::from(in_shape, layer);
        for (std::size_t b = 0; b < batch_size; ++b) {
          Mat<Scalar>* dst = sink(p0, b);
          if (dst != nullptr) {
            if (dst->size() == 0) *dst = Mat<Scalar>::Zero(in_shape.h * in_shape.w, in_shape.c);
            net::avgpool_backward(gy[b], g, *dst);
          }
          gy[b] = {};
        }
        break;
      }
      case LayerKind::kAdd: {
        for (std::size_t b = 0; b < batch_size; ++b) {
          for (std::size_t j = 1; j < layer.inputs.size(); ++j) {
            add_into(sink(layer.inputs[j], b), Mat<Scalar>(gy[b]));
          }
          add_into(sink(p0, b), std::move(gy[b]));
        }
        break;
      }
      case LayerKind::kConcat: {
        for (std::size_t b = 0; b < batch_size; ++b) {
          Index off = 0;
          for (int p : layer.inputs) {
            const Index width = shape_of(p).c;
            add_into(sink(p, b), Mat<Scalar>(gy[b].middleCols(off, width)));
            off += width;
          }
          gy[b] = {};
        }
        break;
      }
    }
    gbuf[ri] = {};
  }
  return grads;
}

}  // namespace fcdd
