#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fcdd/core/types.hpp"
#include "fcdd/util/errors.hpp"

namespace fcdd {

enum class LayerKind { kConv, kBatchNorm, kRelu, kMaxPool, kAvgPool, kAdd, kConcat };

enum class Padding { kSame, kNone };

/// One node of a backbone graph. `inputs` holds indices of producer layers;
/// -1 denotes the network input. Plain chains list the previous layer.
struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  std::string name;
  int kernel = 0;        // conv and pool kinds
  int out_channels = 0;  // conv only
  int stride = 1;
  Padding padding = Padding::kSame;
  std::vector<int> inputs;
};

struct Shape3 {
  Index h = 0;
  Index w = 0;
  Index c = 0;
  bool operator==(const Shape3&) const = default;
};

/// A declarative backbone: layers in topological order plus declared input
/// and output sizes. The declared output is validated against the derived
/// one by infer_shapes/validate_spec.
struct BackboneSpec {
  std::string name;
  Shape3 input;
  Shape3 output;
  std::vector<LayerSpec> layers;
};

namespace detail {

struct PadAmount {
  Index before = 0;
  Index after = 0;
  Index out = 0;
};

inline PadAmount pad_for(Index in, int kernel, int stride, Padding padding) {
  PadAmount p;
  if (padding == Padding::kSame) {
    p.out = (in + stride - 1) / stride;
    const Index total = std::max<Index>((p.out - 1) * stride + kernel - in, 0);
    p.before = total / 2;
    p.after = total - p.before;
  } else {
    if (in < kernel) {
      throw InvalidInputError("spatial extent smaller than kernel without padding");
    }
    p.out = (in - kernel) / stride + 1;
  }
  return p;
}

}  // namespace detail

/// Derives per-layer output shapes. Index i of the result is the output of
/// layers[i]; the network input is not included.
inline std::vector<Shape3> infer_shapes(const BackboneSpec& spec) {
  std::vector<Shape3> shapes(spec.layers.size());
  auto shape_of = [&](int idx) -> const Shape3& {
    return idx < 0 ? spec.input : shapes[std::size_t(idx)];
  };
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (layer.inputs.empty()) {
      throw InvalidInputError("layer " + layer.name + " has no inputs");
    }
    for (int in : layer.inputs) {
      if (in < -1 || in >= int(i)) {
        throw InvalidInputError("layer " + layer.name + " has an out-of-order input");
      }
    }
    const Shape3& src = shape_of(layer.inputs.front());
    Shape3& out = shapes[i];
    switch (layer.kind) {
      case LayerKind::kConv: {
        if (layer.kernel < 1 || layer.out_channels < 1 || layer.stride < 1) {
          throw InvalidInputError("bad conv geometry in layer " + layer.name);
        }
        const auto ph = detail::pad_for(src.h, layer.kernel, layer.stride, layer.padding);
        const auto pw = detail::pad_for(src.w, layer.kernel, layer.stride, layer.padding);
        out = {ph.out, pw.out, layer.out_channels};
        break;
      }
      case LayerKind::kMaxPool:
      case LayerKind::kAvgPool: {
        if (layer.kernel < 1 || layer.stride < 1) {
          throw InvalidInputError("bad pool geometry in layer " + layer.name);
        }
        const auto ph = detail::pad_for(src.h, layer.kernel, layer.stride, layer.padding);
        const auto pw = detail::pad_for(src.w, layer.kernel, layer.stride, layer.padding);
        out = {ph.out, pw.out, src.c};
        break;
      }
      case LayerKind::kBatchNorm:
      case LayerKind::kRelu:
        out = src;
        break;
      case LayerKind::kAdd: {
        if (layer.inputs.size() < 2) {
          throw InvalidInputError("add layer " + layer.name + " needs two inputs");
        }
        for (int in : layer.inputs) {
          if (!(shape_of(in) == src)) {
            throw InvalidInputError("add layer " + layer.name + " has mismatched inputs");
          }
        }
        out = src;
        break;
      }
      case LayerKind::kConcat: {
        if (layer.inputs.size() < 2) {
          throw InvalidInputError("concat layer " + layer.name + " needs two inputs");
        }
        out = src;
        out.c = 0;
        for (int in : layer.inputs) {
          const Shape3& s = shape_of(in);
          if (s.h != src.h || s.w != src.w) {
            throw InvalidInputError("concat layer " + layer.name + " has mismatched spatial dims");
          }
          out.c += s.c;
        }
        break;
      }
    }
  }
  return shapes;
}

/// Checks that the derived output matches the declared one.
inline void validate_spec(const BackboneSpec& spec) {
  if (spec.layers.empty()) {
    throw InvalidInputError("backbone has no layers");
  }
  const auto shapes = infer_shapes(spec);
  if (!(shapes.back() == spec.output)) {
    throw InvalidInputError("backbone " + spec.name +
                            " derived output does not match the declared output");
  }
}

struct ParamCountReport {
  std::vector<std::pair<std::string, std::int64_t>> per_layer;
  std::int64_t total = 0;
};

/// Learnable-parameter accounting: conv k^2*Cin*Cout + Cout, batchnorm 2*C.
inline ParamCountReport param_count(const BackboneSpec& spec) {
  const auto shapes = infer_shapes(spec);
  auto channels_of = [&](int idx) {
    return idx < 0 ? spec.input.c : shapes[std::size_t(idx)].c;
  };
  ParamCountReport report;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    std::int64_t count = 0;
    if (layer.kind == LayerKind::kConv) {
      const std::int64_t cin = channels_of(layer.inputs.front());
      count = std::int64_t(layer.kernel) * layer.kernel * cin * layer.out_channels +
              layer.out_channels;
    } else if (layer.kind == LayerKind::kBatchNorm) {
      count = 2 * shapes[i].c;
    } else {
      continue;
    }
    report.per_layer.emplace_back(layer.name, count);
    report.total += count;
  }
  return report;
}

/// Geometry of the receptive-field grid in input pixels.
struct FieldGeometry {
  Index map_rows = 0;  // u
  Index map_cols = 0;  // v
  Index stride_rows = 0;
  Index stride_cols = 0;
  std::vector<double> row_centers;  // c1 per cell row, strictly increasing
  std::vector<double> col_centers;  // c2 per cell column
};

/// Derives the uniform cell tiling: stride h/u and cell centers at
/// (i + 0.5) * stride. Requires the map dims to divide the input dims.
inline FieldGeometry receptive_geometry(const BackboneSpec& spec) {
  const Index u = spec.output.h;
  const Index v = spec.output.w;
  if (u < 1 || v < 1 || spec.input.h % u != 0 || spec.input.w % v != 0) {
    throw UnsupportedGeometryError("receptive-field grid " + std::to_string(u) + "x" +
                                   std::to_string(v) + " does not tile a " +
                                   std::to_string(spec.input.h) + "x" +
                                   std::to_string(spec.input.w) + " input");
  }
  FieldGeometry g;
  g.map_rows = u;
  g.map_cols = v;
  g.stride_rows = spec.input.h / u;
  g.stride_cols = spec.input.w / v;
  g.row_centers.resize(std::size_t(u));
  g.col_centers.resize(std::size_t(v));
  for (Index i = 0; i < u; ++i) g.row_centers[std::size_t(i)] = (double(i) + 0.5) * double(g.stride_rows);
  for (Index j = 0; j < v; ++j) g.col_centers[std::size_t(j)] = (double(j) + 0.5) * double(g.stride_cols);
  return g;
}

}  // namespace fcdd
