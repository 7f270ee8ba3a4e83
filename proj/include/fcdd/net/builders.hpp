#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fcdd/net/params.hpp"
#include "fcdd/net/spec.hpp"

namespace fcdd {

/// Graph for a registered backbone name, validated against its declared
/// output. Unknown names raise UnsupportedBackboneError.
///
/// Registered: "cnn27" (the baseline), "tiny64" (a small stand-in for fast
/// runs on 64x64 inputs), and the truncated deep adapters "vgg16",
/// "resnet101", "inceptionv3" (cut at the last 28x28 stage for 224^2 input,
/// plus a 1x1 head to 512 channels).
BackboneSpec backbone_spec(const std::string& name);

std::vector<std::string> registered_backbones();
bool is_adapter_backbone(const std::string& name);

template <typename Scalar>
std::pair<BackboneSpec, ParamState<Scalar>> build_backbone(const std::string& name,
                                                           std::uint64_t seed) {
  BackboneSpec spec = backbone_spec(name);
  ParamState<Scalar> params = init_params<Scalar>(spec, seed);
  return {std::move(spec), std::move(params)};
}

/// Deep-backbone adapter. With an archive path, every declared tensor must
/// be present with the declared shape and nothing extra; violations raise
/// WeightLoadError. Without one, parameters are seeded randomly.
std::pair<BackboneSpec, ParamState<float>> adapt_backbone(const std::string& name,
                                                          const std::string& weights_path,
                                                          std::uint64_t seed);

}  // namespace fcdd
