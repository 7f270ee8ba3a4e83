#include "fcdd/net/builders.hpp"

#include <algorithm>

#include "fcdd/io/tensor_archive.hpp"
#include "fcdd/util/errors.hpp"

namespace fcdd {

namespace {

/// Incremental graph assembly; each method appends one layer and returns its
/// index for later reference by skip connections.
struct Graph {
  BackboneSpec spec;
  int last = -1;

  int push(LayerSpec layer) {
    spec.layers.push_back(std::move(layer));
    last = int(spec.layers.size()) - 1;
    return last;
  }
  int conv(const std::string& name, int kernel, int out_channels, int stride = 1,
           Padding pad = Padding::kSame, int from = -2) {
    return push({LayerKind::kConv, name, kernel, out_channels, stride, pad,
                 {from == -2 ? last : from}});
  }
  int bn(const std::string& name, int from = -2) {
    return push({LayerKind::kBatchNorm, name, 0, 0, 1, Padding::kSame, {from == -2 ? last : from}});
  }
  int relu(const std::string& name, int from = -2) {
    return push({LayerKind::kRelu, name, 0, 0, 1, Padding::kSame, {from == -2 ? last : from}});
  }
  int maxpool(const std::string& name, int kernel, int stride, Padding pad, int from = -2) {
    return push({LayerKind::kMaxPool, name, kernel, 0, stride, pad, {from == -2 ? last : from}});
  }
  int avgpool(const std::string& name, int kernel, int stride, Padding pad, int from = -2) {
    return push({LayerKind::kAvgPool, name, kernel, 0, stride, pad, {from == -2 ? last : from}});
  }
  int add(const std::string& name, std::vector<int> from) {
    return push({LayerKind::kAdd, name, 0, 0, 1, Padding::kSame, std::move(from)});
  }
  int concat(const std::string& name, std::vector<int> from) {
    return push({LayerKind::kConcat, name, 0, 0, 1, Padding::kSame, std::move(from)});
  }
  int conv_bn_relu(const std::string& stem, int kernel, int out_channels, int stride = 1,
                   int from = -2) {
    conv(stem + ".conv", kernel, out_channels, stride, Padding::kSame, from);
    bn(stem + ".bn");
    return relu(stem + ".relu");
  }
};

BackboneSpec cnn27() {
  Graph g;
  g.spec.name = "cnn27";
  g.spec.input = {224, 224, 3};
  g.spec.output = {28, 28, 512};
  g.conv("conv1", 3, 64);
  g.bn("bn1");
  g.relu("relu1");
  g.maxpool("pool1", 2, 2, Padding::kNone);
  g.conv("conv2", 3, 128);
  g.bn("bn2");
  g.relu("relu2");
  g.maxpool("pool2", 2, 2, Padding::kNone);
  g.conv("conv3", 3, 256);
  g.bn("bn3");
  g.relu("relu3");
  g.conv("conv4", 3, 256);
  g.bn("bn4");
  g.relu("relu4");
  g.maxpool("pool3", 2, 2, Padding::kNone);
  g.conv("conv5", 3, 512);
  g.bn("bn5");
  g.relu("relu5");
  g.conv("conv6", 3, 512);
  g.bn("bn6");
  g.relu("relu6");
  g.conv("conv7", 3, 512);
  g.bn("bn7");
  g.relu("relu7");
  g.conv("conv8", 1, 512);
  return g.spec;
}

BackboneSpec tiny64() {
  Graph g;
  g.spec.name = "tiny64";
  g.spec.input = {64, 64, 3};
  g.spec.output = {16, 16, 32};
  g.conv("conv1", 3, 16);
  g.bn("bn1");
  g.relu("relu1");
  g.maxpool("pool1", 2, 2, Padding::kNone);
  g.conv("conv2", 3, 32);
  g.bn("bn2");
  g.relu("relu2");
  g.maxpool("pool2", 2, 2, Padding::kNone);
  g.conv("conv3", 1, 32);
  return g.spec;
}

BackboneSpec vgg16() {
  Graph g;
  g.spec.name = "vgg16";
  g.spec.input = {224, 224, 3};
  g.spec.output = {28, 28, 512};
  auto block = [&](const std::string& stem, int n, int channels) {
    for (int i = 1; i <= n; ++i) {
      g.conv(stem + "_" + std::to_string(i), 3, channels);
      g.relu("relu" + stem.substr(4) + "_" + std::to_string(i));
    }
  };
  block("conv1", 2, 64);
  g.maxpool("pool1", 2, 2, Padding::kNone);
  block("conv2", 2, 128);
  g.maxpool("pool2", 2, 2, Padding::kNone);
  block("conv3", 3, 256);
  g.maxpool("pool3", 2, 2, Padding::kNone);
  block("conv4", 3, 512);  // conv4_3 is the last 28x28 stage
  g.conv("head", 1, 512);
  return g.spec;
}

BackboneSpec resnet101() {
  Graph g;
  g.spec.name = "resnet101";
  g.spec.input = {224, 224, 3};
  g.spec.output = {28, 28, 512};
  g.conv("conv1", 7, 64, 2);
  g.bn("bn1");
  g.relu("relu1");
  int prev = g.maxpool("pool1", 3, 2, Padding::kSame);
  auto bottleneck = [&](const std::string& stem, int width, int out, int stride, bool project) {
    const int in = prev;
    g.conv(stem + ".conv1", 1, width, 1, Padding::kSame, in);
    g.bn(stem + ".bn1");
    g.relu(stem + ".relu1");
    g.conv(stem + ".conv2", 3, width, stride);
    g.bn(stem + ".bn2");
    g.relu(stem + ".relu2");
    g.conv(stem + ".conv3", 1, out);
    const int main = g.bn(stem + ".bn3");
    int shortcut = in;
    if (project) {
      g.conv(stem + ".downsample.0", 1, out, stride, Padding::kSame, in);
      shortcut = g.bn(stem + ".downsample.1");
    }
    g.add(stem + ".add", {main, shortcut});
    prev = g.relu(stem + ".relu3");
  };
  for (int i = 0; i < 3; ++i) {
    bottleneck("layer1." + std::to_string(i), 64, 256, 1, i == 0);
  }
  for (int i = 0; i < 4; ++i) {
    bottleneck("layer2." + std::to_string(i), 128, 512, i == 0 ? 2 : 1, i == 0);
  }
  g.conv("head", 1, 512, 1, Padding::kSame, prev);
  return g.spec;
}

BackboneSpec inceptionv3() {
  Graph g;
  g.spec.name = "inceptionv3";
  g.spec.input = {224, 224, 3};
  g.spec.output = {28, 28, 512};
  g.conv_bn_relu("conv_1a", 3, 32, 2);
  g.conv_bn_relu("conv_2a", 3, 32);
  g.conv_bn_relu("conv_2b", 3, 64);
  g.maxpool("pool_3a", 3, 2, Padding::kSame);
  g.conv_bn_relu("conv_3b", 1, 80);
  g.conv_bn_relu("conv_4a", 3, 192);
  int prev = g.maxpool("pool_5a", 3, 2, Padding::kSame);
  auto mixed = [&](const std::string& stem, int pool_proj) {
    const int in = prev;
    const int b0 = g.conv_bn_relu(stem + ".branch1x1", 1, 64, 1, in);
    g.conv_bn_relu(stem + ".branch5x5_1", 1, 48, 1, in);
    const int b1 = g.conv_bn_relu(stem + ".branch5x5_2", 5, 64);
    g.conv_bn_relu(stem + ".branch3x3dbl_1", 1, 64, 1, in);
    g.conv_bn_relu(stem + ".branch3x3dbl_2", 3, 96);
    const int b2 = g.conv_bn_relu(stem + ".branch3x3dbl_3", 3, 96);
    g.avgpool(stem + ".pool", 3, 1, Padding::kSame, in);
    const int b3 = g.conv_bn_relu(stem + ".branch_pool", 1, pool_proj);
    prev = g.concat(stem + ".concat", {b0, b1, b2, b3});
  };
  mixed("mixed_5b", 32);   // 64+64+96+32 = 256
  mixed("mixed_5c", 64);   // 288
  mixed("mixed_5d", 64);   // 288
  g.conv("head", 1, 512, 1, Padding::kSame, prev);
  return g.spec;
}

}  // namespace

BackboneSpec backbone_spec(const std::string& name) {
  BackboneSpec spec;
  if (name == "cnn27") {
    spec = cnn27();
  } else if (name == "tiny64") {
    spec = tiny64();
  } else if (name == "vgg16") {
    spec = vgg16();
  } else if (name == "resnet101") {
    spec = resnet101();
  } else if (name == "inceptionv3") {
    spec = inceptionv3();
  } else {
    throw UnsupportedBackboneError("unknown backbone \"" + name + "\"");
  }
  validate_spec(spec);
  return spec;
}

std::vector<std::string> registered_backbones() {
  return {"cnn27", "inceptionv3", "resnet101", "tiny64", "vgg16"};
}

bool is_adapter_backbone(const std::string& name) {
  return name == "vgg16" || name == "resnet101" || name == "inceptionv3";
}

std::pair<BackboneSpec, ParamState<float>> adapt_backbone(const std::string& name,
                                                          const std::string& weights_path,
                                                          std::uint64_t seed) {
  if (!is_adapter_backbone(name)) {
    throw UnsupportedBackboneError("\"" + name + "\" is not an adapter backbone");
  }
  auto [spec, params] = build_backbone<float>(name, seed);
  if (weights_path.empty()) return {std::move(spec), std::move(params)};

  NamedTensors<float> loaded;
  try {
    loaded = load_tensor_archive(weights_path);
  } catch (const CheckpointFormatError& e) {
    throw WeightLoadError(std::string("malformed weight archive: ") + e.what());
  }
  for (const auto& [tname, tensor] : loaded) {
    auto it = params.tensors.find(tname);
    if (it == params.tensors.end()) {
      throw WeightLoadError("archive tensor \"" + tname + "\" is not declared by " + name);
    }
    if (it->second.shape != tensor.shape) {
      throw WeightLoadError("archive tensor \"" + tname + "\" has a mismatched shape");
    }
    it->second.data = tensor.data;
  }
  for (const auto& [tname, tensor] : params.tensors) {
    if (loaded.find(tname) == loaded.end()) {
      throw WeightLoadError("archive is missing tensor \"" + tname + "\"");
    }
  }
  return {std::move(spec), std::move(params)};
}

}  // namespace fcdd
