#include "fcdd/io/tensor_archive.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "fcdd/util/errors.hpp"

namespace fcdd {

namespace {

constexpr char kMagic[8] = {'F', 'C', 'D', 'D', 'T', 'N', 'S', '1'};
constexpr std::uint8_t kDtypeF32 = 0;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointFormatError("truncated tensor archive");
  return v;
}

}  // namespace

void write_tensor_archive(std::ostream& out, const NamedTensors<float>& tensors) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint64_t>(out, tensors.size());
  for (const auto& [name, tensor] : tensors) {
    put<std::uint32_t>(out, std::uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    put<std::uint32_t>(out, std::uint32_t(tensor.shape.size()));
    for (Index d : tensor.shape) put<std::int64_t>(out, d);
    put<std::uint8_t>(out, kDtypeF32);
    out.write(reinterpret_cast<const char*>(tensor.data.data()),
              std::streamsize(std::size_t(tensor.data.size()) * sizeof(float)));
  }
  if (!out) throw FileWriteError("tensor archive write failed");
}

NamedTensors<float> read_tensor_archive(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointFormatError("not a tensor archive");
  }
  const std::uint64_t count = get<std::uint64_t>(in);
  NamedTensors<float> tensors;
  for (std::uint64_t t = 0; t < count; ++t) {
    const std::uint32_t name_len = get<std::uint32_t>(in);
    if (name_len > 4096) throw CheckpointFormatError("implausible tensor name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw CheckpointFormatError("truncated tensor archive");
    const std::uint32_t ndim = get<std::uint32_t>(in);
    if (ndim > 8) throw CheckpointFormatError("implausible tensor rank");
    Tensor<float> tensor;
    std::int64_t total = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const std::int64_t dim = get<std::int64_t>(in);
      if (dim < 0 || (dim != 0 && total > std::numeric_limits<std::int64_t>::max() / dim)) {
        throw CheckpointFormatError("implausible tensor dimension");
      }
      tensor.shape.push_back(dim);
      total *= dim;
    }
    if (get<std::uint8_t>(in) != kDtypeF32) {
      throw CheckpointFormatError("unsupported tensor dtype");
    }
    tensor.data.resize(total);
    in.read(reinterpret_cast<char*>(tensor.data.data()),
            std::streamsize(std::size_t(total) * sizeof(float)));
    if (!in) throw CheckpointFormatError("truncated tensor archive");
    if (!tensors.emplace(std::move(name), std::move(tensor)).second) {
      throw CheckpointFormatError("duplicate tensor name");
    }
  }
  return tensors;
}

void save_tensor_archive(const std::string& path, const NamedTensors<float>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileWriteError("cannot open " + path + " for writing");
  write_tensor_archive(out, tensors);
  out.close();
  if (!out) throw FileWriteError("failed writing " + path);
}

NamedTensors<float> load_tensor_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointFormatError("cannot open " + path);
  return read_tensor_archive(in);
}

}  // namespace fcdd
