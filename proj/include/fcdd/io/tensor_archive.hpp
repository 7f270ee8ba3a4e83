#pragma once

#include <iosfwd>
#include <string>

#include "fcdd/net/params.hpp"

namespace fcdd {

/// Named-tensor container, little-endian, float32 payloads:
///   "FCDDTNS1" | u64 count | per tensor: u32 name_len, name,
///   u32 ndim, i64 dims[ndim], u8 dtype (0 = f32), payload.
/// Tensors are written in name order. Malformed input raises
/// CheckpointFormatError.
void write_tensor_archive(std::ostream& out, const NamedTensors<float>& tensors);
NamedTensors<float> read_tensor_archive(std::istream& in);

void save_tensor_archive(const std::string& path, const NamedTensors<float>& tensors);
NamedTensors<float> load_tensor_archive(const std::string& path);

}  // namespace fcdd
