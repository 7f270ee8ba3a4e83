#include "fcdd/io/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "fcdd/io/tensor_archive.hpp"
#include "fcdd/util/errors.hpp"

namespace fcdd {

namespace {

constexpr char kMagic[8] = {'F', 'C', 'D', 'D', 'C', 'K', 'P', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointFormatError("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileWriteError("cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  const TrainConfig& cfg = ckpt.config;
  put<std::uint32_t>(out, std::uint32_t(cfg.backbone.size()));
  out.write(cfg.backbone.data(), std::streamsize(cfg.backbone.size()));
  put<std::int64_t>(out, std::int64_t(cfg.batch_size));
  put<std::int64_t>(out, std::int64_t(cfg.epochs));
  put<double>(out, cfg.learning_rate);
  put<double>(out, cfg.grad_decay);
  put<double>(out, cfg.sq_grad_decay);
  put<std::uint64_t>(out, cfg.seed);
  put<std::uint8_t>(out, cfg.use_anomalous_in_train ? 1 : 0);
  put<double>(out, cfg.stability_floor);
  put<std::int64_t>(out, ckpt.epochs_completed);
  put<std::uint64_t>(out, std::uint64_t(ckpt.loss_trace.size()));
  for (double loss : ckpt.loss_trace) put<double>(out, loss);
  write_tensor_archive(out, ckpt.tensors);
  out.close();
  if (!out) throw FileWriteError("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointFormatError("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointFormatError("not a version-1 checkpoint file");
  }
  Checkpoint ckpt;
  TrainConfig& cfg = ckpt.config;
  const std::uint32_t name_len = get<std::uint32_t>(in);
  if (name_len > 256) throw CheckpointFormatError("implausible backbone name length");
  cfg.backbone.resize(name_len);
  in.read(cfg.backbone.data(), name_len);
  if (!in) throw CheckpointFormatError("truncated checkpoint");
  cfg.batch_size = Index(get<std::int64_t>(in));
  cfg.epochs = Index(get<std::int64_t>(in));
  cfg.learning_rate = get<double>(in);
  cfg.grad_decay = get<double>(in);
  cfg.sq_grad_decay = get<double>(in);
  cfg.seed = get<std::uint64_t>(in);
  cfg.use_anomalous_in_train = get<std::uint8_t>(in) != 0;
  cfg.stability_floor = get<double>(in);
  ckpt.epochs_completed = get<std::int64_t>(in);
  const std::uint64_t trace_len = get<std::uint64_t>(in);
  if (trace_len > (1u << 24)) throw CheckpointFormatError("implausible loss trace length");
  ckpt.loss_trace.resize(trace_len);
  for (double& loss : ckpt.loss_trace) loss = get<double>(in);
  ckpt.tensors = read_tensor_archive(in);
  return ckpt;
}

}  // namespace fcdd
