#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ridepool/mlp.hpp"

namespace ridepool {

// Byte layout, all integers and floats little-endian:
//
//   magic        8 bytes  "RPOOLCKP"
//   version      u32      kCheckpointVersion
//   n_sizes      u32      number of layer sizes (layers + 1)
//   sizes        u32[n_sizes]
//   params       f64[]    per layer: weights row-major (out x in), then bias
//   adam.steps   u64
//   adam.lr      f64      current (decayed) learning rate
//   adam.base_lr f64
//   adam.decay   f64
//   adam.beta1   f64
//   adam.beta2   f64
//   adam.eps     f64
//   adam.m       f64[]    same layout as params
//   adam.v       f64[]    same layout as params
//   meta.seed    u64
//   meta.episode u64
//   meta.method  u32 length + bytes
inline constexpr char kCheckpointMagic[8] = {'R', 'P', 'O', 'O', 'L', 'C', 'K', 'P'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  uint64_t seed = 0;
  uint64_t episode = 0;
  std::string method;
};

struct Checkpoint {
  Mlp net;
  Adam adam;
  CheckpointMeta meta;
};

std::vector<uint8_t> serialize_checkpoint(const Mlp& net, const Adam& adam,
                                          const CheckpointMeta& meta);
Checkpoint deserialize_checkpoint(const std::vector<uint8_t>& bytes);

void save_checkpoint(const std::string& path, const Mlp& net, const Adam& adam,
                     const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::string& path);

// Throws Error(kShapeMismatch) unless the network's layer sizes equal `sizes`.
void require_layer_sizes(const Mlp& net, const std::vector<int>& sizes);

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace ridepool
