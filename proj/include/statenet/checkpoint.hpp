#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "statenet/model.hpp"

namespace statenet::train {

struct TracePoint {
  std::uint64_t step = 0;
  double value = 0.0;
  bool operator==(const TracePoint&) const = default;
};

struct Checkpoint {
  ModelParams params;
  std::size_t epoch = 0;
  std::vector<TracePoint> elbo_trace;
  std::uint64_t seed = 0;
  double beta = 0.0;
};

// Binary "LSC1" file: magic, u32 version, header (u64 N, D, H, V, epoch, seed;
// f64 beta), the ELBO trace, then every parameter tensor by name with its
// dimensions and float64 values. Little-endian throughout.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin = "checkpoint");

}  // namespace statenet::train
