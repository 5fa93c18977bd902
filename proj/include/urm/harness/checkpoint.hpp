#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "urm/core/ndarray.hpp"
#include "urm/optim/optimizer.hpp"

namespace urm::harness {

inline constexpr char kCheckpointMagic[8] = {'U', 'R', 'M', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  core::NdArray<float> value;
  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

// Layout (all integers little-endian):
//   magic[8] u32 version
//   u64 len, config JSON text
//   u64 training step
//   u64 count, then per parameter: u64 len, name, u64 rank, rank x u64 dims, f32 values
//   optimizer: u64 step, u64 count, per parameter three optional arrays
//     (u8 present, then rank/dims/values) for m, v, momentum
//   EMA: u8 present, f64 decay, u64 count, arrays
//   u64 len, RNG state text
struct Checkpoint {
  std::string config_json;
  std::uint64_t step = 0;
  std::vector<NamedArray> params;
  std::uint64_t optimizer_step = 0;
  std::vector<core::NdArray<float>> adam_m, adam_v, momentum;
  bool has_ema = false;
  double ema_decay = 0.0;
  std::vector<core::NdArray<float>> ema;
  std::string rng_state;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws std::runtime_error on a bad magic, unknown version or truncation.
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Copies store values / optimizer state into a checkpoint and back. Restoring
// checks names and shapes.
void capture_params(const nn::ParamStore<float>& store, Checkpoint& ckpt);
void restore_params(const Checkpoint& ckpt, nn::ParamStore<float>& store);
void capture_optimizer(const optim::OptimState<float>& state, Checkpoint& ckpt);
void restore_optimizer(const Checkpoint& ckpt, optim::OptimState<float>& state);

}  // namespace urm::harness
