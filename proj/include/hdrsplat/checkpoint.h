// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint, little-endian:
//   "GHDR" u32 version
//   cloud:     u64 N, u32 d, f64 position[N*3] rotation[N*4] log_scale[N*3] opacity_logit[N]
//              log_irradiance[N*3] feature[N*d]
//   bank:      u32 d, u8 residual_enabled, 7 x (u32 in, u32 hidden, u32 out, u8 act, u64 n, f64[n])
//   optimizer: u64 groups, per group (u32 len, name, u64 step, u64 n, f64 m[n], f64 v[n])
//   u64 iteration, u32 len + rng state text, u64 len + config echo
//   u64 FNV-1a checksum of everything before it
#pragma once

#include <hdrsplat/trainer.h>

#include <cstdint>
#include <filesystem>
#include <string>

namespace hdrsplat {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    GaussianCloud cloud;
    ToneMapperBank bank;
    std::map<std::string, AdamState> adam;
    std::uint64_t iteration = 0;
    std::string rngState;
    std::string configEcho;
};

std::uint64_t fnv1a64(const std::string &bytes, std::size_t length);

std::string encodeCheckpoint(const Checkpoint &ckpt);
// Throws ParseError on bad magic, unsupported version, truncation or checksum mismatch.
Checkpoint decodeCheckpoint(const std::string &bytes);

// Atomic write (temporary file then rename).
void saveCheckpoint(const std::filesystem::path &path, const Checkpoint &ckpt);
Checkpoint loadCheckpoint(const std::filesystem::path &path);

Checkpoint checkpointFromState(const TrainState &state, const std::string &configEcho);
TrainState stateFromCheckpoint(const Checkpoint &ckpt);

} // namespace hdrsplat
