#pragma once

#include "seqrex/params.hpp"

#include <json.hpp>

#include <string>

namespace seqrex {

// Checkpoint file: 8-byte magic, u32 little-endian manifest length, manifest
// JSON, then each parameter's raw little-endian float32 data in manifest
// order. Round-trips are bit-exact.
inline constexpr char kCheckpointMagic[8] = {'S', 'R', 'X', 'C', 'K', 'P', 'T', '1'};
inline constexpr int kCheckpointVersion = 1;

struct CheckpointManifest {
  std::string architecture;
  uint64_t rng_seed = 0;
  nlohmann::json config;  // free-form, recorded verbatim
};

void save_checkpoint(const std::string& path, const ParameterStore& ps,
                     const CheckpointManifest& manifest);

// Loads parameters into a fresh store and returns the manifest.
CheckpointManifest load_checkpoint(const std::string& path, ParameterStore& out);

}  // namespace seqrex
