#pragma once

#include <filesystem>
#include <iosfwd>

#include "traffic/model.hpp"

namespace traffic {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelConfig config;
    ModelParameters params;
};

/// Binary layout, all integers and doubles little-endian:
///   "TRAFFICK" | u32 version | u64 seed | u64 n + n bytes of config JSON |
///   u64 layer count | per layer: u8 trainable, then for weights and bias:
///   u64 rank, rank x u64 dims, volume x f64 values.
void write_checkpoint(std::ostream& out, const ModelConfig& config, const ModelParameters& params);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ModelParameters& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace traffic
