#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sigprune/network.hpp"

namespace sigprune {

inline constexpr int kModelSchemaVersion = 1;

/// A model directory holds manifest.json and params.bin (float32, little-endian, manifest order).
struct ModelFile {
  Network net;
  /// Kernel total of the unpruned ancestor; equals net.total_kernels() for a baseline.
  std::size_t original_kernels = 0;
};

void save_model(const Network& net, const std::filesystem::path& dir, std::size_t original_kernels = 0);
ModelFile load_model(const std::filesystem::path& dir);

/// All stored arrays in manifest order, narrowed to float32 little-endian bytes.
std::vector<std::uint8_t> encode_params(const Network& net);
std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace sigprune
