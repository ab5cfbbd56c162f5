#pragma once

#include <cstdint>
#include <filesystem>

#include "fprune/io_util.hpp"
#include "fprune/network.hpp"

namespace fprune {

inline constexpr std::uint32_t kModelFormatVersion = 1;

// Layout (all integers little-endian):
//   "PPRN" | u32 version | u64 text length | canonical spec text |
//   per parameterized layer in id order: u64 n, n f64 weights, u64 m, m f64 biases |
//   u64 FNV-1a checksum of every preceding byte
Bytes encode_model(const Network& network);
Network decode_model(std::span<const std::uint8_t> bytes);

void save_model(const Network& network, const std::filesystem::path& path);
Network load_model(const std::filesystem::path& path);

}  // namespace fprune
