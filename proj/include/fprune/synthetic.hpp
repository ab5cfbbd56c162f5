#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fprune/dataset.hpp"

namespace fprune {

// Procedural 10-class shape dataset (bars, diagonals, squares, frames, disks,
// rings, plus and cross marks) with random placement, scale, colours,
// distractor patches and pixel noise. Classes are balanced within a split.
struct SyntheticConfig {
  std::size_t train = 4000;
  std::size_t valid = 1000;
  std::size_t test = 1000;
  std::size_t image_size = 16;
  double noise = 0.2;
  std::uint64_t seed = 1;
};

const std::vector<std::string>& synthetic_class_names();

RawSplit generate_synthetic_split(const SyntheticConfig& config, Split split, std::size_t count);

// Writes train/valid/test splits and manifests into dir. Normalization
// statistics come from the train split and are shared by all three.
DatasetSplits write_synthetic_dataset(const SyntheticConfig& config,
                                      const std::filesystem::path& dir);

// Converts record-oriented raw dumps (each record: `label_bytes` bytes of
// label, the last of which is used, then C*H*W uint8 pixels in CHW order, as in
// the CIFAR binary distribution) into an unnormalized split. Pixels are scaled
// to [0, 1].
RawSplit import_raw_records(const std::vector<std::filesystem::path>& files, ImageShape shape,
                            std::size_t label_bytes = 1);

}  // namespace fprune
