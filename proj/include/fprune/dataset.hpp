#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fprune/net_spec.hpp"
#include "fprune/tensor.hpp"

namespace fprune {

enum class Split { kTrain, kValid, kTest };

const char* split_name(Split split);
Split parse_split(const std::string& name);

struct NormStats {
  std::vector<double> mean;    // per channel
  std::vector<double> stddev;  // per channel
};

// Describes one split on disk. Paths are resolved against the manifest's
// directory when read.
struct DatasetManifest {
  std::filesystem::path images;
  std::filesystem::path labels;
  std::vector<std::string> class_names;
  Split split = Split::kTrain;
  std::size_t count = 0;
  ImageShape shape;
  NormStats norm;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Unnormalized split contents as stored on disk.
struct RawSplit {
  ImageShape shape;
  std::vector<float> pixels;  // count * C * H * W
  std::vector<std::uint32_t> labels;
  std::size_t count() const { return labels.size(); }
};

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

// "PPDS" | u32 version | u64 count | u32 C,H,W | f32 pixels
void write_images_file(const std::filesystem::path& path, const RawSplit& split);
// "PPLB" | u32 version | u64 count | u32 labels
void write_labels_file(const std::filesystem::path& path, const RawSplit& split);
RawSplit read_raw_split(const DatasetManifest& manifest);

// Per-channel mean and population standard deviation.
NormStats compute_norm_stats(const RawSplit& split);

// Writes <dir>/<name>.ppds, <name>.pplb and <name>.manifest.
DatasetManifest write_split(const std::filesystem::path& dir, const std::string& name,
                            const RawSplit& split, Split which,
                            const std::vector<std::string>& class_names,
                            const NormStats& norm);

struct Batch {
  Tensor images;  // [n, C, H, W]
  std::vector<int> labels;
};

// In-memory, normalized split.
struct Dataset {
  ImageShape shape;
  std::vector<double> pixels;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  Split split = Split::kTrain;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t image_numel() const { return shape.channels * shape.height * shape.width; }
  std::size_t num_classes() const { return class_names.size(); }

  Batch gather(std::span<const std::size_t> indices) const;
  // New dataset holding the given items in the given order.
  Dataset select(std::span<const std::size_t> indices) const;
};

Dataset load_dataset(const DatasetManifest& manifest);
inline Dataset load_dataset(const std::filesystem::path& manifest_path) {
  return load_dataset(read_manifest(manifest_path));
}

// The three splits of a dataset directory: train.manifest, valid.manifest,
// test.manifest.
struct DatasetSplits {
  DatasetManifest train;
  DatasetManifest valid;
  DatasetManifest test;
};

DatasetSplits read_dataset_dir(const std::filesystem::path& dir);

struct LoadedSplits {
  Dataset train;
  Dataset valid;
  Dataset test;
};

LoadedSplits load_dataset_dir(const std::filesystem::path& dir);

// Selected parent class ids and their remapping onto 0..l-1 (in list order).
struct ClassSubset {
  std::vector<int> class_ids;
  std::vector<int> remap;  // parent id -> new id, -1 when dropped

  static ClassSubset create(std::span<const int> class_ids, std::size_t parent_classes);
  bool contains(int parent_id) const {
    return parent_id >= 0 && static_cast<std::size_t>(parent_id) < remap.size() &&
           remap[parent_id] >= 0;
  }
};

// Keeps only the selected classes in every split, remaps labels to 0..l-1,
// preserves split membership and in-split order, recomputes normalization
// from the subset's train split and writes the three manifests to out_dir.
DatasetSplits make_class_subset(const DatasetSplits& parent, std::span<const int> class_ids,
                                const std::filesystem::path& out_dir);

// Seeded choice of l distinct classes out of `parent_classes`, sorted.
std::vector<int> random_class_ids(std::size_t parent_classes, std::size_t k, std::uint64_t seed);

// Items whose label is in the subset, original labels kept, order preserved.
Dataset filter_classes(const Dataset& dataset, const ClassSubset& subset);

// floor(fraction * N) items without replacement, returned in dataset order.
Dataset subsample(const Dataset& dataset, double fraction, std::uint64_t seed);
std::vector<std::size_t> subsample_indices(std::size_t n, double fraction, std::uint64_t seed);

// Index batches covering 0..n-1 exactly once; the last batch may be partial.
// Without a seed the order is sequential.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::optional<std::uint64_t> shuffle_seed);

}  // namespace fprune
