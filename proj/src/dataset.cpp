#include "fprune/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

#include "fprune/errors.hpp"
#include "fprune/io_util.hpp"
#include "fprune/rng.hpp"

namespace fs = std::filesystem;

namespace fprune {

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid") return Split::kValid;
  if (name == "test") return Split::kTest;
  throw InputError("unknown split '" + name + "' (expected train, valid or test)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_doubles(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string word;
  while (in >> word) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(word, &used));
      if (used != word.size()) throw std::invalid_argument(word);
    } catch (const std::exception&) {
      throw ConfigError("manifest: bad number '" + word + "' for " + key);
    }
  }
  return out;
}

std::size_t parse_count(const std::string& text, const std::string& key) {
  const std::vector<double> v = parse_doubles(text, key);
  if (v.size() != 1 || v[0] < 0 || v[0] != std::floor(v[0])) {
    throw ConfigError("manifest: " + key + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(v[0]);
}

void check_magic(ByteReader& in, const char (&magic)[5], const fs::path& path) {
  if (in.remaining() < 4 || in.str(4) != std::string(magic, 4)) {
    throw LoadError(ErrorCode::kBadMagic, path.string() + ": bad magic, expected " + magic);
  }
  const std::uint32_t version = in.u32();
  if (version != kDatasetFormatVersion) {
    throw LoadError(ErrorCode::kVersionMismatch,
                    path.string() + ": format version " + std::to_string(version));
  }
}

}  // namespace

DatasetManifest read_manifest(const fs::path& path) {
  const std::string text = read_text_file(path);
  std::map<std::string, std::string> fields;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path.string() + ": expected key = value, got '" + line + "'");
    fields[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  for (const char* key : {"split", "images", "labels", "count", "shape", "classes", "mean", "std"}) {
    if (!fields.count(key)) throw ConfigError(path.string() + ": missing '" + key + "'");
  }
  DatasetManifest m;
  const fs::path base = path.parent_path();
  m.split = parse_split(fields["split"]);
  m.images = base / fields["images"];
  m.labels = base / fields["labels"];
  m.count = parse_count(fields["count"], "count");
  const std::vector<double> shape = parse_doubles(fields["shape"], "shape");
  if (shape.size() != 3 || shape[0] < 1 || shape[1] < 1 || shape[2] < 1) {
    throw ConfigError(path.string() + ": shape must be three positive integers");
  }
  m.shape = {static_cast<std::size_t>(shape[0]), static_cast<std::size_t>(shape[1]),
             static_cast<std::size_t>(shape[2])};
  std::istringstream names(fields["classes"]);
  std::string name;
  while (std::getline(names, name, ',')) m.class_names.push_back(trim(name));
  if (m.class_names.empty()) throw ConfigError(path.string() + ": no class names");
  m.norm.mean = parse_doubles(fields["mean"], "mean");
  m.norm.stddev = parse_doubles(fields["std"], "std");
  if (m.norm.mean.size() != m.shape.channels || m.norm.stddev.size() != m.shape.channels) {
    throw ConfigError(path.string() + ": mean/std need one value per channel");
  }
  return m;
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
  const fs::path base = path.parent_path();
  auto rel = [&](const fs::path& p) {
    return p.parent_path() == base ? p.filename().string() : p.string();
  };
  std::ostringstream out;
  out << "# fprune dataset manifest\n";
  out << "split = " << split_name(m.split) << '\n';
  out << "images = " << rel(m.images) << '\n';
  out << "labels = " << rel(m.labels) << '\n';
  out << "count = " << m.count << '\n';
  out << "shape = " << m.shape.channels << ' ' << m.shape.height << ' ' << m.shape.width << '\n';
  out << "classes = ";
  for (std::size_t i = 0; i < m.class_names.size(); ++i) out << (i ? "," : "") << m.class_names[i];
  out << "\nmean =";
  for (double v : m.norm.mean) out << ' ' << format_double(v);
  out << "\nstd =";
  for (double v : m.norm.stddev) out << ' ' << format_double(v);
  out << '\n';
  write_text_atomic(path, out.str());
}

void write_images_file(const fs::path& path, const RawSplit& split) {
  const std::size_t numel = split.shape.channels * split.shape.height * split.shape.width;
  if (split.pixels.size() != split.count() * numel) {
    throw ShapeError("pixels", "expected " + std::to_string(split.count() * numel) + " values");
  }
  Bytes out;
  put_bytes(out, "PPDS");
  put_u32(out, kDatasetFormatVersion);
  put_u64(out, split.count());
  put_u32(out, static_cast<std::uint32_t>(split.shape.channels));
  put_u32(out, static_cast<std::uint32_t>(split.shape.height));
  put_u32(out, static_cast<std::uint32_t>(split.shape.width));
  out.reserve(out.size() + 4 * split.pixels.size());
  for (float v : split.pixels) put_f32(out, v);
  write_file_atomic(path, out);
}

void write_labels_file(const fs::path& path, const RawSplit& split) {
  Bytes out;
  put_bytes(out, "PPLB");
  put_u32(out, kDatasetFormatVersion);
  put_u64(out, split.count());
  for (std::uint32_t v : split.labels) put_u32(out, v);
  write_file_atomic(path, out);
}

RawSplit read_raw_split(const DatasetManifest& m) {
  RawSplit split;
  split.shape = m.shape;
  {
    const Bytes bytes = read_file(m.images);
    ByteReader in(bytes, m.images.string());
    check_magic(in, "PPDS", m.images);
    const std::uint64_t count = in.u64();
    const ImageShape shape{in.u32(), in.u32(), in.u32()};
    if (!(shape == m.shape)) {
      throw LoadError(ErrorCode::kCountMismatch,
                      m.images.string() + ": image shape disagrees with manifest");
    }
    if (count != m.count) {
      throw LoadError(ErrorCode::kCountMismatch,
                      m.images.string() + ": holds " + std::to_string(count) +
                          " images, manifest says " + std::to_string(m.count));
    }
    const std::size_t n = count * shape.channels * shape.height * shape.width;
    if (in.remaining() != 4 * n) {
      throw LoadError(ErrorCode::kCountMismatch, m.images.string() + ": payload size mismatch");
    }
    split.pixels.resize(n);
    for (float& v : split.pixels) v = in.f32();
  }
  {
    const Bytes bytes = read_file(m.labels);
    ByteReader in(bytes, m.labels.string());
    check_magic(in, "PPLB", m.labels);
    const std::uint64_t count = in.u64();
    if (count != m.count) {
      throw LoadError(ErrorCode::kCountMismatch,
                      m.labels.string() + ": holds " + std::to_string(count) +
                          " labels, manifest says " + std::to_string(m.count));
    }
    if (in.remaining() != 4 * count) {
      throw LoadError(ErrorCode::kCountMismatch, m.labels.string() + ": payload size mismatch");
    }
    split.labels.resize(count);
    for (std::uint32_t& v : split.labels) {
      v = in.u32();
      if (v >= m.class_names.size()) {
        throw RangeError(m.labels.string() + ": label " + std::to_string(v) +
                         " outside [0, " + std::to_string(m.class_names.size()) + ")");
      }
    }
  }
  return split;
}

NormStats compute_norm_stats(const RawSplit& split) {
  const std::size_t c = split.shape.channels;
  const std::size_t plane = split.shape.height * split.shape.width;
  NormStats stats{std::vector<double>(c, 0.0), std::vector<double>(c, 1.0)};
  if (split.count() == 0) return stats;
  const double n = static_cast<double>(split.count() * plane);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::size_t i = 0; i < split.count(); ++i) {
      const float* p = split.pixels.data() + (i * c + ch) * plane;
      for (std::size_t k = 0; k < plane; ++k) sum += p[k];
    }
    const double mean = sum / n;
    double sq = 0.0;
    for (std::size_t i = 0; i < split.count(); ++i) {
      const float* p = split.pixels.data() + (i * c + ch) * plane;
      for (std::size_t k = 0; k < plane; ++k) sq += (p[k] - mean) * (p[k] - mean);
    }
    stats.mean[ch] = mean;
    const double sd = std::sqrt(sq / n);
    stats.stddev[ch] = sd > 0.0 ? sd : 1.0;
  }
  return stats;
}

DatasetManifest write_split(const fs::path& dir, const std::string& name, const RawSplit& split,
                            Split which, const std::vector<std::string>& class_names,
                            const NormStats& norm) {
  fs::create_directories(dir);
  DatasetManifest m;
  m.images = dir / (name + ".ppds");
  m.labels = dir / (name + ".pplb");
  m.class_names = class_names;
  m.split = which;
  m.count = split.count();
  m.shape = split.shape;
  m.norm = norm;
  write_images_file(m.images, split);
  write_labels_file(m.labels, split);
  write_manifest(m, dir / (name + ".manifest"));
  return m;
}

Batch Dataset::gather(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw InputError("cannot gather an empty batch");
  const std::size_t numel = image_numel();
  Batch batch{Tensor({indices.size(), shape.channels, shape.height, shape.width}), {}};
  batch.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw InputError("item index " + std::to_string(indices[i]) + " out of range");
    std::copy_n(pixels.data() + indices[i] * numel, numel, batch.images.raw() + i * numel);
    batch.labels.push_back(labels[indices[i]]);
  }
  return batch;
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  Dataset out;
  out.shape = shape;
  out.class_names = class_names;
  out.split = split;
  const std::size_t numel = image_numel();
  out.pixels.reserve(indices.size() * numel);
  out.labels.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= size()) throw InputError("item index " + std::to_string(idx) + " out of range");
    out.pixels.insert(out.pixels.end(), pixels.begin() + idx * numel,
                      pixels.begin() + (idx + 1) * numel);
    out.labels.push_back(labels[idx]);
  }
  return out;
}

Dataset load_dataset(const DatasetManifest& m) {
  const RawSplit raw = read_raw_split(m);
  Dataset ds;
  ds.shape = m.shape;
  ds.class_names = m.class_names;
  ds.split = m.split;
  ds.labels.assign(raw.labels.begin(), raw.labels.end());
  ds.pixels.resize(raw.pixels.size());
  const std::size_t plane = m.shape.height * m.shape.width;
  const std::size_t c = m.shape.channels;
  for (std::size_t i = 0; i < raw.count(); ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (i * c + ch) * plane;
      const double mean = m.norm.mean[ch];
      const double inv = 1.0 / m.norm.stddev[ch];
      for (std::size_t k = 0; k < plane; ++k) {
        ds.pixels[base + k] = (static_cast<double>(raw.pixels[base + k]) - mean) * inv;
      }
    }
  }
  return ds;
}

DatasetSplits read_dataset_dir(const fs::path& dir) {
  return {read_manifest(dir / "train.manifest"), read_manifest(dir / "valid.manifest"),
          read_manifest(dir / "test.manifest")};
}

LoadedSplits load_dataset_dir(const fs::path& dir) {
  const DatasetSplits s = read_dataset_dir(dir);
  return {load_dataset(s.train), load_dataset(s.valid), load_dataset(s.test)};
}

ClassSubset ClassSubset::create(std::span<const int> class_ids, std::size_t parent_classes) {
  if (class_ids.empty()) throw InputError("class subset must not be empty");
  ClassSubset subset;
  subset.remap.assign(parent_classes, -1);
  for (int id : class_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= parent_classes) {
      throw InputError("class id " + std::to_string(id) + " outside [0, " +
                       std::to_string(parent_classes) + ")");
    }
    if (subset.remap[id] >= 0) throw InputError("duplicate class id " + std::to_string(id));
    subset.remap[id] = static_cast<int>(subset.class_ids.size());
    subset.class_ids.push_back(id);
  }
  return subset;
}

DatasetSplits make_class_subset(const DatasetSplits& parent, std::span<const int> class_ids,
                                const fs::path& out_dir) {
  const ClassSubset subset = ClassSubset::create(class_ids, parent.train.class_names.size());
  std::vector<std::string> names;
  for (int id : subset.class_ids) names.push_back(parent.train.class_names[id]);

  auto filter = [&](const DatasetManifest& m) {
    const RawSplit raw = read_raw_split(m);
    RawSplit out;
    out.shape = raw.shape;
    const std::size_t numel = raw.shape.channels * raw.shape.height * raw.shape.width;
    for (std::size_t i = 0; i < raw.count(); ++i) {
      const int label = static_cast<int>(raw.labels[i]);
      if (!subset.contains(label)) continue;
      out.labels.push_back(static_cast<std::uint32_t>(subset.remap[label]));
      out.pixels.insert(out.pixels.end(), raw.pixels.begin() + i * numel,
                        raw.pixels.begin() + (i + 1) * numel);
    }
    return out;
  };
  const RawSplit train = filter(parent.train);
  const RawSplit valid = filter(parent.valid);
  const RawSplit test = filter(parent.test);
  const NormStats norm = compute_norm_stats(train);
  return {write_split(out_dir, "train", train, Split::kTrain, names, norm),
          write_split(out_dir, "valid", valid, Split::kValid, names, norm),
          write_split(out_dir, "test", test, Split::kTest, names, norm)};
}

std::vector<int> random_class_ids(std::size_t parent_classes, std::size_t k, std::uint64_t seed) {
  if (k == 0 || k > parent_classes) {
    throw InputError("cannot pick " + std::to_string(k) + " of " +
                     std::to_string(parent_classes) + " classes");
  }
  Rng rng(seed);
  const std::vector<std::size_t> order = random_permutation(parent_classes, rng);
  std::vector<int> ids(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(ids.begin(), ids.end());
  return ids;
}

Dataset filter_classes(const Dataset& dataset, const ClassSubset& subset) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (subset.contains(dataset.labels[i])) keep.push_back(i);
  }
  return dataset.select(keep);
}

std::vector<std::size_t> subsample_indices(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InputError("subsample fraction must lie in (0, 1], got " + format_double(fraction));
  }
  // The small epsilon keeps products such as 0.29*100 from flooring to 28.
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  Rng rng(seed);
  std::vector<std::size_t> order = random_permutation(n, rng);
  order.resize(std::min(k, n));
  std::sort(order.begin(), order.end());
  return order;
}

Dataset subsample(const Dataset& dataset, double fraction, std::uint64_t seed) {
  return dataset.select(subsample_indices(dataset.size(), fraction, seed));
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size == 0) throw InputError("batch size must be at least 1");
  std::vector<std::size_t> order;
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    order = random_permutation(n, rng);
  } else {
    order.resize(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace fprune
