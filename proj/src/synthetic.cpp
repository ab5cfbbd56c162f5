#include "fprune/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "fprune/errors.hpp"
#include "fprune/io_util.hpp"
#include "fprune/rng.hpp"

namespace fs = std::filesystem;

namespace fprune {

const std::vector<std::string>& synthetic_class_names() {
  static const std::vector<std::string> names = {
      "hbar", "vbar", "diag", "antidiag", "square", "frame", "disk", "ring", "plus", "cross"};
  return names;
}

namespace {

struct ShapeParams {
  double cx, cy, r, t;
};

bool inside(int label, const ShapeParams& s, double x, double y) {
  const double dx = x - s.cx, dy = y - s.cy;
  const double box = std::max(std::abs(dx), std::abs(dy));
  const double dist = std::sqrt(dx * dx + dy * dy);
  const double d1 = std::abs(dx - dy) / std::numbers::sqrt2;
  const double d2 = std::abs(dx + dy) / std::numbers::sqrt2;
  const bool hbar = std::abs(dy) < s.t && std::abs(dx) < s.r;
  const bool vbar = std::abs(dx) < s.t && std::abs(dy) < s.r;
  const bool diag = d1 < s.t && box < s.r;
  const bool anti = d2 < s.t && box < s.r;
  switch (label) {
    case 0: return hbar;
    case 1: return vbar;
    case 2: return diag;
    case 3: return anti;
    case 4: return box < s.r;
    case 5: return box < s.r && box > s.r - 1.3 * s.t;
    case 6: return dist < s.r;
    case 7: return dist < s.r && dist > s.r - 1.3 * s.t;
    case 8: return hbar || vbar;
    case 9: return diag || anti;
    default: return false;
  }
}

std::array<double, 3> random_colour(Rng& rng) {
  return {rng.uniform(), rng.uniform(), rng.uniform()};
}

double luminance(const std::array<double, 3>& c) { return (c[0] + c[1] + c[2]) / 3.0; }

void draw_image(int label, std::size_t size, double noise, Rng& rng, float* out) {
  const double s = static_cast<double>(size);
  const std::array<double, 3> bg = random_colour(rng);
  std::array<double, 3> fg = random_colour(rng);
  while (std::abs(luminance(fg) - luminance(bg)) < 0.2) fg = random_colour(rng);
  const ShapeParams shape{rng.uniform(0.35, 0.65) * s, rng.uniform(0.35, 0.65) * s,
                          rng.uniform(0.2, 0.32) * s, rng.uniform(0.05, 0.09) * s};
  // Linear background shading.
  const double gx = rng.uniform(-0.15, 0.15), gy = rng.uniform(-0.15, 0.15);
  // One small distractor patch.
  const std::array<double, 3> patch = random_colour(rng);
  const double px = rng.uniform(0.0, s), py = rng.uniform(0.0, s);
  const double pw = rng.uniform(0.06, 0.12) * s;
  const std::size_t plane = size * size;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double fx = static_cast<double>(x) + 0.5, fy = static_cast<double>(y) + 0.5;
      const bool on = inside(label, shape, fx, fy);
      const bool on_patch = std::abs(fx - px) < pw && std::abs(fy - py) < pw;
      const double shade = gx * (fx / s - 0.5) + gy * (fy / s - 0.5);
      for (std::size_t c = 0; c < 3; ++c) {
        double v = on ? fg[c] : (on_patch ? patch[c] : bg[c] + shade);
        v += noise * rng.normal();
        out[c * plane + y * size + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
}

}  // namespace

RawSplit generate_synthetic_split(const SyntheticConfig& config, Split split, std::size_t count) {
  if (config.image_size < 8) throw InputError("synthetic images need at least 8x8 pixels");
  const std::size_t classes = synthetic_class_names().size();
  RawSplit raw;
  raw.shape = {3, config.image_size, config.image_size};
  const std::size_t numel = 3 * config.image_size * config.image_size;
  Rng order_rng(derive_seed(config.seed, 100 + static_cast<std::uint64_t>(split)));
  const std::vector<std::size_t> order = random_permutation(count, order_rng);
  raw.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    raw.labels[order[i]] = static_cast<std::uint32_t>(i % classes);
  }
  raw.pixels.resize(count * numel);
  Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(split)));
  for (std::size_t i = 0; i < count; ++i) {
    draw_image(static_cast<int>(raw.labels[i]), config.image_size, config.noise, rng,
               raw.pixels.data() + i * numel);
  }
  return raw;
}

DatasetSplits write_synthetic_dataset(const SyntheticConfig& config, const fs::path& dir) {
  const RawSplit train = generate_synthetic_split(config, Split::kTrain, config.train);
  const RawSplit valid = generate_synthetic_split(config, Split::kValid, config.valid);
  const RawSplit test = generate_synthetic_split(config, Split::kTest, config.test);
  const NormStats norm = compute_norm_stats(train);
  const auto& names = synthetic_class_names();
  return {write_split(dir, "train", train, Split::kTrain, names, norm),
          write_split(dir, "valid", valid, Split::kValid, names, norm),
          write_split(dir, "test", test, Split::kTest, names, norm)};
}

RawSplit import_raw_records(const std::vector<fs::path>& files, ImageShape shape,
                            std::size_t label_bytes) {
  if (label_bytes == 0) throw InputError("records need at least one label byte");
  RawSplit raw;
  raw.shape = shape;
  const std::size_t numel = shape.channels * shape.height * shape.width;
  const std::size_t record = label_bytes + numel;
  for (const fs::path& file : files) {
    const Bytes bytes = read_file(file);
    if (bytes.size() % record != 0) {
      throw LoadError(ErrorCode::kCountMismatch,
                      file.string() + ": size " + std::to_string(bytes.size()) +
                          " is not a multiple of the record size " + std::to_string(record));
    }
    for (std::size_t off = 0; off < bytes.size(); off += record) {
      raw.labels.push_back(bytes[off + label_bytes - 1]);
      for (std::size_t k = 0; k < numel; ++k) {
        raw.pixels.push_back(static_cast<float>(bytes[off + label_bytes + k]) / 255.0f);
      }
    }
  }
  return raw;
}

}  // namespace fprune
