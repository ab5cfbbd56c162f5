#include "fprune/filter_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fprune/errors.hpp"
#include "fprune/io_util.hpp"
#include "fprune/rng.hpp"

namespace fprune {

FilterStats::FilterStats(int layer_id, std::size_t filters)
    : layer_id_(layer_id),
      filters_(filters),
      mean_sum_(filters, 0.0),
      zeros_(filters, 0),
      elements_(filters, 0),
      min_(filters, std::numeric_limits<double>::infinity()),
      max_(filters, -std::numeric_limits<double>::infinity()),
      samples_(filters) {
  if (filters == 0) throw InputError("filter stats need at least one filter");
}

void FilterStats::accumulate(const Tensor& activation) {
  if (activation.rank() != 4 || activation.dim(1) != filters_) {
    throw ShapeError("activation", "layer " + std::to_string(layer_id_) + " expects [N, " +
                                       std::to_string(filters_) + ", h, w], got " +
                                       activation.shape_string());
  }
  const std::size_t n = activation.dim(0);
  const std::size_t plane = activation.dim(2) * activation.dim(3);
  const double* a = activation.raw();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < filters_; ++f) {
      const double* p = a + (i * filters_ + f) * plane;
      double sum = 0.0;
      std::uint64_t zeros = 0;
      for (std::size_t k = 0; k < plane; ++k) {
        sum += p[k];
        zeros += p[k] == 0.0;
      }
      const double mean = sum / static_cast<double>(plane);
      mean_sum_[f] += mean;
      zeros_[f] += zeros;
      elements_[f] += plane;
      min_[f] = std::min(min_[f], mean);
      max_[f] = std::max(max_[f], mean);
      samples_[f].push_back(mean);
    }
  }
  images_ += n;
}

void FilterStats::merge(const FilterStats& other) {
  if (other.layer_id_ != layer_id_ || other.filters_ != filters_) {
    throw InputError("cannot merge stats of layer " + std::to_string(other.layer_id_) +
                     " into layer " + std::to_string(layer_id_));
  }
  for (std::size_t f = 0; f < filters_; ++f) {
    mean_sum_[f] += other.mean_sum_[f];
    zeros_[f] += other.zeros_[f];
    elements_[f] += other.elements_[f];
    min_[f] = std::min(min_[f], other.min_[f]);
    max_[f] = std::max(max_[f], other.max_[f]);
    samples_[f].insert(samples_[f].end(), other.samples_[f].begin(), other.samples_[f].end());
  }
  images_ += other.images_;
}

std::vector<std::uint64_t> FilterStats::histogram(std::size_t f, std::size_t bins) const {
  if (bins < 2) throw InputError("entropy needs at least 2 bins, got " + std::to_string(bins));
  std::vector<std::uint64_t> counts(bins, 0);
  const double lo = min_[f], hi = max_[f];
  for (double v : samples_[f]) {
    std::size_t b = 0;
    if (hi > lo) {
      const double pos = (v - lo) / (hi - lo) * static_cast<double>(bins);
      b = std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, pos)));
    }
    ++counts[b];
  }
  return counts;
}

namespace {

void require_images(const FilterStats& stats) {
  if (stats.images() == 0) {
    throw StateError("no images accumulated for layer " + std::to_string(stats.layer_id()));
  }
}

ScoreVector make_scores(int layer_id, const char* criterion, std::size_t n) {
  ScoreVector out;
  out.layer_id = layer_id;
  out.criterion = criterion;
  out.scores.assign(n, 0.0);
  return out;
}

const LayerSpec& conv_layer(const Network& network, int layer_id) {
  const LayerSpec& layer = find_layer(network.spec(), layer_id);
  if (layer.kind != LayerKind::kConv) {
    throw InputError("layer " + std::to_string(layer_id) + " is a " +
                     layer_kind_name(layer.kind) + ", not a conv layer");
  }
  return layer;
}

}  // namespace

FilterStats collect_filter_stats(const Network& network, const Dataset& dataset, int layer_id,
                                 std::size_t batch_size) {
  const LayerSpec& layer = conv_layer(network, layer_id);
  FilterStats stats(layer_id, layer.conv.filters);
  for (const auto& idx : make_batches(dataset.size(), batch_size, std::nullopt)) {
    const Batch batch = dataset.gather(idx);
    const ForwardResult out = network.forward(batch.images, {layer_id});
    stats.accumulate(out.taps.at(layer_id));
  }
  return stats;
}

ScoreVector mean_activation_scores(const FilterStats& stats) {
  require_images(stats);
  ScoreVector out = make_scores(stats.layer_id(), "mean_activation", stats.filters());
  for (std::size_t f = 0; f < stats.filters(); ++f) {
    out.scores[f] = stats.mean_sum(f) / static_cast<double>(stats.images());
  }
  return out;
}

ScoreVector apoz_scores(const FilterStats& stats) {
  require_images(stats);
  ScoreVector out = make_scores(stats.layer_id(), "apoz", stats.filters());
  out.meta.raw_apoz.resize(stats.filters());
  for (std::size_t f = 0; f < stats.filters(); ++f) {
    const double apoz = static_cast<double>(stats.zero_count(f)) /
                        static_cast<double>(stats.element_count(f));
    out.meta.raw_apoz[f] = apoz;
    out.scores[f] = 1.0 - apoz;
  }
  return out;
}

ScoreVector entropy_scores(const FilterStats& stats, std::size_t bins) {
  if (bins < 2) throw InputError("entropy needs at least 2 bins, got " + std::to_string(bins));
  require_images(stats);
  ScoreVector out = make_scores(stats.layer_id(), "entropy", stats.filters());
  out.meta.bins = bins;
  const double n = static_cast<double>(stats.images());
  for (std::size_t f = 0; f < stats.filters(); ++f) {
    double e = 0.0;
    for (std::uint64_t c : stats.histogram(f, bins)) {
      if (c == 0) continue;
      const double p = static_cast<double>(c) / n;
      e -= p * std::log(p);
    }
    out.scores[f] = e;
  }
  return out;
}

ScoreVector scaled_entropy_scores(const FilterStats& stats, std::size_t bins) {
  ScoreVector out = entropy_scores(stats, bins);
  const ScoreVector mean = mean_activation_scores(stats);
  out.criterion = "scaled_entropy";
  for (std::size_t f = 0; f < out.size(); ++f) out.scores[f] *= mean.scores[f];
  return out;
}

ScoreVector sensitivity_scores(const Network& network, const Dataset& dataset, int layer_id,
                               std::size_t batch_size) {
  const LayerSpec& layer = conv_layer(network, layer_id);
  if (dataset.empty()) throw StateError("sensitivity needs a non-empty dataset");
  const std::size_t n = layer.conv.filters;
  ScoreVector out = make_scores(layer_id, "sensitivity", n);
  std::size_t batches = 0;
  for (const auto& idx : make_batches(dataset.size(), batch_size, std::nullopt)) {
    const Batch batch = dataset.gather(idx);
    const BackwardResult r = network.backward(batch.images, batch.labels);
    const Tensor& g = r.grads.at(layer_id).weight;
    const std::size_t per_filter = g.size() / n;
    const double* p = g.raw();
    for (std::size_t f = 0; f < n; ++f) {
      double l1 = 0.0;
      for (std::size_t k = 0; k < per_filter; ++k) l1 += std::abs(p[f * per_filter + k]);
      out.scores[f] += l1;
    }
    ++batches;
  }
  for (double& s : out.scores) s /= static_cast<double>(batches);
  return out;
}

ScoreVector class_specific_scores(const Network& network, const Dataset& dataset, int layer_id,
                                  const std::vector<int>& class_subset, std::size_t batch_size) {
  conv_layer(network, layer_id);
  const ClassSubset subset = ClassSubset::create(class_subset, dataset.num_classes());
  const Dataset filtered = filter_classes(dataset, subset);
  if (filtered.empty()) {
    throw InputError("no images of the requested classes in the dataset");
  }
  ScoreVector out = sensitivity_scores(network, filtered, layer_id, batch_size);
  out.criterion = "class_specific";
  out.meta.class_subset = class_subset;
  return out;
}

ScoreVector l1_norm_scores(const Network& network, int layer_id) {
  const LayerSpec& layer = conv_layer(network, layer_id);
  const Tensor& w = network.params(layer_id).weight;
  const std::size_t n = layer.conv.filters;
  const std::size_t per_filter = w.size() / n;
  ScoreVector out = make_scores(layer_id, "l1_norm", n);
  const double* p = w.raw();
  for (std::size_t f = 0; f < n; ++f) {
    double l1 = 0.0;
    for (std::size_t k = 0; k < per_filter; ++k) l1 += std::abs(p[f * per_filter + k]);
    out.scores[f] = l1;
  }
  return out;
}

ScoreVector random_scores(std::size_t n_filters, std::uint64_t seed) {
  if (n_filters == 0) throw InputError("random scores need at least one filter");
  ScoreVector out = make_scores(0, "random", n_filters);
  out.meta.seed = seed;
  Rng rng(seed);
  const std::vector<std::size_t> perm = random_permutation(n_filters, rng);
  for (std::size_t i = 0; i < n_filters; ++i) out.scores[i] = static_cast<double>(perm[i]);
  return out;
}

std::string format_scores_csv(const std::vector<ScoreVector>& scores, bool header) {
  std::ostringstream os;
  if (header) os << "layer,filter,criterion,score\n";
  for (const ScoreVector& sv : scores) {
    for (std::size_t f = 0; f < sv.size(); ++f) {
      os << sv.layer_id << ',' << f << ',' << sv.criterion << ',' << format_double(sv.scores[f])
         << '\n';
    }
  }
  return os.str();
}

}  // namespace fprune
