#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fprune/dataset.hpp"
#include "fprune/network.hpp"
#include "fprune/tensor.hpp"

namespace fprune {

inline constexpr std::size_t kDefaultEntropyBins = 16;

// Streaming activation statistics of one conv layer's post-ReLU output.
class FilterStats {
 public:
  FilterStats(int layer_id, std::size_t filters);

  int layer_id() const noexcept { return layer_id_; }
  std::size_t filters() const noexcept { return filters_; }
  std::size_t images() const noexcept { return images_; }

  // activation: [N, n_k, h, w]
  void accumulate(const Tensor& activation);
  // Combines two accumulators of the same layer. Per-image samples are
  // appended in (this, other) order; every other field is order independent.
  void merge(const FilterStats& other);

  double mean_sum(std::size_t f) const { return mean_sum_[f]; }
  std::uint64_t zero_count(std::size_t f) const { return zeros_[f]; }
  std::uint64_t element_count(std::size_t f) const { return elements_[f]; }
  double min_mean(std::size_t f) const { return min_[f]; }
  double max_mean(std::size_t f) const { return max_[f]; }
  // Per-image spatial means of filter f in accumulation order.
  const std::vector<double>& samples(std::size_t f) const { return samples_[f]; }

  // Equal-width histogram over [min_f, max_f]; all mass in bin 0 when the
  // range is degenerate. Counts sum to images().
  std::vector<std::uint64_t> histogram(std::size_t f, std::size_t bins) const;

 private:
  int layer_id_;
  std::size_t filters_;
  std::size_t images_ = 0;
  std::vector<double> mean_sum_;
  std::vector<std::uint64_t> zeros_;
  std::vector<std::uint64_t> elements_;
  std::vector<double> min_;
  std::vector<double> max_;
  std::vector<std::vector<double>> samples_;
};

struct ScoreMeta {
  std::size_t bins = 0;
  std::optional<std::uint64_t> seed;
  std::vector<int> class_subset;
  std::vector<double> raw_apoz;  // zero fractions, apoz only
};

// One score per filter; larger means more important for every criterion.
struct ScoreVector {
  int layer_id = 0;
  std::string criterion;
  std::vector<double> scores;
  ScoreMeta meta;

  std::size_t size() const { return scores.size(); }
};

// Runs the network over `dataset` in sequential batches and accumulates the
// tapped output of `layer_id`.
FilterStats collect_filter_stats(const Network& network, const Dataset& dataset, int layer_id,
                                 std::size_t batch_size);

ScoreVector mean_activation_scores(const FilterStats& stats);
ScoreVector apoz_scores(const FilterStats& stats);
ScoreVector entropy_scores(const FilterStats& stats, std::size_t bins = kDefaultEntropyBins);
ScoreVector scaled_entropy_scores(const FilterStats& stats,
                                  std::size_t bins = kDefaultEntropyBins);

// Mean over sequential batches of the per-filter l1 norm of dL/dW.
// batch_size 1 gives the per-image variant.
ScoreVector sensitivity_scores(const Network& network, const Dataset& dataset, int layer_id,
                               std::size_t batch_size);
// Sensitivity restricted to images of the given (parent) class ids: the
// dataset is filtered to those images, order preserved, then batched as in
// sensitivity_scores.
ScoreVector class_specific_scores(const Network& network, const Dataset& dataset, int layer_id,
                                  const std::vector<int>& class_subset, std::size_t batch_size);
ScoreVector l1_norm_scores(const Network& network, int layer_id);
// Seeded uniform permutation of the ranks 0..n-1.
ScoreVector random_scores(std::size_t n_filters, std::uint64_t seed);

// Rows of "layer,filter,criterion,score".
std::string format_scores_csv(const std::vector<ScoreVector>& scores, bool header = true);

}  // namespace fprune
