#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fprune/dataset.hpp"
#include "fprune/filter_stats.hpp"
#include "fprune/network.hpp"

namespace fprune {

struct CriterionInfo {
  std::string name;
  bool needs_data = false;  // scores depend on a pass over a dataset
  bool uses_seed = false;   // scores depend on the criterion seed
};

// random, mean_activation, l1_norm, entropy, scaled_entropy, apoz,
// sensitivity, class_specific
const std::vector<CriterionInfo>& registered_criteria();
const CriterionInfo& criterion_info(const std::string& name);  // InputError if unknown
bool is_registered_criterion(const std::string& name);

struct ScoringContext {
  const Dataset* data = nullptr;  // scoring images, required when needs_data
  std::size_t batch_size = 64;
  std::size_t bins = kDefaultEntropyBins;
  std::uint64_t seed = 0;         // criterion seed
  std::vector<int> class_subset;  // class_specific only
};

// Scores of every filter of conv layer `layer_id` under the named criterion.
// The random criterion draws from derive_seed(seed, layer_id).
ScoreVector score_layer(const std::string& criterion, const Network& network, int layer_id,
                        const ScoringContext& context);

}  // namespace fprune
