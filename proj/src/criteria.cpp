#include "fprune/criteria.hpp"

#include <algorithm>

#include "fprune/errors.hpp"
#include "fprune/rng.hpp"

namespace fprune {

const std::vector<CriterionInfo>& registered_criteria() {
  static const std::vector<CriterionInfo> all = {
      {"random", false, true},          {"mean_activation", true, false},
      {"l1_norm", false, false},        {"entropy", true, false},
      {"scaled_entropy", true, false},  {"apoz", true, false},
      {"sensitivity", true, false},     {"class_specific", true, false},
  };
  return all;
}

bool is_registered_criterion(const std::string& name) {
  const auto& all = registered_criteria();
  return std::any_of(all.begin(), all.end(), [&](const CriterionInfo& c) { return c.name == name; });
}

const CriterionInfo& criterion_info(const std::string& name) {
  for (const CriterionInfo& c : registered_criteria()) {
    if (c.name == name) return c;
  }
  throw InputError("unknown criterion '" + name + "'");
}

ScoreVector score_layer(const std::string& criterion, const Network& network, int layer_id,
                        const ScoringContext& context) {
  const CriterionInfo& info = criterion_info(criterion);
  if (info.needs_data && (context.data == nullptr || context.data->empty())) {
    throw StateError("criterion " + criterion + " needs a non-empty scoring dataset");
  }
  const LayerSpec& layer = find_layer(network.spec(), layer_id);
  if (layer.kind != LayerKind::kConv) {
    throw InputError("layer " + std::to_string(layer_id) + " is not a conv layer");
  }
  if (criterion == "random") {
    ScoreVector s = random_scores(layer.conv.filters, derive_seed(context.seed, layer_id));
    s.layer_id = layer_id;
    return s;
  }
  if (criterion == "l1_norm") return l1_norm_scores(network, layer_id);
  if (criterion == "sensitivity") {
    return sensitivity_scores(network, *context.data, layer_id, context.batch_size);
  }
  if (criterion == "class_specific") {
    return class_specific_scores(network, *context.data, layer_id, context.class_subset,
                                 context.batch_size);
  }
  const FilterStats stats =
      collect_filter_stats(network, *context.data, layer_id, context.batch_size);
  if (criterion == "mean_activation") return mean_activation_scores(stats);
  if (criterion == "apoz") return apoz_scores(stats);
  if (criterion == "entropy") return entropy_scores(stats, context.bins);
  return scaled_entropy_scores(stats, context.bins);
}

}  // namespace fprune
