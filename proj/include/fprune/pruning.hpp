#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fprune/filter_stats.hpp"
#include "fprune/network.hpp"

namespace fprune {

// Filters kept when pruning m percent of n: max(1, floor(n * (100 - m) / 100)).
std::size_t retained_count(std::size_t n, int m_percent);

// Indices of the m_retain largest scores, ties to the lower index, returned
// in ascending order.
std::vector<std::size_t> select_top_m(const ScoreVector& scores, std::size_t m_retain);

struct SurgeryRecord {
  int layer_id = 0;
  std::size_t filters_before = 0;
  std::size_t filters_after = 0;
  std::vector<std::size_t> removed;
  std::vector<int> successors;
  std::uint64_t params_before = 0;
  std::uint64_t params_after = 0;
  std::uint64_t macs_before = 0;
  std::uint64_t macs_after = 0;
};

// Parameterized layer consuming the output of conv `layer_id`: the next conv,
// the fc after a flatten, or the next conv inside the same residual block.
// Throws ConstraintError when the output feeds a skip connection.
int pruning_successor(const NetworkSpec& spec, int layer_id);

// Keeps filters `keep` (strictly ascending, non-empty, < n_k) of conv
// `layer_id` and drops the matching input slices of its successor.
SurgeryRecord prune_layer(Network& network, int layer_id, const std::vector<std::size_t>& keep);

enum class ResidualMode { kFirstOnly, kFirstTwo };
const char* residual_mode_name(ResidualMode mode);
ResidualMode parse_residual_mode(const std::string& name);

// Block conv ids to prune, from the last block to the first, descending
// within a block.
std::vector<int> residual_prunable_layers(const NetworkSpec& spec, ResidualMode mode);

// First two conv ids for plain chains, nothing for residual networks.
std::vector<int> default_exclude_layers(const NetworkSpec& spec);

// Layers visited by the pruning loop, in descending id order. Residual
// networks use residual_prunable_layers; chains use every conv with a
// parameterized successor. `exclude` ids are removed in both cases.
std::vector<int> prunable_layers(const NetworkSpec& spec, const std::vector<int>& exclude,
                                 ResidualMode mode = ResidualMode::kFirstTwo);

// Keeps only the output rows of the final fc layer for `class_ids` (in that
// order), so class i of the result is parent class class_ids[i].
void restrict_classes(Network& network, const std::vector<int>& class_ids);

struct PlanEntry {
  int layer_id = 0;
  std::vector<std::size_t> keep;
};

struct PruningPlan {
  std::string criterion;
  int m_percent = 0;
  std::vector<PlanEntry> layers;
  std::size_t per_layer_epochs = 0;
  std::size_t final_epochs = 0;
  double per_layer_fraction = 1.0;
  double final_fraction = 1.0;
  std::uint64_t train_seed = 0;
  std::uint64_t criterion_seed = 0;
};

}  // namespace fprune
