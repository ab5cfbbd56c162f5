#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fprune/dataset.hpp"
#include "fprune/filter_stats.hpp"
#include "fprune/network.hpp"
#include "fprune/pruning.hpp"
#include "fprune/trainer.hpp"

namespace fprune {

struct PruneSchedule {
  std::size_t per_layer_epochs = 1;  // p
  std::size_t final_epochs = 4;      // q
  double per_layer_fraction = 1.0;
  double final_fraction = 0.1;
  // lr, momentum, weight decay, batch size and seed of every fine-tune;
  // epochs and fraction are taken from the fields above.
  TrainConfig finetune;
  std::size_t score_batch_size = 64;
  std::size_t entropy_bins = 16;

  void validate() const;
};

struct PruneOptions {
  std::string criterion = "l1_norm";
  int m_percent = 50;
  PruneSchedule schedule;
  std::optional<std::vector<int>> exclude;  // default_exclude_layers when unset
  ResidualMode residual_mode = ResidualMode::kFirstTwo;
  std::uint64_t criterion_seed = 1;
  std::vector<int> class_subset;  // class_specific only
  // When set, the network and progress are written here after every layer
  // and on failure; `resume` continues from them.
  std::filesystem::path checkpoint_dir;
  bool resume = false;
};

struct PruneResult {
  Network network;
  Network before_final;  // after the last layer, before the final fine-tune
  PruningPlan plan;
  std::vector<SurgeryRecord> surgeries;
  RecoveryTrace trace;
  std::vector<ScoreVector> scores;  // layers scored in this call
};

// Prunes layers from last to first: score on the current network, keep the
// top filters, fine-tune for p epochs; then fine-tune q epochs on
// final_fraction of the data. Accuracies are measured on valid_set; test_set,
// when given, is evaluated once at the end.
PruneResult prune_network(Network network, const PruneOptions& options, const Dataset& train_set,
                          const Dataset& valid_set, const Dataset* test_set = nullptr);

}  // namespace fprune
