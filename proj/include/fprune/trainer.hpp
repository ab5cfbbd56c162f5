#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fprune/dataset.hpp"
#include "fprune/network.hpp"

namespace fprune {

struct TrainConfig {
  double lr = 0.02;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double fraction = 1.0;  // share of the training split used
  std::size_t eval_batch_size = 250;

  void validate() const;  // ConfigError
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean training loss
  double train_accuracy = 0.0;
  std::optional<double> valid_accuracy;
};

struct TrainResult {
  Network network;
  std::vector<EpochStats> curve;
  // Epoch of the returned weights (0 when no epoch ran).
  std::size_t best_epoch = 0;
};

// Minibatch SGD with per-epoch reshuffling (seed derived from config.seed and
// the epoch). With a validation set the weights of the epoch with the highest
// validation accuracy are returned (earliest on ties); otherwise the last.
// A non-finite loss raises NumericError naming the epoch and batch.
TrainResult train(Network network, const Dataset& train_set, const Dataset* valid_set,
                  const TrainConfig& config);

// train() on subsample(train_set, config.fraction), evaluating on valid_set
// after every epoch.
TrainResult finetune(Network network, const Dataset& train_set, const Dataset& valid_set,
                     const TrainConfig& config);

// Top-1 accuracy. Empty datasets raise InputError.
double evaluate(const Network& network, const Dataset& dataset, std::size_t batch_size = 250);

struct LayerRecord {
  int layer_id = 0;
  std::size_t filters_before = 0;
  std::size_t filters_after = 0;
  double after_surgery = 0.0;
  double after_finetune = 0.0;
};

// Validation accuracies of one pruning run.
struct RecoveryTrace {
  std::string criterion;
  int m_percent = 0;
  std::uint64_t criterion_seed = 0;
  double baseline = 0.0;
  std::vector<LayerRecord> layers;  // in pruning order
  std::vector<double> final_curve;  // per final fine-tune epoch
  double final_accuracy = 0.0;      // returned network
  std::optional<double> test_accuracy;

  // First epoch (1-based) reaching 99% of the curve maximum; 0 if empty.
  std::size_t recovery_epoch() const;
  void check() const;  // ValidationError when an accuracy leaves [0, 1]
};

std::size_t recovery_speed(const std::vector<double>& curve, double share = 0.99);

}  // namespace fprune
