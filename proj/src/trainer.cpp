#include "fprune/trainer.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "fprune/errors.hpp"
#include "fprune/rng.hpp"
#include "fprune/sgd.hpp"

namespace fprune {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must be in (0, 1]");
  if (batch_size == 0 || eval_batch_size == 0) throw ConfigError("batch size must be positive");
}

namespace {

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
  const std::size_t k = logits.dim(1);
  const double* p = logits.raw() + row * k;
  return static_cast<std::size_t>(std::max_element(p, p + k) - p);
}

}  // namespace

double evaluate(const Network& network, const Dataset& dataset, std::size_t batch_size) {
  if (dataset.empty()) throw InputError("cannot evaluate on an empty dataset");
  std::size_t correct = 0;
  for (const auto& idx : make_batches(dataset.size(), batch_size, std::nullopt)) {
    const Batch batch = dataset.gather(idx);
    const Tensor logits = network.logits(batch.images);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      correct += argmax_row(logits, i) == static_cast<std::size_t>(batch.labels[i]);
    }
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

TrainResult train(Network network, const Dataset& train_set, const Dataset* valid_set,
                  const TrainConfig& config) {
  config.validate();
  if (config.epochs > 0 && train_set.empty()) throw InputError("training set is empty");
  TrainResult result{network, {}, 0};
  std::optional<double> best;
  const SgdOptions opts{config.lr, config.momentum, config.weight_decay};
  SgdState state;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches =
        make_batches(train_set.size(), config.batch_size, derive_seed(config.seed, epoch));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Batch batch = train_set.gather(batches[b]);
      BackwardResult r = network.backward(batch.images, batch.labels);
      if (!std::isfinite(r.loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(b + 1));
      }
      loss_sum += r.loss * static_cast<double>(batches[b].size());
      for (std::size_t i = 0; i < batches[b].size(); ++i) {
        correct += argmax_row(r.logits, i) == static_cast<std::size_t>(batch.labels[i]);
      }
      sgd_step(network.parameter_tensors(), gradient_tensors(r.grads), opts, state);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = loss_sum / static_cast<double>(train_set.size());
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
    if (valid_set != nullptr) {
      stats.valid_accuracy = evaluate(network, *valid_set, config.eval_batch_size);
      if (!best || *stats.valid_accuracy > *best) {
        best = stats.valid_accuracy;
        result.network = network;
        result.best_epoch = epoch;
      }
    }
    spdlog::debug("epoch {} loss {:.4f} train {:.4f} valid {}", epoch, stats.loss,
                  stats.train_accuracy,
                  stats.valid_accuracy ? std::to_string(*stats.valid_accuracy) : "-");
    result.curve.push_back(stats);
  }
  if (valid_set == nullptr && config.epochs > 0) {
    result.network = std::move(network);
    result.best_epoch = config.epochs;
  }
  return result;
}

TrainResult finetune(Network network, const Dataset& train_set, const Dataset& valid_set,
                     const TrainConfig& config) {
  config.validate();
  if (config.fraction >= 1.0) return train(std::move(network), train_set, &valid_set, config);
  const Dataset part = subsample(train_set, config.fraction, derive_seed(config.seed, 0));
  return train(std::move(network), part, &valid_set, config);
}

std::size_t recovery_speed(const std::vector<double>& curve, double share) {
  if (curve.empty()) return 0;
  const double target = share * *std::max_element(curve.begin(), curve.end());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i] >= target) return i + 1;
  }
  return curve.size();
}

std::size_t RecoveryTrace::recovery_epoch() const { return recovery_speed(final_curve); }

void RecoveryTrace::check() const {
  auto in_range = [](double a) { return a >= 0.0 && a <= 1.0; };
  bool ok = in_range(baseline) && in_range(final_accuracy);
  for (const LayerRecord& r : layers) ok = ok && in_range(r.after_surgery) && in_range(r.after_finetune);
  for (double a : final_curve) ok = ok && in_range(a);
  if (test_accuracy) ok = ok && in_range(*test_accuracy);
  if (!ok) throw ValidationError("trace for " + criterion + " has an accuracy outside [0, 1]");
}

}  // namespace fprune
