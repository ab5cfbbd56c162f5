#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fprune/prune_driver.hpp"

namespace fprune {

struct ExperimentSetup {
  std::vector<std::string> criteria;
  std::vector<int> levels;
  // Criteria that use a seed run once per seed; the others run once.
  std::vector<std::uint64_t> criterion_seeds = {1};
  PruneOptions base;  // schedule, exclusions, residual mode, class subset
  bool data_quantum = false;
  std::vector<double> quantum_fractions = {0.1, 0.25, 0.5, 1.0};
  std::vector<std::string> quantum_criteria = {"random", "l1_norm"};

  void validate() const;
};

struct ComparisonCell {
  std::string criterion;
  int m_percent = 0;
  std::vector<double> finals;  // validation accuracy per run
  double mean = 0.0;
  std::optional<double> test_mean;
};

// Final fine-tune repeated on a different share of the training data.
struct QuantumCurve {
  std::string criterion;
  int m_percent = 0;
  double fraction = 1.0;
  std::vector<double> curve;
  double final_accuracy = 0.0;
};

struct ExperimentReport {
  double baseline = 0.0;
  std::vector<RecoveryTrace> traces;
  std::vector<ComparisonCell> table;  // criteria x levels, in setup order
  std::vector<QuantumCurve> quantum;

  const ComparisonCell& cell(const std::string& criterion, int m_percent) const;
};

ExperimentReport recovery_experiment(const Network& base, const ExperimentSetup& setup,
                                     const Dataset& train_set, const Dataset& valid_set,
                                     const Dataset* test_set = nullptr);

// criterion,m,runs,valid_accuracy,test_accuracy (one row per cell)
std::string format_comparison_csv(const ExperimentReport& report);
// One row per criterion, one column per level.
std::string format_comparison_table(const ExperimentReport& report);
// criterion,m,fraction,epoch,accuracy
std::string format_quantum_csv(const ExperimentReport& report);
void to_json(nlohmann::json& j, const ExperimentReport& report);

}  // namespace fprune
