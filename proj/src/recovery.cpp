#include "fprune/recovery.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "fprune/criteria.hpp"
#include "fprune/errors.hpp"
#include "fprune/io_util.hpp"
#include "fprune/reports.hpp"
#include "fprune/rng.hpp"

namespace fprune {

void ExperimentSetup::validate() const {
  if (criteria.empty()) throw ConfigError("no criteria given");
  if (levels.empty()) throw ConfigError("no pruning levels given");
  if (criterion_seeds.empty()) throw ConfigError("no criterion seeds given");
  for (const std::string& c : criteria) {
    if (!is_registered_criterion(c)) throw ConfigError("unknown criterion '" + c + "'");
  }
  for (int m : levels) {
    if (m < 0 || m >= 100) throw ConfigError("pruning level " + std::to_string(m) + " not in [0, 100)");
  }
  for (double f : quantum_fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("data fractions must be in (0, 1]");
  }
  base.schedule.validate();
}

const ComparisonCell& ExperimentReport::cell(const std::string& criterion, int m_percent) const {
  for (const ComparisonCell& c : table) {
    if (c.criterion == criterion && c.m_percent == m_percent) return c;
  }
  throw InputError("no result for " + criterion + " at m=" + std::to_string(m_percent));
}

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ExperimentReport recovery_experiment(const Network& base, const ExperimentSetup& setup,
                                     const Dataset& train_set, const Dataset& valid_set,
                                     const Dataset* test_set) {
  setup.validate();
  ExperimentReport report;
  report.baseline = evaluate(base, valid_set);
  for (const std::string& criterion : setup.criteria) {
    const bool seeded = criterion_info(criterion).uses_seed;
    const std::vector<std::uint64_t> seeds =
        seeded ? setup.criterion_seeds : std::vector<std::uint64_t>{setup.criterion_seeds[0]};
    for (int m : setup.levels) {
      ComparisonCell cell;
      cell.criterion = criterion;
      cell.m_percent = m;
      std::vector<double> tests;
      for (std::uint64_t seed : seeds) {
        PruneOptions opts = setup.base;
        opts.criterion = criterion;
        opts.m_percent = m;
        opts.criterion_seed = seed;
        if (!setup.base.checkpoint_dir.empty()) {
          opts.checkpoint_dir = setup.base.checkpoint_dir /
                                (criterion + "_m" + std::to_string(m) + "_s" + std::to_string(seed));
        }
        PruneResult result = prune_network(base, opts, train_set, valid_set, test_set);
        spdlog::info("{} m={} seed {}: final {:.4f} (baseline {:.4f})", criterion, m, seed,
                     result.trace.final_accuracy, report.baseline);
        cell.finals.push_back(result.trace.final_accuracy);
        if (result.trace.test_accuracy) tests.push_back(*result.trace.test_accuracy);

        const bool quantum = setup.data_quantum && seed == seeds.front() &&
                             std::find(setup.quantum_criteria.begin(), setup.quantum_criteria.end(),
                                       criterion) != setup.quantum_criteria.end();
        if (quantum && m > 0) {
          for (double fraction : setup.quantum_fractions) {
            TrainConfig cfg = setup.base.schedule.finetune;
            cfg.epochs = setup.base.schedule.final_epochs;
            cfg.fraction = fraction;
            cfg.seed = derive_seed(cfg.seed, 2000003);
            TrainResult r = finetune(result.before_final, train_set, valid_set, cfg);
            QuantumCurve qc{criterion, m, fraction, {}, 0.0};
            for (const EpochStats& e : r.curve) qc.curve.push_back(*e.valid_accuracy);
            if (r.best_epoch > 0) qc.final_accuracy = qc.curve[r.best_epoch - 1];
            report.quantum.push_back(std::move(qc));
          }
        }
        report.traces.push_back(std::move(result.trace));
      }
      cell.mean = mean_of(cell.finals);
      if (!tests.empty()) cell.test_mean = mean_of(tests);
      report.table.push_back(std::move(cell));
    }
  }
  return report;
}

std::string format_comparison_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "criterion,m,runs,valid_accuracy,test_accuracy\n";
  for (const ComparisonCell& c : report.table) {
    os << c.criterion << ',' << c.m_percent << ',' << c.finals.size() << ','
       << format_double(c.mean) << ',' << (c.test_mean ? format_double(*c.test_mean) : "") << '\n';
  }
  return os.str();
}

std::string format_comparison_table(const ExperimentReport& report) {
  std::vector<int> levels;
  std::vector<std::string> criteria;
  for (const ComparisonCell& c : report.table) {
    if (std::find(levels.begin(), levels.end(), c.m_percent) == levels.end()) levels.push_back(c.m_percent);
    if (std::find(criteria.begin(), criteria.end(), c.criterion) == criteria.end()) criteria.push_back(c.criterion);
  }
  std::ostringstream os;
  os << "criterion";
  for (int m : levels) os << ",m" << m;
  os << '\n';
  for (const std::string& name : criteria) {
    os << name;
    for (int m : levels) os << ',' << format_double(report.cell(name, m).mean);
    os << '\n';
  }
  return os.str();
}

std::string format_quantum_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "criterion,m,fraction,epoch,accuracy\n";
  for (const QuantumCurve& q : report.quantum) {
    for (std::size_t e = 0; e < q.curve.size(); ++e) {
      os << q.criterion << ',' << q.m_percent << ',' << format_double(q.fraction) << ',' << e + 1
         << ',' << format_double(q.curve[e]) << '\n';
    }
  }
  return os.str();
}

void to_json(nlohmann::json& j, const ExperimentReport& report) {
  nlohmann::json table = nlohmann::json::array();
  for (const ComparisonCell& c : report.table) {
    nlohmann::json row{{"criterion", c.criterion}, {"m_percent", c.m_percent},
                       {"finals", c.finals}, {"mean", c.mean}};
    if (c.test_mean) row["test_mean"] = *c.test_mean;
    table.push_back(std::move(row));
  }
  nlohmann::json quantum = nlohmann::json::array();
  for (const QuantumCurve& q : report.quantum) {
    quantum.push_back({{"criterion", q.criterion}, {"m_percent", q.m_percent},
                       {"fraction", q.fraction}, {"curve", q.curve},
                       {"final_accuracy", q.final_accuracy}});
  }
  j = nlohmann::json{{"baseline", report.baseline}, {"table", table},
                     {"traces", report.traces}, {"quantum", quantum}};
}

}  // namespace fprune
