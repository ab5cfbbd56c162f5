#include "fprune/prune_driver.hpp"

#include <spdlog/spdlog.h>

#include "fprune/criteria.hpp"
#include "fprune/errors.hpp"
#include "fprune/io_util.hpp"
#include "fprune/model_io.hpp"
#include "fprune/reports.hpp"
#include "fprune/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fprune {

void PruneSchedule::validate() const {
  finetune.validate();
  if (!(per_layer_fraction > 0.0 && per_layer_fraction <= 1.0) ||
      !(final_fraction > 0.0 && final_fraction <= 1.0)) {
    throw ConfigError("fine-tune fractions must be in (0, 1]");
  }
  if (score_batch_size == 0) throw ConfigError("score batch size must be positive");
  if (entropy_bins < 2) throw ConfigError("entropy needs at least 2 bins");
}

namespace {

constexpr std::uint64_t kFinalStream = 1000003;

struct Progress {
  std::vector<LayerRecord> records;
  std::vector<SurgeryRecord> surgeries;
  std::vector<PlanEntry> plan;
  double baseline = 0.0;
};

fs::path checkpoint_model(const fs::path& dir) { return dir / "checkpoint.pprn"; }
fs::path checkpoint_progress(const fs::path& dir) { return dir / "progress.json"; }

void save_checkpoint(const fs::path& dir, const Network& network, const PruneOptions& options,
                     const Progress& progress) {
  fs::create_directories(dir);
  save_model(network, checkpoint_model(dir));
  const json j{{"criterion", options.criterion},
               {"m_percent", options.m_percent},
               {"criterion_seed", options.criterion_seed},
               {"baseline", progress.baseline},
               {"records", progress.records},
               {"surgeries", progress.surgeries},
               {"plan", progress.plan}};
  write_text_atomic(checkpoint_progress(dir), dump_json(j));
}

std::optional<Progress> load_checkpoint(const fs::path& dir, const PruneOptions& options,
                                        std::optional<Network>& network) {
  if (!fs::exists(checkpoint_progress(dir)) || !fs::exists(checkpoint_model(dir))) {
    return std::nullopt;
  }
  const json j = json::parse(read_text_file(checkpoint_progress(dir)));
  if (j.at("criterion") != options.criterion || j.at("m_percent") != options.m_percent ||
      j.at("criterion_seed") != options.criterion_seed) {
    throw ConfigError("checkpoint in " + dir.string() + " belongs to a different run");
  }
  Progress p;
  j.at("baseline").get_to(p.baseline);
  j.at("records").get_to(p.records);
  j.at("surgeries").get_to(p.surgeries);
  j.at("plan").get_to(p.plan);
  network = load_model(checkpoint_model(dir));
  return p;
}

}  // namespace

PruneResult prune_network(Network network, const PruneOptions& options, const Dataset& train_set,
                          const Dataset& valid_set, const Dataset* test_set) {
  const PruneSchedule& sched = options.schedule;
  sched.validate();
  const CriterionInfo& info = criterion_info(options.criterion);
  if (info.needs_data && train_set.empty()) {
    throw StateError("criterion " + options.criterion + " needs a non-empty training set");
  }
  retained_count(1, options.m_percent);  // range check

  const std::vector<int> order = prunable_layers(
      network.spec(), options.exclude.value_or(default_exclude_layers(network.spec())),
      options.residual_mode);

  Progress progress;
  bool resumed = false;
  if (options.resume && !options.checkpoint_dir.empty()) {
    std::optional<Network> restored;
    if (auto p = load_checkpoint(options.checkpoint_dir, options, restored)) {
      progress = std::move(*p);
      network = std::move(*restored);
      resumed = true;
      spdlog::info("resuming {} m={} after {} layers", options.criterion, options.m_percent,
                   progress.records.size());
    }
  }
  if (!resumed) progress.baseline = evaluate(network, valid_set);
  if (progress.records.size() > order.size()) {
    throw ConfigError("checkpoint lists more layers than the network has to prune");
  }

  const TrainConfig& ft = sched.finetune;
  ScoringContext ctx;
  ctx.data = &train_set;
  ctx.batch_size = sched.score_batch_size;
  ctx.bins = sched.entropy_bins;
  ctx.seed = options.criterion_seed;
  ctx.class_subset = options.class_subset;

  bool pruned_any = false;
  double current = progress.baseline;
  for (const LayerRecord& r : progress.records) {
    pruned_any = pruned_any || r.filters_after < r.filters_before;
    current = r.after_finetune;
  }

  if (!resumed && !options.checkpoint_dir.empty()) {
    save_checkpoint(options.checkpoint_dir, network, options, progress);
  }

  std::optional<Network> before_final;
  std::vector<ScoreVector> scored;
  try {
    for (std::size_t i = progress.records.size(); i < order.size(); ++i) {
      const int id = order[i];
      LayerRecord rec;
      rec.layer_id = id;
      rec.filters_before = find_layer(network.spec(), id).conv.filters;
      rec.filters_after = retained_count(rec.filters_before, options.m_percent);
      PlanEntry entry{id, {}};
      if (rec.filters_after == rec.filters_before) {
        for (std::size_t f = 0; f < rec.filters_before; ++f) entry.keep.push_back(f);
        rec.after_surgery = rec.after_finetune = current;
      } else {
        const ScoreVector scores = score_layer(options.criterion, network, id, ctx);
        entry.keep = select_top_m(scores, rec.filters_after);
        scored.push_back(scores);
        progress.surgeries.push_back(prune_layer(network, id, entry.keep));
        rec.after_surgery = evaluate(network, valid_set);
        rec.after_finetune = rec.after_surgery;
        if (sched.per_layer_epochs > 0) {
          TrainConfig cfg = ft;
          cfg.epochs = sched.per_layer_epochs;
          cfg.fraction = sched.per_layer_fraction;
          cfg.seed = derive_seed(ft.seed, static_cast<std::uint64_t>(id));
          TrainResult r = finetune(network, train_set, valid_set, cfg);
          network = std::move(r.network);
          rec.after_finetune = *r.curve[r.best_epoch - 1].valid_accuracy;
        }
        pruned_any = true;
      }
      current = rec.after_finetune;
      spdlog::info("{} m={} layer {}: {} -> {} filters, acc {:.4f} -> {:.4f}", options.criterion,
                   options.m_percent, id, rec.filters_before, rec.filters_after,
                   rec.after_surgery, rec.after_finetune);
      progress.records.push_back(rec);
      progress.plan.push_back(std::move(entry));
      if (!options.checkpoint_dir.empty()) {
        save_checkpoint(options.checkpoint_dir, network, options, progress);
      }
    }

    before_final = network;
    std::vector<double> curve;
    if (pruned_any && sched.final_epochs > 0) {
      TrainConfig cfg = ft;
      cfg.epochs = sched.final_epochs;
      cfg.fraction = sched.final_fraction;
      cfg.seed = derive_seed(ft.seed, kFinalStream);
      TrainResult r = finetune(network, train_set, valid_set, cfg);
      for (const EpochStats& e : r.curve) curve.push_back(*e.valid_accuracy);
      network = std::move(r.network);
      current = curve[r.best_epoch - 1];
    } else {
      curve.assign(sched.final_epochs, current);
    }

    RecoveryTrace trace;
    trace.criterion = options.criterion;
    trace.m_percent = options.m_percent;
    trace.criterion_seed = options.criterion_seed;
    trace.baseline = progress.baseline;
    trace.layers = progress.records;
    trace.final_curve = std::move(curve);
    trace.final_accuracy = current;
    if (test_set != nullptr) trace.test_accuracy = evaluate(network, *test_set);
    trace.check();

    PruningPlan plan;
    plan.criterion = options.criterion;
    plan.m_percent = options.m_percent;
    plan.layers = progress.plan;
    plan.per_layer_epochs = sched.per_layer_epochs;
    plan.final_epochs = sched.final_epochs;
    plan.per_layer_fraction = sched.per_layer_fraction;
    plan.final_fraction = sched.final_fraction;
    plan.train_seed = ft.seed;
    plan.criterion_seed = options.criterion_seed;

    return PruneResult{std::move(network), std::move(*before_final), std::move(plan),
                       std::move(progress.surgeries), std::move(trace), std::move(scored)};
  } catch (...) {
    // checkpoint.pprn already holds the last completed layer; keep the
    // current (structurally valid) network next to it for inspection.
    if (!options.checkpoint_dir.empty()) {
      try {
        save_model(network, options.checkpoint_dir / "failed.pprn");
      } catch (const std::exception& e) {
        spdlog::error("could not persist network after failure: {}", e.what());
      }
    }
    throw;
  }
}

}  // namespace fprune
