#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "fprune/config_file.hpp"
#include "fprune/dataset.hpp"
#include "fprune/errors.hpp"
#include "fprune/flops.hpp"
#include "fprune/io_util.hpp"
#include "fprune/model_io.hpp"
#include "fprune/prune_driver.hpp"
#include "fprune/recovery.hpp"
#include "fprune/reports.hpp"
#include "fprune/rng.hpp"
#include "fprune/synthetic.hpp"
#include "fprune/trainer.hpp"
#include "fprune/zoo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fprune {

namespace {

// Seed streams derived from --seed.
enum SeedStream : std::uint64_t {
  kInitStream = 11,
  kTrainStream = 12,
  kFinetuneStream = 13,
  kCriterionStream = 14,
};

struct CliConfig {
  fs::path config;
  std::uint64_t seed = 1;
  fs::path report_dir = "reports";
  bool resume = false;
  std::string log_level = "info";

  fs::path data_dir;
  fs::path data_out;
  std::string net = "tiny-vgg";
  fs::path model_in;
  fs::path model_out;

  TrainConfig optim;
  PruneSchedule schedule;
  double finetune_lr = 0.0;  // 0: optim.lr / 10

  std::string criterion = "l1_norm";
  int level = 50;
  std::vector<std::string> criteria = {"random", "l1_norm"};
  std::vector<int> levels = {25, 50};
  std::string exclude;  // empty: default, "none": nothing excluded
  std::string residual_mode = "first_two";
  std::vector<std::uint64_t> criterion_seeds;
  std::vector<int> class_subset;
  bool data_quantum = false;

  std::vector<int> subset_classes;
  std::size_t random_k = 0;

  SyntheticConfig synth;

  std::vector<fs::path> raw_train, raw_valid, raw_test;
  std::vector<std::size_t> raw_shape = {3, 32, 32};
  std::size_t label_bytes = 1;
  std::vector<std::string> raw_classes;
  std::size_t raw_valid_count = 0;

  std::string eval_split = "test";
};

void add_options(CLI::App& app, CliConfig& c) {
  app.set_help_all_flag("--help-all", "Show help for all subcommands");
  app.add_option("--config", c.config, "INI/TOML experiment file; flags override its values");
  app.add_option("--seed", c.seed, "Base seed for every random stream");
  app.add_option("--report-dir", c.report_dir, "Directory for reports and checkpoints");
  app.add_flag("--resume", c.resume, "Continue an interrupted prune or sweep from checkpoints");
  app.add_option("--log-level", c.log_level, "trace, debug, info, warn, error or off");

  app.add_option("--data.dir", c.data_dir, "Dataset directory with train/valid/test manifests");
  app.add_option("--data.out", c.data_out, "Output directory for generated datasets");
  app.add_option("--net.spec", c.net, "Zoo network name or path to a network spec file");
  app.add_option("--model.in", c.model_in, "Input model file");
  app.add_option("--model.out", c.model_out, "Output model file");

  app.add_option("--optim.lr", c.optim.lr);
  app.add_option("--optim.momentum", c.optim.momentum);
  app.add_option("--optim.weight-decay", c.optim.weight_decay);
  app.add_option("--optim.batch-size", c.optim.batch_size);
  app.add_option("--optim.epochs", c.optim.epochs);
  app.add_option("--optim.fraction", c.optim.fraction);

  app.add_option("--schedule.per-layer-epochs", c.schedule.per_layer_epochs, "p");
  app.add_option("--schedule.final-epochs", c.schedule.final_epochs, "q");
  app.add_option("--schedule.per-layer-fraction", c.schedule.per_layer_fraction);
  app.add_option("--schedule.final-fraction", c.schedule.final_fraction);
  app.add_option("--schedule.lr", c.finetune_lr, "Fine-tune learning rate (default optim.lr/10)");
  app.add_option("--schedule.score-batch-size", c.schedule.score_batch_size);
  app.add_option("--schedule.bins", c.schedule.entropy_bins, "Entropy histogram bins");

  app.add_option("--pruning.criterion", c.criterion);
  app.add_option("--pruning.level", c.level, "Percent of filters removed per layer");
  app.add_option("--pruning.criteria", c.criteria)->delimiter(',');
  app.add_option("--pruning.levels", c.levels)->delimiter(',');
  app.add_option("--pruning.exclude", c.exclude, "Comma-separated conv ids, or none");
  app.add_option("--pruning.residual-mode", c.residual_mode, "first_only or first_two");
  app.add_option("--pruning.criterion-seeds", c.criterion_seeds)->delimiter(',');
  app.add_option("--pruning.class-subset", c.class_subset, "Classes for class_specific")
      ->delimiter(',');
  app.add_flag("--pruning.data-quantum", c.data_quantum, "Also run the data-fraction sweep");

  app.add_option("--subset.classes", c.subset_classes)->delimiter(',');
  app.add_option("--subset.random-k", c.random_k, "Pick k classes at random from --seed");

  app.add_option("--synth.train", c.synth.train);
  app.add_option("--synth.valid", c.synth.valid);
  app.add_option("--synth.test", c.synth.test);
  app.add_option("--synth.image-size", c.synth.image_size);
  app.add_option("--synth.noise", c.synth.noise);

  app.add_option("--raw.train", c.raw_train)->delimiter(',');
  app.add_option("--raw.valid", c.raw_valid)->delimiter(',');
  app.add_option("--raw.test", c.raw_test)->delimiter(',');
  app.add_option("--raw.shape", c.raw_shape)->delimiter(',')->expected(3);
  app.add_option("--raw.label-bytes", c.label_bytes);
  app.add_option("--raw.classes", c.raw_classes)->delimiter(',');
  app.add_option("--raw.valid-count", c.raw_valid_count,
                 "Items moved from the end of train to valid when no valid files are given");

  app.add_option("--eval.split", c.eval_split, "train, valid or test");
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

NetworkSpec resolve_spec(const CliConfig& c, const Dataset& data) {
  const auto names = zoo_names();
  if (std::find(names.begin(), names.end(), c.net) != names.end()) {
    return named_network_spec(c.net, data.shape.height, data.num_classes());
  }
  require(fs::exists(c.net), "network '" + c.net + "' is neither a zoo name nor a file");
  return parse_network_spec(read_text_file(c.net));
}

LoadedSplits load_data(const CliConfig& c) {
  require(!c.data_dir.empty(), "--data.dir is required");
  return load_dataset_dir(c.data_dir);
}

Network load_input_model(const CliConfig& c) {
  require(!c.model_in.empty(), "--model.in is required");
  return load_model(c.model_in);
}

void write_report(const CliConfig& c, const std::string& name, const std::string& text) {
  fs::create_directories(c.report_dir);
  write_text_atomic(c.report_dir / name, text);
}

PruneSchedule make_schedule(const CliConfig& c) {
  PruneSchedule s = c.schedule;
  s.finetune = c.optim;
  s.finetune.lr = c.finetune_lr > 0.0 ? c.finetune_lr : c.optim.lr / 10.0;
  s.finetune.seed = derive_seed(c.seed, kFinetuneStream);
  s.validate();
  return s;
}

PruneOptions make_prune_options(const CliConfig& c) {
  PruneOptions o;
  o.criterion = c.criterion;
  o.m_percent = c.level;
  o.schedule = make_schedule(c);
  if (c.exclude == "none") {
    o.exclude = std::vector<int>{};
  } else if (!c.exclude.empty()) {
    std::vector<int> ids;
    std::stringstream ss(c.exclude);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        ids.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw ConfigError("--pruning.exclude: '" + item + "' is not a layer id");
      }
    }
    o.exclude = ids;
  }
  o.residual_mode = parse_residual_mode(c.residual_mode);
  o.criterion_seed = c.criterion_seeds.empty() ? derive_seed(c.seed, kCriterionStream)
                                               : c.criterion_seeds.front();
  o.class_subset = c.class_subset;
  o.resume = c.resume;
  return o;
}

void check_model_matches(const Network& net, const Dataset& data) {
  if (net.spec().input != data.shape || net.spec().classes != data.num_classes()) {
    throw ValidationError("model " + net.spec().name + " does not match the dataset shape or classes");
  }
}

int cmd_make_dataset(const CliConfig& c) {
  require(!c.data_out.empty(), "--data.out is required");
  SyntheticConfig s = c.synth;
  s.seed = c.seed;
  const DatasetSplits splits = write_synthetic_dataset(s, c.data_out);
  std::cout << "wrote " << splits.train.count << "/" << splits.valid.count << "/"
            << splits.test.count << " items to " << c.data_out.string() << "\n";
  return 0;
}

int cmd_import_raw(const CliConfig& c) {
  require(!c.data_out.empty(), "--data.out is required");
  require(!c.raw_train.empty() && !c.raw_test.empty(), "--raw.train and --raw.test are required");
  require(c.raw_valid.empty() != (c.raw_valid_count == 0),
          "give either --raw.valid files or --raw.valid-count");
  const ImageShape shape{c.raw_shape[0], c.raw_shape[1], c.raw_shape[2]};
  RawSplit train = import_raw_records(c.raw_train, shape, c.label_bytes);
  RawSplit test = import_raw_records(c.raw_test, shape, c.label_bytes);
  RawSplit valid;
  if (!c.raw_valid.empty()) {
    valid = import_raw_records(c.raw_valid, shape, c.label_bytes);
  } else {
    require(c.raw_valid_count < train.count(), "--raw.valid-count leaves no training items");
    const std::size_t keep = train.count() - c.raw_valid_count;
    const std::size_t numel = shape.channels * shape.height * shape.width;
    valid.shape = shape;
    valid.labels.assign(train.labels.begin() + keep, train.labels.end());
    valid.pixels.assign(train.pixels.begin() + keep * numel, train.pixels.end());
    train.labels.resize(keep);
    train.pixels.resize(keep * numel);
  }
  std::uint32_t max_label = 0;
  for (const RawSplit* s : {&train, &valid, &test}) {
    for (std::uint32_t l : s->labels) max_label = std::max(max_label, l);
  }
  std::vector<std::string> names = c.raw_classes;
  if (names.empty()) {
    for (std::uint32_t k = 0; k <= max_label; ++k) names.push_back("class" + std::to_string(k));
  }
  const NormStats norm = compute_norm_stats(train);
  write_split(c.data_out, "train", train, Split::kTrain, names, norm);
  write_split(c.data_out, "valid", valid, Split::kValid, names, norm);
  write_split(c.data_out, "test", test, Split::kTest, names, norm);
  std::cout << "imported " << train.count() << "/" << valid.count() << "/" << test.count()
            << " items to " << c.data_out.string() << "\n";
  return 0;
}

int cmd_train(const CliConfig& c) {
  require(!c.model_out.empty(), "--model.out is required");
  const LoadedSplits data = load_data(c);
  Network net = Network::build(resolve_spec(c, data.train), derive_seed(c.seed, kInitStream));
  TrainConfig cfg = c.optim;
  cfg.seed = derive_seed(c.seed, kTrainStream);
  const Dataset train_set =
      cfg.fraction < 1.0 ? subsample(data.train, cfg.fraction, derive_seed(cfg.seed, 0)) : data.train;
  cfg.fraction = 1.0;
  TrainResult r = train(std::move(net), train_set, &data.valid, cfg);
  save_model(r.network, c.model_out);
  const double valid_acc = evaluate(r.network, data.valid);
  const double test_acc = evaluate(r.network, data.test);
  write_report(c, "train_curve.csv", format_curve_csv(r.curve));
  write_report(c, "train.json", dump_json(json{{"curve", r.curve},
                                               {"best_epoch", r.best_epoch},
                                               {"valid_accuracy", valid_acc},
                                               {"test_accuracy", test_acc}}));
  std::cout << "valid_accuracy=" << format_double(valid_acc) << "\n"
            << "test_accuracy=" << format_double(test_acc) << "\n";
  return 0;
}

int cmd_make_subset(const CliConfig& c) {
  require(!c.data_dir.empty(), "--data.dir is required");
  require(!c.data_out.empty(), "--data.out is required");
  require(c.subset_classes.empty() != (c.random_k == 0),
          "give either --subset.classes or --subset.random-k");
  const DatasetSplits parent = read_dataset_dir(c.data_dir);
  const std::size_t classes = parent.train.class_names.size();
  const std::vector<int> ids =
      c.random_k > 0 ? random_class_ids(classes, c.random_k, c.seed) : c.subset_classes;
  const DatasetSplits out = make_class_subset(parent, ids, c.data_out);
  std::cout << "classes=";
  for (std::size_t i = 0; i < ids.size(); ++i) std::cout << (i ? "," : "") << ids[i];
  std::cout << "\nwrote " << out.train.count << "/" << out.valid.count << "/" << out.test.count
            << " items to " << c.data_out.string() << "\n";
  return 0;
}

int cmd_prune(const CliConfig& c) {
  require(!c.model_out.empty(), "--model.out is required");
  const LoadedSplits data = load_data(c);
  Network net = load_input_model(c);
  check_model_matches(net, data.train);
  PruneOptions opts = make_prune_options(c);
  opts.checkpoint_dir = c.report_dir / "checkpoint";
  PruneResult r = prune_network(std::move(net), opts, data.train, data.valid, &data.test);
  save_model(r.network, c.model_out);
  write_report(c, "plan.json", dump_json(json(r.plan)));
  write_report(c, "surgeries.json", dump_json(json(r.surgeries)));
  write_report(c, "surgeries.csv", format_surgeries_csv(r.surgeries));
  write_report(c, "trace.json", dump_json(json(r.trace)));
  write_report(c, "trace.csv", format_traces_csv({r.trace}));
  write_report(c, "scores.csv", format_scores_csv(r.scores));
  fs::remove_all(opts.checkpoint_dir);
  std::cout << "final_accuracy=" << format_double(r.trace.final_accuracy) << "\n"
            << "test_accuracy=" << format_double(*r.trace.test_accuracy) << "\n";
  return 0;
}

int cmd_sweep(const CliConfig& c) {
  const LoadedSplits data = load_data(c);
  const Network net = load_input_model(c);
  check_model_matches(net, data.train);
  ExperimentSetup setup;
  setup.criteria = c.criteria;
  setup.levels = c.levels;
  setup.base = make_prune_options(c);
  setup.base.checkpoint_dir = c.report_dir / "checkpoints";
  setup.criterion_seeds = c.criterion_seeds.empty()
                              ? std::vector<std::uint64_t>{setup.base.criterion_seed}
                              : c.criterion_seeds;
  setup.data_quantum = c.data_quantum;
  const ExperimentReport report =
      recovery_experiment(net, setup, data.train, data.valid, &data.test);
  write_report(c, "comparison.csv", format_comparison_csv(report));
  write_report(c, "comparison_table.csv", format_comparison_table(report));
  write_report(c, "traces.csv", format_traces_csv(report.traces));
  write_report(c, "sweep.json", dump_json(json(report)));
  if (c.data_quantum) write_report(c, "quantum.csv", format_quantum_csv(report));
  fs::remove_all(setup.base.checkpoint_dir);
  std::cout << format_comparison_table(report);
  return 0;
}

int cmd_eval(const CliConfig& c) {
  const LoadedSplits data = load_data(c);
  const Network net = c.model_in.empty()
                          ? Network::build(resolve_spec(c, data.train), derive_seed(c.seed, kInitStream))
                          : load_model(c.model_in);
  check_model_matches(net, data.train);
  const Split split = parse_split(c.eval_split);
  const Dataset& set = split == Split::kTrain ? data.train : split == Split::kValid ? data.valid : data.test;
  const double acc = evaluate(net, set);
  const FlopReport flops = count_flops(net);
  std::cout << "split=" << split_name(split) << "\n"
            << "items=" << set.size() << "\n"
            << "accuracy=" << format_double(acc) << "\n"
            << "total_macs=" << flops.total_macs << "\n"
            << "total_flops=" << flops.total_flops() << "\n"
            << "total_params=" << flops.total_params << "\n"
            << format_flop_report(flops);
  write_report(c, "eval.json", dump_json(json{{"split", split_name(split)},
                                              {"items", set.size()},
                                              {"accuracy", acc},
                                              {"flops", flops}}));
  return 0;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch == '\n' ? ' ' : ch;
  }
  return out;
}

int report_error(const std::string& code, const std::string& message, int exit_code) {
  std::cerr << "error: code=" << code << " message=\"" << escape(message) << "\"\n"
            << "fprune: " << message << "\n";
  return exit_code;
}

std::string option_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CliConfig c;
  CLI::App app{"Filter pruning experiments: train, prune, sweep and evaluate small CNNs"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  add_options(app, c);
  app.fallthrough();
  app.require_subcommand(1);
  std::string command;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"make-dataset", "Generate the synthetic shapes dataset"},
      {"import-raw", "Convert record-oriented raw image dumps into a dataset"},
      {"train", "Train a network and write the model file and curve"},
      {"make-subset", "Write a class-subset copy of a dataset"},
      {"prune", "Prune a model with one criterion and level"},
      {"sweep", "Prune over criteria x levels and write the comparison table"},
      {"eval", "Print top-1 accuracy and the FLOP report of a model"},
  };
  for (const auto& [name, help] : commands) {
    app.add_subcommand(name, help)->fallthrough()->callback([&command, name = name] { command = name; });
  }

  try {
    std::vector<std::string> argv(args.rbegin(), args.rend());
    app.parse(argv);
    if (!c.config.empty()) {
      // Second pass: file values for every option not given on the command line.
      std::vector<std::string> merged;
      for (const auto& [key, value] : read_config_file(c.config)) {
        const CLI::Option* opt = app.get_option_no_throw("--" + option_key(key));
        if (opt == nullptr || key == "config") {
          throw ConfigError("config " + c.config.string() + ": unknown key '" + key + "'");
        }
        if (opt->count() > 0) continue;
        merged.push_back("--" + option_key(key));
        if (opt->get_type_size() != 0) merged.push_back(value);
        else if (value != "true" && value != "1") merged.pop_back();
      }
      merged.insert(merged.end(), args.begin(), args.end());
      c = CliConfig{};
      app.clear();
      argv.assign(merged.rbegin(), merged.rend());
      app.parse(argv);
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("config_error", e.what(), 2);
  } catch (const Error& e) {
    return report_error(error_code_name(e.code()), e.what(), 2);
  }

  spdlog::drop("fprune");
  spdlog::set_default_logger(spdlog::stderr_logger_mt("fprune"));
  spdlog::set_level(spdlog::level::from_str(c.log_level));

  try {
    if (command == "make-dataset") return cmd_make_dataset(c);
    if (command == "import-raw") return cmd_import_raw(c);
    if (command == "train") return cmd_train(c);
    if (command == "make-subset") return cmd_make_subset(c);
    if (command == "prune") return cmd_prune(c);
    if (command == "sweep") return cmd_sweep(c);
    return cmd_eval(c);
  } catch (const ConfigError& e) {
    return report_error(error_code_name(e.code()), e.what(), 2);
  } catch (const Error& e) {
    return report_error(error_code_name(e.code()), e.what(), 1);
  } catch (const json::exception& e) {
    return report_error("io_error", e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("internal_error", e.what(), 1);
  }
}

}  // namespace fprune
