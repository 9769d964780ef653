#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "nellcom/errors.hpp"
#include "nellcom/harness.hpp"
#include "nellcom/plots.hpp"

namespace nellcom {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// "--seeds 20" means indices 0..19; "--seeds 0,3,7" means exactly those.
std::vector<int> parse_seed_list(const std::string& s) {
  const std::vector<std::string> parts = split_commas(s);
  if (parts.empty()) throw ConfigError("empty --seeds value");
  std::vector<int> out;
  try {
    if (parts.size() == 1 && s.find(',') == std::string::npos) {
      const int n = std::stoi(parts[0]);
      if (n < 1) throw ConfigError("--seeds count must be positive");
      for (int i = 0; i < n; ++i) out.push_back(i);
      return out;
    }
    for (const std::string& p : parts) out.push_back(std::stoi(p));
  } catch (const std::logic_error&) {
    throw ConfigError("cannot parse --seeds value '" + s + "'");
  }
  return out;
}

// Shared training flags; values land in cfg only when the flag was given,
// so config-file values survive unless overridden.
struct TrainFlags {
  std::string grammar, config_file;
  uint64_t seed = 0;
  int sl_epochs = 0, rl_epochs = 0, batch_size = 0, max_len = 0;
  double lr = 0.0;
  bool baseline = false;
  bool exact_quota = false;
  double grad_clip = 0.0;

  CLI::Option *o_grammar = nullptr, *o_seed = nullptr, *o_sl = nullptr, *o_rl = nullptr,
              *o_batch = nullptr, *o_lr = nullptr, *o_max_len = nullptr, *o_baseline = nullptr,
              *o_exact = nullptr, *o_config = nullptr, *o_clip = nullptr;

  void attach(CLI::App* app, bool with_seed) {
    o_config = app->add_option("--config", config_file, "JSON config file");
    o_grammar = app->add_option("--grammar", grammar, "grammar name (fix+op, flex+op)");
    if (with_seed) o_seed = app->add_option("--seed", seed, "run seed");
    o_sl = app->add_option("--sl-epochs", sl_epochs, "supervised epochs");
    o_rl = app->add_option("--rl-epochs", rl_epochs, "communication epochs");
    o_batch = app->add_option("--batch-size", batch_size, "minibatch size");
    o_lr = app->add_option("--lr", lr, "learning rate");
    o_max_len = app->add_option("--max-len", max_len, "maximum utterance length");
    o_baseline = app->add_flag("--baseline,!--no-baseline", baseline,
                               "subtract a moving-average reward baseline (default on)");
    o_exact = app->add_flag("--exact-quota", exact_quota,
                            "regenerate epoch data with exact order/marking quotas");
    o_clip = app->add_option("--grad-clip", grad_clip,
                             "global gradient-norm clip, 0 disables (default 3.0)");
  }

  TrainConfig build() const {
    TrainConfig cfg;
    if (o_config->count() > 0) cfg = load_config_file(config_file);
    if (o_grammar->count() > 0) cfg.grammar = grammar;
    if (o_seed != nullptr && o_seed->count() > 0) cfg.seed = seed;
    if (o_sl->count() > 0) cfg.sl_epochs = sl_epochs;
    if (o_rl->count() > 0) cfg.rl_epochs = rl_epochs;
    if (o_batch->count() > 0) cfg.batch_size = batch_size;
    if (o_lr->count() > 0) cfg.learning_rate = lr;
    if (o_max_len->count() > 0) cfg.max_len = max_len;
    if (o_baseline->count() > 0) cfg.reward_baseline = baseline;
    if (o_exact->count() > 0) cfg.exact_quota_data = exact_quota;
    if (o_clip->count() > 0) cfg.grad_clip_norm = grad_clip;
    GrammarSpec::resolve(cfg.grammar);  // reject unknown grammars early
    cfg.validate();
    return cfg;
  }
};

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"nellcom: two-agent language learning and communication experiments"};
  app.require_subcommand(1);

  std::string out_flag = default_out_root().string();

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write dataset files for a grammar");
  TrainFlags gen_flags;
  gen_flags.attach(gen, true);
  gen->add_option("--out", out_flag, "output root");

  // train
  auto* train = app.add_subcommand("train", "run one experiment");
  TrainFlags train_flags;
  train_flags.attach(train, true);
  train->add_option("--out", out_flag, "output root");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "recompute metrics from checkpoints");
  std::string eval_run, eval_phase = "rl", eval_out;
  evaluate->add_option("--run", eval_run, "run directory")->required();
  evaluate->add_option("--phase", eval_phase, "sl or rl");
  evaluate->add_option("--out", eval_out, "write JSON here instead of stdout");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "aggregate trajectories across seeds");
  std::string analyze_runs_flag;
  analyze->add_option("--runs", analyze_runs_flag, "root containing run directories");
  analyze->add_option("--out", out_flag, "aggregate output directory");

  // plot
  auto* plot = app.add_subcommand("plot", "emit SVG plots from completed runs");
  std::string plot_kind, plot_runs, plot_grammar, plot_out;
  plot->add_option("--kind", plot_kind, "timelines | individuals | tradeoff")->required();
  plot->add_option("--runs", plot_runs, "root containing run directories");
  plot->add_option("--grammar", plot_grammar, "grammar filter (timelines/individuals)");
  plot->add_option("--out", plot_out, "output SVG path");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a grammar x seed grid and aggregate");
  TrainFlags sweep_flags;
  sweep_flags.attach(sweep, false);
  std::string sweep_grammars = "fix+op,flex+op", sweep_seeds = "20";
  uint64_t master_seed = 0;
  int jobs = 0;
  sweep->add_option("--grammars", sweep_grammars, "comma-separated grammar names");
  sweep->add_option("--seeds", sweep_seeds, "seed count or comma-separated indices");
  sweep->add_option("--master-seed", master_seed, "master seed for cell stream derivation");
  sweep->add_option("--jobs", jobs, "parallel runs (default: hardware threads)");
  sweep->add_option("--out", out_flag, "output root");

  {
    std::vector<char*> argv;
    std::vector<std::string> storage = args;
    std::string prog = "nellcom";
    argv.push_back(prog.data());
    for (std::string& s : storage) argv.push_back(s.data());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }

  if (gen->parsed()) {
    const TrainConfig cfg = gen_flags.build();
    const fs::path dir = fs::path(out_flag) / "dataset" / cfg.grammar /
                         ("seed_" + std::to_string(cfg.seed));
    write_dataset_files(cfg, dir);
    std::cout << dir.string() << "\n";
    return 0;
  }

  if (train->parsed()) {
    const TrainConfig cfg = train_flags.build();
    RunOutcome outcome =
        execute_run(cfg, static_cast<int>(cfg.seed), fs::path(out_flag), false);
    std::cout << outcome.dir.string() << "\n";
    return 0;
  }

  if (evaluate->parsed()) {
    const nlohmann::json result = evaluate_checkpoints(eval_run, eval_phase);
    if (eval_out.empty()) {
      std::cout << result.dump(2) << "\n";
    } else {
      std::ofstream out(eval_out, std::ios::binary);
      if (!out) throw DataError("cannot write '" + eval_out + "'");
      out << result.dump(2) << '\n';
    }
    return 0;
  }

  if (analyze->parsed()) {
    const fs::path root = analyze_runs_flag.empty() ? fs::path(out_flag) : fs::path(analyze_runs_flag);
    const fs::path agg = analyze_runs(root, root / "aggregate");
    std::cout << agg.string() << "\n";
    return 0;
  }

  if (plot->parsed()) {
    if (plot_kind != "tradeoff" && plot_kind != "timelines" && plot_kind != "individuals")
      throw ConfigError("unknown plot kind '" + plot_kind + "'");
    if (plot_kind != "tradeoff" && plot_grammar.empty())
      throw ConfigError("plot --kind " + plot_kind + " needs --grammar");

    const fs::path root = plot_runs.empty() ? fs::path(out_flag) : fs::path(plot_runs);
    std::vector<RunArtifacts> runs;
    for (const fs::path& d : find_run_dirs(root)) {
      if (d.string().find("dataset") != std::string::npos) continue;
      runs.push_back(load_run(d));
    }
    if (runs.empty()) throw DataError("no completed runs under '" + root.string() + "'");
    fs::create_directories(root / "plots");

    if (plot_kind == "tradeoff") {
      const fs::path out =
          plot_out.empty() ? root / "plots" / "tradeoff.svg" : fs::path(plot_out);
      plot_tradeoff(aggregate_by_grammar(runs), out);
      std::cout << out.string() << "\n";
      return 0;
    }
    {
      std::vector<RunArtifacts> filtered;
      for (RunArtifacts& r : runs)
        if (r.config.grammar == plot_grammar) filtered.push_back(std::move(r));
      if (filtered.empty()) throw DataError("no runs for grammar '" + plot_grammar + "'");
      std::sort(filtered.begin(), filtered.end(),
                [](const RunArtifacts& a, const RunArtifacts& b) {
                  return a.summary.value("seed_index", 0) < b.summary.value("seed_index", 0);
                });
      const std::string stem = plot_kind + "_" + plot_grammar + ".svg";
      const fs::path out = plot_out.empty() ? root / "plots" / stem : fs::path(plot_out);
      if (plot_kind == "timelines")
        plot_timelines(aggregate(filtered), out);
      else
        plot_individuals(filtered, out);
      std::cout << out.string() << "\n";
      return 0;
    }
  }

  if (sweep->parsed()) {
    SweepConfig cfg;
    cfg.grammars = split_commas(sweep_grammars);
    if (cfg.grammars.empty()) throw ConfigError("sweep needs at least one grammar");
    cfg.seed_indices = parse_seed_list(sweep_seeds);
    cfg.master_seed = master_seed;
    cfg.base = sweep_flags.build();
    cfg.out_root = out_flag;
    cfg.jobs = jobs;
    SweepResult result = run_sweep(cfg);
    std::cout << result.run_dirs.size() << " runs -> " << result.aggregate_dir.string() << "\n";
    return 0;
  }

  return 2;
}

}  // namespace

int cli_run(const std::vector<std::string>& args) {
  try {
    return dispatch(args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace nellcom
