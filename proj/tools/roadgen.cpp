// roadgen: command-line harness for the closed-loop road test generator.
//
// Pipeline: init-config -> seed -> train -> generate -> execute -> analyze
// (plot renders SVGs of generated tests at any point after `generate`).

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "roadgen/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config = "config.json";
  std::string workdir = "workdir";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config, "Path to the run configuration JSON")
      ->capture_default_str();
  cmd->add_option("-w,--workdir", args.workdir, "Working directory for all artifacts")
      ->capture_default_str();
  cmd->add_option("-s,--seed", args.seed, "Override the master seed from the config")
      ->each([&args](const std::string&) { args.seed_set = true; });
}

roadgen::RunConfig load_config(const CommonArgs& args) {
  roadgen::RunConfig cfg = roadgen::RunConfig::load(args.config);
  if (args.seed_set) cfg.seed = args.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop road test generator for a lane-keeping agent"};
  app.require_subcommand(1);

  std::string init_path = "config.json";
  bool init_force = false;
  CLI::App* init = app.add_subcommand("init-config", "Write a default configuration file");
  init->add_option("-c,--config", init_path, "Where to write the config")
      ->capture_default_str();
  init->add_flag("-f,--force", init_force, "Overwrite an existing file");

  CommonArgs seed_args, train_args, gen_args, exec_args, analyze_args, plot_args;
  bool train_verbose = false, gen_verbose = false;
  std::string plot_id;

  CLI::App* seed = app.add_subcommand("seed", "Create the simulator-labelled seed dataset");
  add_common(seed, seed_args);

  CLI::App* train = app.add_subcommand("train", "Train the surrogate discriminator");
  add_common(train, train_args);
  train->add_flag("-v,--verbose", train_verbose, "Per-epoch progress on stderr");

  CLI::App* generate =
      app.add_subcommand("generate", "Evolve a diverse population of failing road tests");
  add_common(generate, gen_args);
  generate->add_flag("-v,--verbose", gen_verbose, "Per-generation progress on stderr");

  CLI::App* execute = app.add_subcommand("execute", "Run every generated test in the simulator");
  add_common(execute, exec_args);

  CLI::App* analyze =
      app.add_subcommand("analyze", "Budget, novelty and fault-rate reports from the results");
  add_common(analyze, analyze_args);

  CLI::App* plot = app.add_subcommand("plot", "Render generated tests as SVG drawings");
  add_common(plot, plot_args);
  plot->add_option("--id", plot_id, "Render only this test id (e.g. t00001)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the parse error itself
    return code == 0 ? 0 : 2;
  }

  try {
    if (init->parsed()) {
      roadgen::cmd_init_config(init_path, init_force);
      std::printf("wrote %s\n", init_path.c_str());
    } else if (seed->parsed()) {
      const auto s = roadgen::cmd_seed(load_config(seed_args), seed_args.workdir);
      std::printf("seeded %d roads: %d faulting (%.1f%%), %ld positive points\n", s.count,
                  s.faulting_roads, 100.0 * s.road_fault_rate, s.positive_points);
    } else if (train->parsed()) {
      const auto r = roadgen::cmd_train(load_config(train_args), train_args.workdir,
                                        train_verbose);
      std::printf(
          "trained %zu epochs; best epoch %d: val_loss %.4f sensitivity %.3f specificity %.3f\n",
          r.epochs.size(), r.best_epoch, r.best_val.loss, r.best_val.sensitivity,
          r.best_val.specificity);
    } else if (generate->parsed()) {
      const auto g =
          roadgen::cmd_generate(load_config(gen_args), gen_args.workdir, gen_verbose);
      std::printf(
          "generated %zu tests: mean predicted OOB %.4f -> %.4f, median distance %.4f, "
          "%zu invalid offspring dropped\n",
          g.emitted, g.initial_mean_oob, g.final_mean_oob, g.final_median_distance,
          g.invalid_offspring_total);
    } else if (execute->parsed()) {
      const auto e = roadgen::cmd_execute(load_config(exec_args), exec_args.workdir);
      std::printf("executed %d/%d tests (%d invalid): %d faults (%.1f%%)\n", e.executed,
                  e.total, e.invalid, e.faults, 100.0 * e.fault_rate);
    } else if (analyze->parsed()) {
      const auto a = roadgen::cmd_analyze(load_config(analyze_args), analyze_args.workdir);
      std::printf("fault rate %.3f; budget avg executed %.2f / invalid %.2f / faults %.2f; "
                  "novelty mean min %.3f, %zu above %.2f\n",
                  a.fault_rate, a.budget.executed.avg, a.budget.invalid.avg,
                  a.budget.faults.avg, a.novelty.mean_min, a.novelty.count_above,
                  a.novelty.threshold);
    } else if (plot->parsed()) {
      const int n = roadgen::cmd_plot(load_config(plot_args), plot_args.workdir, plot_id);
      std::printf("wrote %d SVG file%s\n", n, n == 1 ? "" : "s");
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
