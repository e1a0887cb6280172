#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>

#include "roadgen/pipeline.hpp"
#include "roadgen/rng.hpp"
#include "roadgen/serialization.hpp"

using namespace roadgen;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    const auto tick = std::chrono::steady_clock::now().time_since_epoch().count();
    path = fs::temp_directory_path() /
           ("roadgen-pipe-test-" +
            std::to_string(Rng(static_cast<std::uint64_t>(tick)).next_u64() % 1000000000));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Desk pipeline shrunk to seconds: tiny model, small population.
RunConfig micro_config() {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.seed_count = 80;
  cfg.budget_seconds = 60.0;
  cfg.budget_replicates = 5;
  cfg.discriminator.d_model = 16;
  cfg.discriminator.n_layers = 1;
  cfg.discriminator.n_heads = 2;
  cfg.discriminator.epochs = 4;
  cfg.discriminator.batch_size = 32;
  cfg.ga.select_f1 = 30;
  cfg.ga.select_f2 = 20;
  cfg.ga.epochs = 3;
  cfg.finalize();
  return cfg;
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) n++;
  return n;
}

}  // namespace

TEST_CASE("run configuration round-trips and validates") {
  TempDir tmp;
  RunConfig cfg = micro_config();
  const fs::path p = tmp.path / "config.json";
  cfg.save(p);
  const RunConfig back = RunConfig::load(p);
  CHECK(back.seed == cfg.seed);
  CHECK(back.seed_count == cfg.seed_count);
  CHECK(back.budget_seconds == cfg.budget_seconds);
  CHECK(back.discriminator.d_model == 16);
  CHECK(back.ga.select_f2 == 20);
  // finalize() mirrored the geometry into the GA section.
  CHECK(back.ga.geometry.block_size == back.geometry.block_size);
  CHECK(back.discriminator.block_size == back.geometry.block_size);
}

TEST_CASE("unknown configuration keys are rejected, missing keys default") {
  TempDir tmp;
  const fs::path p = tmp.path / "config.json";

  write_text(p, R"({"seed": 3, "geometry": {"block_size": 40}})");
  const RunConfig partial = RunConfig::load(p);
  CHECK(partial.seed == 3);
  CHECK(partial.geometry.block_size == 40);
  CHECK(partial.discriminator.block_size == 40);  // synced by finalize()
  CHECK(partial.seed_count == 2000);              // untouched default

  write_text(p, R"({"seeed": 3})");
  CHECK_THROWS_AS(RunConfig::load(p), std::runtime_error);
  write_text(p, R"({"geometry": {"blok_size": 40}})");
  CHECK_THROWS_AS(RunConfig::load(p), std::runtime_error);
  write_text(p, R"({"discriminator": {"epochs": "often"}})");
  CHECK_THROWS(RunConfig::load(p));
  write_text(p, "{[");
  CHECK_THROWS_AS(RunConfig::load(p), std::runtime_error);

  write_text(p, R"({"seed_count": 0})");
  CHECK_THROWS_AS(RunConfig::load(p), std::invalid_argument);
}

TEST_CASE("init-config refuses to clobber without force") {
  TempDir tmp;
  const fs::path p = tmp.path / "config.json";
  cmd_init_config(p, false);
  CHECK(fs::exists(p));
  const RunConfig cfg = RunConfig::load(p);  // default config is loadable
  CHECK(cfg.seed_count == 2000);
  CHECK_THROWS_AS(cmd_init_config(p, false), std::runtime_error);
  cmd_init_config(p, true);  // force path
}

TEST_CASE("the workdir lock is exclusive and released on destruction") {
  TempDir tmp;
  const fs::path w = tmp.path / "workdir";
  auto first = std::make_unique<WorkdirLock>(w);
  CHECK_THROWS_AS(WorkdirLock{w}, std::runtime_error);
  first.reset();
  WorkdirLock again{w};  // relockable after release
}

TEST_CASE("commands demand their upstream artifacts") {
  TempDir tmp;
  const RunConfig cfg = micro_config();
  const fs::path w = tmp.path / "workdir";
  CHECK_THROWS_AS(cmd_train(cfg, w, false), std::runtime_error);
  CHECK_THROWS_AS(cmd_generate(cfg, w, false), std::runtime_error);
  CHECK_THROWS_AS(cmd_execute(cfg, w), std::runtime_error);
  CHECK_THROWS_AS(cmd_analyze(cfg, w), std::runtime_error);
  CHECK_THROWS_AS(cmd_plot(cfg, w, ""), std::runtime_error);
}

TEST_CASE("the micro pipeline runs end to end with coherent artifacts") {
  TempDir tmp;
  const RunConfig cfg = micro_config();
  const fs::path w = tmp.path / "workdir";

  // --- seed
  const SeedSummary seed = cmd_seed(cfg, w);
  CHECK(seed.count == 80);
  CHECK(seed.faulting_roads > 0);
  CHECK(seed.faulting_roads < 80);
  CHECK(seed.road_fault_rate == doctest::Approx(seed.faulting_roads / 80.0));
  CHECK(fs::exists(dataset_path(w)));
  CHECK(fs::exists(w / "dataset" / "seed_summary.json"));

  // Seeding is byte-deterministic.
  const std::string pool_bytes = read_text(dataset_path(w));
  cmd_seed(cfg, w);
  CHECK(read_text(dataset_path(w)) == pool_bytes);

  // --- train
  const TrainingReport report = cmd_train(cfg, w, false);
  CHECK(report.epochs.size() == 4);
  CHECK(fs::exists(checkpoint_path(w)));
  CHECK(fs::exists(w / "model" / "training_metrics.csv"));
  const std::string csv = read_text(w / "model" / "training_metrics.csv");
  CHECK(csv.rfind("epoch,train_loss,val_loss,sensitivity,specificity\n", 0) == 0);

  // --- generate
  const GenerateSummary gen = cmd_generate(cfg, w, false);
  CHECK(gen.emitted == 20);
  CHECK(count_files(tests_dir(w), ".json") == 20);
  CHECK(fs::exists(w / "generation" / "population.json"));
  CHECK(fs::exists(w / "generation" / "ga_metrics.csv"));
  CHECK(fs::exists(w / "generation" / "generation_summary.json"));
  CHECK(gen.initial_mean_oob > 0.0);
  CHECK(gen.final_mean_oob > 0.0);
  const Population pop = load_population(w / "generation" / "population.json");
  CHECK(pop.members.size() == 20);
  CHECK(pop.epoch == 3);

  // Test ids are sequential and zero-padded.
  CHECK(fs::exists(tests_dir(w) / "t00001.json"));
  CHECK(fs::exists(tests_dir(w) / "t00020.json"));

  // --- execute
  const ExecuteSummary exec = cmd_execute(cfg, w);
  CHECK(exec.total == 20);
  CHECK(exec.executed == 20);  // generate never emits invalid tests
  CHECK(exec.invalid == 0);
  CHECK(exec.faults >= 0);
  CHECK(count_files(results_dir(w), ".json") == 20);
  CHECK(fs::exists(w / "execution_summary.json"));
  const TestResult r1 = load_result(results_dir(w) / "t00001.json");
  CHECK(r1.id == "t00001");
  CHECK(r1.valid);
  CHECK(r1.duration > 0.0);

  // --- analyze
  const AnalyzeSummary an = cmd_analyze(cfg, w);
  CHECK(an.budget.replicates == 5);
  CHECK(an.budget.executed.min_v <= an.budget.executed.max_v);
  CHECK(an.budget.executed.avg >= an.budget.executed.min_v);
  CHECK(an.budget.executed.avg <= an.budget.executed.max_v);
  CHECK(an.novelty.threshold == 0.2);
  CHECK(an.fault_rate == doctest::Approx(exec.faults / 20.0));
  CHECK(fs::exists(analysis_dir(w) / "budget_table.csv"));
  CHECK(fs::exists(analysis_dir(w) / "novelty.txt"));
  CHECK(fs::exists(analysis_dir(w) / "analysis_summary.json"));
  const std::string budget_csv = read_text(analysis_dir(w) / "budget_table.csv");
  CHECK(budget_csv.rfind("Statistic,Min.,Avg.,Max.\n", 0) == 0);
  CHECK(budget_csv.find("# Executed,") != std::string::npos);

  // --- plot
  CHECK(cmd_plot(cfg, w, "") == 20);
  CHECK(count_files(plots_dir(w), ".svg") == 20);
  CHECK(cmd_plot(cfg, w, "t00003") == 1);
  CHECK_THROWS_AS(cmd_plot(cfg, w, "t99999"), std::runtime_error);
  const std::string svg = read_text(plots_dir(w) / "t00003.svg");
  CHECK(svg.rfind("<svg", 0) == 0);

  // A repeated generate clears stale test files first.
  const GenerateSummary gen2 = cmd_generate(cfg, w, false);
  CHECK(gen2.emitted == 20);
  CHECK(count_files(tests_dir(w), ".json") == 20);
}

TEST_CASE("checkpoints from another geometry are rejected at generate time") {
  TempDir tmp;
  RunConfig cfg = micro_config();
  const fs::path w = tmp.path / "workdir";
  cmd_seed(cfg, w);
  cmd_train(cfg, w, false);

  RunConfig other = cfg;
  other.geometry.block_size = 40;
  other.finalize();
  CHECK_THROWS_AS(cmd_generate(other, w, false), std::runtime_error);
}
