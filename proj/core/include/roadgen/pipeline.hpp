#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "roadgen/analysis.hpp"
#include "roadgen/evolution.hpp"
#include "roadgen/simulator.hpp"
#include "roadgen/training.hpp"
#include "roadgen/transformer.hpp"

namespace roadgen {

/// Whole-experiment configuration, persisted as a single JSON file.
/// Unknown keys are rejected on load; missing keys fall back to defaults.
struct RunConfig {
  std::uint64_t seed = 1;
  int seed_count = 2000;           // size of the random labelled seed pool
  double budget_seconds = 3600.0;  // analysis sampling budget
  int budget_replicates = 30;
  double novelty_threshold = 0.2;
  GeometryConfig geometry;
  SimulatorConfig simulator;
  DiscriminatorConfig discriminator;
  GAConfig ga;  // ga.geometry mirrors `geometry`; finalize() keeps them in sync

  /// Copies `geometry` into the GA section and validates every part,
  /// including cross-module consistency (model block == genome length).
  void finalize();

  void save(const std::filesystem::path& path) const;
  static RunConfig load(const std::filesystem::path& path);
};

/// Exclusive advisory lock on `<workdir>/.lock`; throws std::runtime_error
/// when another command holds it.
class WorkdirLock {
 public:
  explicit WorkdirLock(const std::filesystem::path& workdir);
  ~WorkdirLock();
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

 private:
  int fd_ = -1;
};

// Workdir layout helpers.
std::filesystem::path dataset_path(const std::filesystem::path& workdir);
std::filesystem::path checkpoint_path(const std::filesystem::path& workdir);
std::filesystem::path tests_dir(const std::filesystem::path& workdir);
std::filesystem::path results_dir(const std::filesystem::path& workdir);
std::filesystem::path analysis_dir(const std::filesystem::path& workdir);
std::filesystem::path plots_dir(const std::filesystem::path& workdir);

/// Writes a default config file; refuses to overwrite unless `force`.
void cmd_init_config(const std::filesystem::path& config_path, bool force);

struct SeedSummary {
  int count = 0;
  int faulting_roads = 0;
  long positive_points = 0;
  double road_fault_rate = 0.0;
};
/// Random labelled seed pool -> dataset/seed_pool.jsonl (+ summary JSON).
SeedSummary cmd_seed(const RunConfig& config, const std::filesystem::path& workdir);

/// Trains the discriminator on the seed pool -> model/checkpoint.bin,
/// model/training_metrics.csv. Returns the full per-epoch report.
TrainingReport cmd_train(const RunConfig& config, const std::filesystem::path& workdir,
                         bool verbose);

struct GenerateSummary {
  double initial_mean_oob = 0.0;
  double final_mean_oob = 0.0;
  double final_median_distance = 0.0;
  std::size_t emitted = 0;
  std::size_t invalid_offspring_total = 0;
};
/// Runs the GA against the trained checkpoint and emits the final
/// population as test-case files -> tests/, generation/.
GenerateSummary cmd_generate(const RunConfig& config, const std::filesystem::path& workdir,
                             bool verbose);

struct ExecuteSummary {
  int total = 0;
  int executed = 0;
  int invalid = 0;
  int faults = 0;
  double fault_rate = 0.0;
};
/// Drives every test case through the simulator -> results/.
ExecuteSummary cmd_execute(const RunConfig& config, const std::filesystem::path& workdir);

struct AnalyzeSummary {
  BudgetSummary budget;
  NoveltyStats novelty;
  double fault_rate = 0.0;
};
/// Budget sampling, novelty and fault-rate reports -> analysis/.
AnalyzeSummary cmd_analyze(const RunConfig& config, const std::filesystem::path& workdir);

/// Renders SVG plots of tests (all, or just `only_id`) -> plots/.
/// Returns the number of files written.
int cmd_plot(const RunConfig& config, const std::filesystem::path& workdir,
             const std::string& only_id);

}  // namespace roadgen
