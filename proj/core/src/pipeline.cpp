#include "roadgen/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "roadgen/rng.hpp"
#include "roadgen/serialization.hpp"
#include "roadgen/svg.hpp"

namespace roadgen {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr std::uint64_t kModelInitStream = 0x11;
constexpr std::uint64_t kTrainStream = 0x12;
constexpr std::uint64_t kGaStream = 0x13;
constexpr std::uint64_t kBudgetStream = 0x14;

void check_keys(const ordered_json& j, const std::set<std::string>& allowed,
                const std::string& section) {
  for (const auto& item : j.items()) {
    if (allowed.find(item.key()) == allowed.end())
      throw std::runtime_error("unknown config key '" + section + item.key() + "'");
  }
}

template <typename T>
void maybe(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ordered_json geometry_to_json(const GeometryConfig& g) {
  return {{"block_size", g.block_size},
          {"step", g.step},
          {"lane_width", g.lane_width},
          {"map_size", g.map_size},
          {"curvature_limit", g.curvature_limit}};
}

void geometry_from_json(const ordered_json& j, GeometryConfig& g) {
  check_keys(j, {"block_size", "step", "lane_width", "map_size", "curvature_limit"},
             "geometry.");
  maybe(j, "block_size", g.block_size);
  maybe(j, "step", g.step);
  maybe(j, "lane_width", g.lane_width);
  maybe(j, "map_size", g.map_size);
  maybe(j, "curvature_limit", g.curvature_limit);
}

ordered_json simulator_to_json(const SimulatorConfig& s) {
  return {{"v_max", s.v_max},
          {"v_min", s.v_min},
          {"lookahead", s.lookahead},
          {"speed_preview", s.speed_preview},
          {"max_lateral_accel", s.max_lateral_accel},
          {"max_longitudinal_accel", s.max_longitudinal_accel},
          {"wheelbase", s.wheelbase},
          {"car_width", s.car_width},
          {"timestep", s.timestep},
          {"tolerance", s.tolerance},
          {"max_steps", s.max_steps}};
}

void simulator_from_json(const ordered_json& j, SimulatorConfig& s) {
  check_keys(j,
             {"v_max", "v_min", "lookahead", "speed_preview", "max_lateral_accel",
              "max_longitudinal_accel", "wheelbase", "car_width", "timestep", "tolerance",
              "max_steps"},
             "simulator.");
  maybe(j, "v_max", s.v_max);
  maybe(j, "v_min", s.v_min);
  maybe(j, "lookahead", s.lookahead);
  maybe(j, "speed_preview", s.speed_preview);
  maybe(j, "max_lateral_accel", s.max_lateral_accel);
  maybe(j, "max_longitudinal_accel", s.max_longitudinal_accel);
  maybe(j, "wheelbase", s.wheelbase);
  maybe(j, "car_width", s.car_width);
  maybe(j, "timestep", s.timestep);
  maybe(j, "tolerance", s.tolerance);
  maybe(j, "max_steps", s.max_steps);
}

// block_size is owned by the geometry section; finalize() copies it over.
ordered_json discriminator_to_json(const DiscriminatorConfig& d) {
  return {{"d_model", d.d_model},
          {"n_layers", d.n_layers},
          {"n_heads", d.n_heads},
          {"dropout", d.dropout},
          {"learning_rate", d.learning_rate},
          {"batch_size", d.batch_size},
          {"epochs", d.epochs},
          {"pos_weight_cap", d.pos_weight_cap},
          {"val_fraction", d.val_fraction},
          {"mirror_augment", d.mirror_augment}};
}

void discriminator_from_json(const ordered_json& j, DiscriminatorConfig& d) {
  check_keys(j,
             {"d_model", "n_layers", "n_heads", "dropout", "learning_rate", "batch_size",
              "epochs", "pos_weight_cap", "val_fraction", "mirror_augment"},
             "discriminator.");
  maybe(j, "d_model", d.d_model);
  maybe(j, "n_layers", d.n_layers);
  maybe(j, "n_heads", d.n_heads);
  maybe(j, "dropout", d.dropout);
  maybe(j, "learning_rate", d.learning_rate);
  maybe(j, "batch_size", d.batch_size);
  maybe(j, "epochs", d.epochs);
  maybe(j, "pos_weight_cap", d.pos_weight_cap);
  maybe(j, "val_fraction", d.val_fraction);
  maybe(j, "mirror_augment", d.mirror_augment);
}

ordered_json ga_to_json(const GAConfig& g) {
  return {{"p_crossover", g.p_crossover},
          {"p_2crossover", g.p_2crossover},
          {"p_swap", g.p_swap},
          {"p_mutation", g.p_mutation},
          {"select_f1", g.select_f1},
          {"select_f2", g.select_f2},
          {"epochs", g.epochs},
          {"mutation_min", g.mutation_min},
          {"mutation_max", g.mutation_max},
          {"mutation_halfwidth", g.mutation_halfwidth},
          {"swap_len_min", g.swap_len_min},
          {"swap_len_max", g.swap_len_max},
          {"dedup_threshold", g.dedup_threshold},
          {"smoothing_factor", g.smoothing_factor},
          {"init_mutation_min", g.init_mutation_min},
          {"init_mutation_max", g.init_mutation_max},
          {"init_mutation_ops_max", g.init_mutation_ops_max}};
}

void ga_from_json(const ordered_json& j, GAConfig& g) {
  check_keys(j,
             {"p_crossover", "p_2crossover", "p_swap", "p_mutation", "select_f1", "select_f2",
              "epochs", "mutation_min", "mutation_max", "mutation_halfwidth", "swap_len_min",
              "swap_len_max", "dedup_threshold", "smoothing_factor", "init_mutation_min",
              "init_mutation_max", "init_mutation_ops_max"},
             "ga.");
  maybe(j, "p_crossover", g.p_crossover);
  maybe(j, "p_2crossover", g.p_2crossover);
  maybe(j, "p_swap", g.p_swap);
  maybe(j, "p_mutation", g.p_mutation);
  maybe(j, "select_f1", g.select_f1);
  maybe(j, "select_f2", g.select_f2);
  maybe(j, "epochs", g.epochs);
  maybe(j, "mutation_min", g.mutation_min);
  maybe(j, "mutation_max", g.mutation_max);
  maybe(j, "mutation_halfwidth", g.mutation_halfwidth);
  maybe(j, "swap_len_min", g.swap_len_min);
  maybe(j, "swap_len_max", g.swap_len_max);
  maybe(j, "dedup_threshold", g.dedup_threshold);
  maybe(j, "smoothing_factor", g.smoothing_factor);
  maybe(j, "init_mutation_min", g.init_mutation_min);
  maybe(j, "init_mutation_max", g.init_mutation_max);
  maybe(j, "init_mutation_ops_max", g.init_mutation_ops_max);
}

void ensure_layout(const fs::path& workdir) {
  fs::create_directories(workdir / "dataset");
  fs::create_directories(workdir / "model");
  fs::create_directories(workdir / "tests");
  fs::create_directories(workdir / "generation");
  fs::create_directories(workdir / "results");
  fs::create_directories(workdir / "analysis");
  fs::create_directories(workdir / "plots");
}

void clear_files(const fs::path& dir, const std::string& extension) {
  if (!fs::is_directory(dir)) return;
  std::vector<fs::path> victims;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == extension) victims.push_back(e.path());
  for (const auto& p : victims) fs::remove(p);
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& extension) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) return files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == extension) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

std::string test_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "t%05zu", index);
  return buf;
}

}  // namespace

void RunConfig::finalize() {
  ga.geometry = geometry;
  discriminator.block_size = geometry.block_size;
  geometry.check();
  simulator.check();
  discriminator.check();
  ga.check();
  if (seed_count < 1) throw std::invalid_argument("config: seed_count must be >= 1");
  if (!(budget_seconds >= 0.0))
    throw std::invalid_argument("config: budget_seconds must be >= 0");
  if (budget_replicates < 1)
    throw std::invalid_argument("config: budget_replicates must be >= 1");
  if (!(novelty_threshold >= 0.0))
    throw std::invalid_argument("config: novelty_threshold must be >= 0");
}

void RunConfig::save(const std::filesystem::path& path) const {
  ordered_json j;
  j["seed"] = seed;
  j["seed_count"] = seed_count;
  j["budget_seconds"] = budget_seconds;
  j["budget_replicates"] = budget_replicates;
  j["novelty_threshold"] = novelty_threshold;
  j["geometry"] = geometry_to_json(geometry);
  j["simulator"] = simulator_to_json(simulator);
  j["discriminator"] = discriminator_to_json(discriminator);
  j["ga"] = ga_to_json(ga);
  write_text(path, j.dump(2) + "\n");
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  ordered_json j = ordered_json::parse(read_text(path), nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("malformed JSON in " + path.string());
  check_keys(j,
             {"seed", "seed_count", "budget_seconds", "budget_replicates", "novelty_threshold",
              "geometry", "simulator", "discriminator", "ga"},
             "");
  RunConfig cfg;
  maybe(j, "seed", cfg.seed);
  maybe(j, "seed_count", cfg.seed_count);
  maybe(j, "budget_seconds", cfg.budget_seconds);
  maybe(j, "budget_replicates", cfg.budget_replicates);
  maybe(j, "novelty_threshold", cfg.novelty_threshold);
  if (j.contains("geometry")) geometry_from_json(j.at("geometry"), cfg.geometry);
  if (j.contains("simulator")) simulator_from_json(j.at("simulator"), cfg.simulator);
  if (j.contains("discriminator"))
    discriminator_from_json(j.at("discriminator"), cfg.discriminator);
  if (j.contains("ga")) ga_from_json(j.at("ga"), cfg.ga);
  cfg.finalize();
  return cfg;
}

WorkdirLock::WorkdirLock(const std::filesystem::path& workdir) {
  fs::create_directories(workdir);
  const fs::path lock_path = workdir / ".lock";
  fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
  if (fd_ < 0) throw std::runtime_error("cannot open lock file " + lock_path.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw std::runtime_error("workdir is locked by another command: " + workdir.string());
  }
}

WorkdirLock::~WorkdirLock() {
  if (fd_ >= 0) ::close(fd_);  // closing drops the flock
}

std::filesystem::path dataset_path(const std::filesystem::path& w) {
  return w / "dataset" / "seed_pool.jsonl";
}
std::filesystem::path checkpoint_path(const std::filesystem::path& w) {
  return w / "model" / "checkpoint.bin";
}
std::filesystem::path tests_dir(const std::filesystem::path& w) { return w / "tests"; }
std::filesystem::path results_dir(const std::filesystem::path& w) { return w / "results"; }
std::filesystem::path analysis_dir(const std::filesystem::path& w) { return w / "analysis"; }
std::filesystem::path plots_dir(const std::filesystem::path& w) { return w / "plots"; }

void cmd_init_config(const std::filesystem::path& config_path, bool force) {
  if (!force && fs::exists(config_path))
    throw std::runtime_error("refusing to overwrite existing " + config_path.string() +
                             " (use --force)");
  RunConfig cfg;
  cfg.finalize();
  if (config_path.has_parent_path()) fs::create_directories(config_path.parent_path());
  cfg.save(config_path);
}

SeedSummary cmd_seed(const RunConfig& config, const std::filesystem::path& workdir) {
  RunConfig cfg = config;
  cfg.finalize();
  WorkdirLock lock(workdir);
  ensure_layout(workdir);

  const auto pool = generate_seed_pool(cfg.seed_count, cfg.seed, cfg.ga, cfg.simulator);
  save_dataset(dataset_path(workdir), pool);

  SeedSummary summary;
  summary.count = static_cast<int>(pool.size());
  for (const auto& ex : pool) {
    if (ex.any_positive()) summary.faulting_roads++;
    for (bool b : ex.labels) summary.positive_points += b ? 1 : 0;
  }
  summary.road_fault_rate =
      pool.empty() ? 0.0 : static_cast<double>(summary.faulting_roads) / pool.size();

  ordered_json j;
  j["count"] = summary.count;
  j["faulting_roads"] = summary.faulting_roads;
  j["road_fault_rate"] = summary.road_fault_rate;
  j["positive_points"] = summary.positive_points;
  write_text(workdir / "dataset" / "seed_summary.json", j.dump(2) + "\n");
  return summary;
}

TrainingReport cmd_train(const RunConfig& config, const std::filesystem::path& workdir,
                         bool verbose) {
  RunConfig cfg = config;
  cfg.finalize();
  WorkdirLock lock(workdir);
  ensure_layout(workdir);

  const auto data = load_dataset(dataset_path(workdir));
  if (data.empty()) throw std::runtime_error("empty dataset; run `seed` first");
  auto [train_set, val_set] =
      split_train_val(data, cfg.discriminator.val_fraction, cfg.seed);

  TransformerModel model =
      TransformerModel::random_init(cfg.discriminator, derive_seed(cfg.seed, kModelInitStream));
  TrainingOptions opts;
  opts.seed = derive_seed(cfg.seed, kTrainStream);
  opts.verbose = verbose;
  const TrainingReport report = train(model, train_set, val_set, opts);

  CheckpointMeta meta;
  meta.pos_weight = report.pos_weight;
  meta.seed = cfg.seed;
  meta.best_epoch = report.best_epoch;
  meta.val_loss = report.best_val.loss;
  meta.val_sensitivity = report.best_val.sensitivity;
  meta.val_specificity = report.best_val.specificity;
  save_checkpoint(checkpoint_path(workdir), model, meta);

  std::string csv = "epoch,train_loss,val_loss,sensitivity,specificity\n";
  char line[160];
  for (const auto& e : report.epochs) {
    std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f,%.6f\n", e.epoch, e.train_loss,
                  e.val_loss, e.sensitivity, e.specificity);
    csv += line;
  }
  write_text(workdir / "model" / "training_metrics.csv", csv);
  return report;
}

GenerateSummary cmd_generate(const RunConfig& config, const std::filesystem::path& workdir,
                             bool verbose) {
  RunConfig cfg = config;
  cfg.finalize();
  WorkdirLock lock(workdir);
  ensure_layout(workdir);

  LoadedCheckpoint loaded = load_checkpoint(checkpoint_path(workdir));
  if (loaded.model.config().block_size != cfg.geometry.block_size)
    throw std::runtime_error("checkpoint block size does not match the configured geometry");

  EpochCallback on_epoch = nullptr;
  if (verbose) {
    on_epoch = [](const Population&, const GaEpochMetrics& m) {
      std::fprintf(stderr, "ga epoch %3d  mean_oob %.4f  median_dist %.4f  pool %zu  dropped %zu\n",
                   m.epoch, m.mean_oob_probability, m.median_pairwise_distance, m.pool_size,
                   m.invalid_offspring_dropped);
    };
  }
  const GaRunResult result =
      run_evolution(loaded.model, cfg.ga, derive_seed(cfg.seed, kGaStream), on_epoch);

  save_population(workdir / "generation" / "population.json", result.final_population);
  save_ga_metrics_csv(workdir / "generation" / "ga_metrics.csv", result.epoch_metrics);

  clear_files(tests_dir(workdir), ".json");
  std::size_t emitted = 0;
  std::vector<RoadGenome> genomes;
  double f1_sum = 0.0;
  for (const auto& member : result.final_population.members) {
    const CartesianRoad road = reconstruct(member.genome, Pose{}, cfg.geometry.lane_width);
    if (!validate(road, member.genome, cfg.geometry.map_size, cfg.geometry.curvature_limit).valid())
      throw std::runtime_error("internal error: GA produced an invalid final genome");
    const std::string id = test_id(++emitted);
    save_test_case(tests_dir(workdir) / (id + ".json"), id, member.genome, road);
    genomes.push_back(member.genome);
    f1_sum += member.f1;
  }

  GenerateSummary summary;
  summary.initial_mean_oob = result.initial_mean_oob_probability;
  summary.final_mean_oob =
      genomes.empty() ? 0.0
                      : f1_sum / (static_cast<double>(genomes.size()) * cfg.geometry.block_size);
  summary.final_median_distance = genomes.size() > 1 ? median_pairwise_distance(genomes) : 0.0;
  summary.emitted = emitted;
  for (const auto& m : result.epoch_metrics)
    summary.invalid_offspring_total += m.invalid_offspring_dropped;

  ordered_json j;
  j["initial_mean_oob_probability"] = summary.initial_mean_oob;
  j["final_mean_oob_probability"] = summary.final_mean_oob;
  j["final_median_pairwise_distance"] = summary.final_median_distance;
  j["emitted_tests"] = summary.emitted;
  j["invalid_offspring_total"] = summary.invalid_offspring_total;
  write_text(workdir / "generation" / "generation_summary.json", j.dump(2) + "\n");
  return summary;
}

ExecuteSummary cmd_execute(const RunConfig& config, const std::filesystem::path& workdir) {
  RunConfig cfg = config;
  cfg.finalize();
  WorkdirLock lock(workdir);
  ensure_layout(workdir);

  const auto files = sorted_files(tests_dir(workdir), ".json");
  if (files.empty()) throw std::runtime_error("no test cases; run `generate` first");
  clear_files(results_dir(workdir), ".json");

  ExecuteSummary summary;
  for (const auto& file : files) {
    const TestCaseFile tc = load_test_case(file);
    TestResult result;
    result.id = tc.id;
    const CartesianRoad road = reconstruct(tc.genome, Pose{}, tc.lane_width);
    if (!validate(road, tc.genome, cfg.geometry.map_size, cfg.geometry.curvature_limit).valid()) {
      result.valid = false;
      summary.invalid++;
    } else {
      const SimulationTrace trace = simulate(road, cfg.simulator);
      result.valid = true;
      result.outcome = trace.outcome;
      result.duration = trace.duration;
      result.oob_events = trace.oob_events;
      summary.executed++;
      if (trace.outcome == Outcome::Fail) summary.faults++;
    }
    summary.total++;
    save_result(results_dir(workdir) / (tc.id + ".json"), result);
  }
  summary.fault_rate =
      summary.executed > 0 ? static_cast<double>(summary.faults) / summary.executed : 0.0;

  ordered_json j;
  j["total"] = summary.total;
  j["executed"] = summary.executed;
  j["invalid"] = summary.invalid;
  j["faults"] = summary.faults;
  j["fault_rate"] = summary.fault_rate;
  write_text(workdir / "execution_summary.json", j.dump(2) + "\n");
  return summary;
}

AnalyzeSummary cmd_analyze(const RunConfig& config, const std::filesystem::path& workdir) {
  RunConfig cfg = config;
  cfg.finalize();
  WorkdirLock lock(workdir);
  ensure_layout(workdir);

  const auto results = load_results_dir(results_dir(workdir));
  if (results.empty()) throw std::runtime_error("no results; run `execute` first");

  const auto reps = budget_replicates(results, cfg.budget_seconds, cfg.budget_replicates,
                                      derive_seed(cfg.seed, kBudgetStream));
  AnalyzeSummary summary;
  summary.budget = summarize_budget(reps, cfg.budget_seconds);
  save_budget_csv(analysis_dir(workdir) / "budget_table.csv", summary.budget);

  std::vector<RoadGenome> genomes;
  for (const auto& file : sorted_files(tests_dir(workdir), ".json"))
    genomes.push_back(load_test_case(file).genome);
  if (genomes.size() < 2) throw std::runtime_error("need at least two tests for novelty");
  summary.novelty = novelty_stats(genomes, cfg.novelty_threshold);
  write_text(analysis_dir(workdir) / "novelty.txt", render_novelty_report(summary.novelty));

  summary.fault_rate = fault_rate(results);

  ordered_json j;
  j["fault_rate"] = summary.fault_rate;
  j["budget"] = {{"budget_seconds", summary.budget.budget_seconds},
                 {"replicates", summary.budget.replicates},
                 {"executed",
                  {{"min", summary.budget.executed.min_v},
                   {"avg", summary.budget.executed.avg},
                   {"max", summary.budget.executed.max_v}}},
                 {"invalid",
                  {{"min", summary.budget.invalid.min_v},
                   {"avg", summary.budget.invalid.avg},
                   {"max", summary.budget.invalid.max_v}}},
                 {"faults",
                  {{"min", summary.budget.faults.min_v},
                   {"avg", summary.budget.faults.avg},
                   {"max", summary.budget.faults.max_v}}}};
  j["novelty"] = {{"mean_min", summary.novelty.mean_min},
                  {"mean_median", summary.novelty.mean_median},
                  {"threshold", summary.novelty.threshold},
                  {"count_above", summary.novelty.count_above}};
  write_text(analysis_dir(workdir) / "analysis_summary.json", j.dump(2) + "\n");
  return summary;
}

int cmd_plot(const RunConfig& config, const std::filesystem::path& workdir,
             const std::string& only_id) {
  RunConfig cfg = config;
  cfg.finalize();
  WorkdirLock lock(workdir);
  ensure_layout(workdir);

  std::vector<fs::path> files;
  if (only_id.empty()) {
    files = sorted_files(tests_dir(workdir), ".json");
    clear_files(plots_dir(workdir), ".svg");
  } else {
    const fs::path p = tests_dir(workdir) / (only_id + ".json");
    if (!fs::exists(p)) throw std::runtime_error("no such test case: " + only_id);
    files.push_back(p);
  }
  if (files.empty()) throw std::runtime_error("no test cases; run `generate` first");

  int written = 0;
  for (const auto& file : files) {
    const TestCaseFile tc = load_test_case(file);
    const CartesianRoad road = reconstruct(tc.genome, Pose{}, tc.lane_width);
    const bool valid = validate(road, tc.genome, cfg.geometry.map_size, cfg.geometry.curvature_limit).valid();
    SimulationTrace trace;
    if (valid) trace = simulate(road, cfg.simulator);
    save_road_svg(plots_dir(workdir) / (tc.id + ".svg"), road, valid ? &trace : nullptr);
    written++;
  }
  return written;
}

}  // namespace roadgen
