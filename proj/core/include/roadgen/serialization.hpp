#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "roadgen/analysis.hpp"
#include "roadgen/evolution.hpp"
#include "roadgen/geometry.hpp"
#include "roadgen/simulator.hpp"
#include "roadgen/transformer.hpp"

namespace roadgen {

// All writers emit deterministic bytes (stable field order, no timestamps)
// and all numeric round trips are exact. Loaders validate and throw
// std::runtime_error on malformed input.

/// Test case on disk: genome, reconstructed centerline points, lane width.
struct TestCaseFile {
  std::string id;
  RoadGenome genome;
  double lane_width = kDefaultLaneWidth;
};

void save_test_case(const std::filesystem::path& path, const std::string& id,
                    const RoadGenome& genome, const CartesianRoad& road);
TestCaseFile load_test_case(const std::filesystem::path& path);

void save_result(const std::filesystem::path& path, const TestResult& result);
TestResult load_result(const std::filesystem::path& path);

/// Loads every "*.json" in the directory, sorted by filename.
std::vector<TestResult> load_results_dir(const std::filesystem::path& dir);

/// JSONL training data, one labelled genome per line.
void save_dataset(const std::filesystem::path& path, const std::vector<LabeledRoad>& data);
std::vector<LabeledRoad> load_dataset(const std::filesystem::path& path);

struct CheckpointMeta {
  double pos_weight = 1.0;
  std::uint64_t seed = 0;
  int best_epoch = 0;
  double val_loss = 0.0;
  double val_sensitivity = 0.0;
  double val_specificity = 0.0;
};

/// Versioned binary checkpoint: magic, JSON header (config, meta, tensor
/// manifest), then the raw little-endian f64 tensor data.
void save_checkpoint(const std::filesystem::path& path, const TransformerModel& model,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
  TransformerModel model;
  CheckpointMeta meta;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

void save_population(const std::filesystem::path& path, const Population& pop);
Population load_population(const std::filesystem::path& path);

/// Per-generation GA metrics as CSV.
void save_ga_metrics_csv(const std::filesystem::path& path,
                         const std::vector<GaEpochMetrics>& metrics);

/// Budget-sampling summary in the report-table shape
/// (Statistic, Min., Avg., Max. rows for executed / invalid / faults).
void save_budget_csv(const std::filesystem::path& path, const BudgetSummary& summary);

std::string render_novelty_report(const NoveltyStats& stats);

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

}  // namespace roadgen
