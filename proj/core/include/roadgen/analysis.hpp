#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "roadgen/geometry.hpp"
#include "roadgen/rng.hpp"
#include "roadgen/simulator.hpp"

namespace roadgen {

/// Outcome of executing (or rejecting) one generated test.
struct TestResult {
  std::string id;
  bool valid = true;          // invalid tests were rejected before execution
  Outcome outcome = Outcome::Pass;
  double duration = 0.0;      // wall-clock cost of the simulated run [s]
  std::vector<OobEvent> oob_events;
};

/// One replicate of sampling-with-replacement under a time budget.
struct BudgetSampleStats {
  long executed = 0;   // valid tests run within the budget
  long invalid = 0;    // invalid draws (cost nothing, execute nothing)
  long faults = 0;     // executed tests that ended out of bounds
  double spent = 0.0;  // accumulated duration of the executed tests [s]
};

/// Draws tests uniformly with replacement until the next valid draw would
/// push the accumulated duration past `budget_seconds`. Invalid draws are
/// free and are tallied separately. Deterministic in `rng`.
BudgetSampleStats budget_sample(const std::vector<TestResult>& results, double budget_seconds,
                                Rng& rng);

/// Independent replicates, one derived RNG stream per replicate.
std::vector<BudgetSampleStats> budget_replicates(const std::vector<TestResult>& results,
                                                 double budget_seconds, int replicates,
                                                 std::uint64_t seed);

struct BudgetTableRow {
  long min_v = 0;
  double avg = 0.0;
  long max_v = 0;
};

/// Min/avg/max of each tally across replicates (the report table shape).
struct BudgetSummary {
  BudgetTableRow executed, invalid, faults;
  int replicates = 0;
  double budget_seconds = 0.0;
};

BudgetSummary summarize_budget(const std::vector<BudgetSampleStats>& stats,
                               double budget_seconds);

/// Population novelty: per genome, the minimum and the median distance to
/// the others; aggregated as means plus the count of genomes whose nearest
/// neighbour is farther than `threshold`.
struct NoveltyStats {
  double mean_min = 0.0;
  double mean_median = 0.0;
  std::size_t count_above = 0;
  double threshold = 0.0;
};

NoveltyStats novelty_stats(const std::vector<RoadGenome>& genomes, double threshold);

/// Share of executed (valid) tests that ended out of bounds. Throws when no
/// valid result exists.
double fault_rate(const std::vector<TestResult>& results);

}  // namespace roadgen
