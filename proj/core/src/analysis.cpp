#include "roadgen/analysis.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace roadgen {

BudgetSampleStats budget_sample(const std::vector<TestResult>& results, double budget_seconds,
                                Rng& rng) {
  if (results.empty()) throw std::invalid_argument("budget sampling: no results to draw from");
  if (!(budget_seconds >= 0.0))
    throw std::invalid_argument("budget sampling: budget must be >= 0");
  const bool any_valid_cost = std::any_of(results.begin(), results.end(), [](const TestResult& r) {
    return r.valid && r.duration > 0.0;
  });
  if (!any_valid_cost)
    throw std::runtime_error("budget sampling: every draw is free, sampling would not stop");

  BudgetSampleStats stats;
  for (;;) {
    const TestResult& r = results[static_cast<std::size_t>(rng.below(results.size()))];
    if (!r.valid) {
      stats.invalid++;
      continue;
    }
    if (stats.spent + r.duration > budget_seconds) break;
    stats.spent += r.duration;
    stats.executed++;
    if (r.outcome == Outcome::Fail) stats.faults++;
  }
  return stats;
}

std::vector<BudgetSampleStats> budget_replicates(const std::vector<TestResult>& results,
                                                 double budget_seconds, int replicates,
                                                 std::uint64_t seed) {
  if (replicates <= 0) throw std::invalid_argument("budget sampling: replicates must be > 0");
  std::vector<BudgetSampleStats> out;
  out.reserve(static_cast<std::size_t>(replicates));
  for (int i = 0; i < replicates; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    out.push_back(budget_sample(results, budget_seconds, rng));
  }
  return out;
}

BudgetSummary summarize_budget(const std::vector<BudgetSampleStats>& stats,
                               double budget_seconds) {
  if (stats.empty()) throw std::invalid_argument("budget summary: no replicates");
  BudgetSummary s;
  s.replicates = static_cast<int>(stats.size());
  s.budget_seconds = budget_seconds;
  auto fold = [&stats](auto pick) {
    BudgetTableRow row;
    row.min_v = std::numeric_limits<long>::max();
    row.max_v = std::numeric_limits<long>::min();
    double sum = 0.0;
    for (const auto& st : stats) {
      const long v = pick(st);
      row.min_v = std::min(row.min_v, v);
      row.max_v = std::max(row.max_v, v);
      sum += static_cast<double>(v);
    }
    row.avg = sum / static_cast<double>(stats.size());
    return row;
  };
  s.executed = fold([](const BudgetSampleStats& st) { return st.executed; });
  s.invalid = fold([](const BudgetSampleStats& st) { return st.invalid; });
  s.faults = fold([](const BudgetSampleStats& st) { return st.faults; });
  return s;
}

NoveltyStats novelty_stats(const std::vector<RoadGenome>& genomes, double threshold) {
  if (genomes.size() < 2) throw std::invalid_argument("novelty: need at least two genomes");
  NoveltyStats stats;
  stats.threshold = threshold;
  double min_sum = 0.0;
  double med_sum = 0.0;
  std::vector<double> dist;
  dist.reserve(genomes.size() - 1);
  for (std::size_t i = 0; i < genomes.size(); ++i) {
    dist.clear();
    for (std::size_t j = 0; j < genomes.size(); ++j)
      if (j != i) dist.push_back(genome_distance(genomes[i], genomes[j]));
    std::sort(dist.begin(), dist.end());
    const double mn = dist.front();
    const std::size_t m = dist.size();
    const double med = (m % 2 == 1) ? dist[m / 2] : 0.5 * (dist[m / 2 - 1] + dist[m / 2]);
    min_sum += mn;
    med_sum += med;
    if (mn > threshold) stats.count_above++;
  }
  stats.mean_min = min_sum / static_cast<double>(genomes.size());
  stats.mean_median = med_sum / static_cast<double>(genomes.size());
  return stats;
}

double fault_rate(const std::vector<TestResult>& results) {
  long valid = 0, faults = 0;
  for (const auto& r : results) {
    if (!r.valid) continue;
    valid++;
    if (r.outcome == Outcome::Fail) faults++;
  }
  if (valid == 0) throw std::invalid_argument("fault rate: no valid results");
  return static_cast<double>(faults) / static_cast<double>(valid);
}

}  // namespace roadgen
