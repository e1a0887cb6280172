#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "roadgen/geometry.hpp"
#include "roadgen/rng.hpp"
#include "roadgen/simulator.hpp"
#include "roadgen/transformer.hpp"

namespace roadgen {

/// Diversity-aware elitist GA over road genomes. Fitness F1 is the
/// discriminator's summed OOB probability, F2 the median distance to the
/// rest of the candidate set.
struct GAConfig {
  double p_crossover = 0.8;    // per disjoint pair of shuffled eligible parents
  double p_2crossover = 0.4;   // two-point variant, given a crossover happens
  double p_swap = 0.4;         // per eligible member
  double p_mutation = 0.2;     // per eligible member
  int select_f1 = 300;         // F1 truncation size      (reference setup: 3000)
  int select_f2 = 200;         // population size after F2 (reference setup: 2000)
  int epochs = 50;
  double mutation_min = -0.7;  // curvature delta range of the mutation operator
  double mutation_max = 0.7;
  int mutation_halfwidth = 3;  // points touched each side of the centre
  int swap_len_min = 5;
  int swap_len_max = 15;
  double dedup_threshold = 0.2;    // reproduction-eligibility distance
  double smoothing_factor = 0.01;  // applied to every offspring
  double init_mutation_min = -0.2;
  double init_mutation_max = 0.2;
  int init_mutation_ops_max = 4;   // random genomes get 1..max mutations
  GeometryConfig geometry;

  void check() const;  // throws std::invalid_argument
};

struct ScoredGenome {
  RoadGenome genome;
  double f1 = 0.0;
  double f2 = 0.0;
  std::uint64_t id = 0;  // insertion order; ties in either fitness break by id
};

struct Population {
  std::vector<ScoredGenome> members;
  int epoch = 0;
  std::uint64_t next_id = 0;
};

struct GaEpochMetrics {
  int epoch = 0;
  double mean_oob_probability = 0.0;     // mean f1 / block_size over members
  double median_pairwise_distance = 0.0; // over all member pairs
  std::size_t pool_size = 0;             // parents + valid offspring
  std::size_t invalid_offspring_dropped = 0;
};

// --- Variation operators. The *_at forms take explicit cut points and are
// the deterministic core; the Rng forms draw the points. All operators
// require matching uniform arc grids and throw std::invalid_argument on
// out-of-range arguments.

/// Single-point crossover at cut k in [1, n-1]; returns both children.
std::pair<RoadGenome, RoadGenome> crossover_at(const RoadGenome& a, const RoadGenome& b,
                                               std::size_t k);
std::pair<RoadGenome, RoadGenome> crossover(const RoadGenome& a, const RoadGenome& b, Rng& rng);

/// Two-point crossover, 1 <= k1 < k2 <= n-1.
std::pair<RoadGenome, RoadGenome> k_crossover_at(const RoadGenome& a, const RoadGenome& b,
                                                 std::size_t k1, std::size_t k2);
std::pair<RoadGenome, RoadGenome> k_crossover(const RoadGenome& a, const RoadGenome& b, Rng& rng);

/// Swaps the curvature windows [s1, s1+len) and [s2, s2+len); windows must
/// not overlap (s2 >= s1 + len) and must fit the genome.
RoadGenome swap_segments_at(const RoadGenome& g, std::size_t s1, std::size_t s2,
                            std::size_t len);
RoadGenome swap_segments(const RoadGenome& g, Rng& rng, const GAConfig& cfg);

/// Adds `value` to every curvature in the window centre +- halfwidth
/// (clamped to the genome).
RoadGenome mutate_at(const RoadGenome& g, std::size_t centre, double value, int halfwidth);
RoadGenome mutate(const RoadGenome& g, Rng& rng, double value_min, double value_max,
                  int halfwidth);

/// Random valid genomes: straight roads with 1..init_mutation_ops_max local
/// curvature bumps, smoothed, resampled until valid.
std::vector<RoadGenome> init_random(int n, Rng& rng, const GAConfig& cfg);

/// Greedy diversity filter: members are visited in (f1 desc, id asc) order
/// and marked eligible when at least `threshold` away from every genome
/// already marked (so a zero threshold keeps everything). Returns the
/// eligible indices in visiting order.
std::vector<std::size_t> mark_reproduction_eligible(const std::vector<ScoredGenome>& members,
                                                    double threshold);

/// Median of all C(n,2) pairwise genome distances.
double median_pairwise_distance(const std::vector<RoadGenome>& genomes);

/// Fills each member's f1 with the discriminator's summed OOB probability.
void score_f1(const TransformerModel& model, std::vector<ScoredGenome>& members);

/// One generation: variation over the eligible set, offspring smoothing and
/// validation (invalid offspring are dropped and counted), then elitist
/// (parents + offspring) truncation by F1 followed by F2.
Population evolve_epoch(const Population& pop, const TransformerModel& model,
                        const GAConfig& cfg, Rng& rng, GaEpochMetrics* metrics);

/// Scored random population of cfg.select_f2 genomes.
Population make_initial_population(const TransformerModel& model, const GAConfig& cfg, Rng& rng);

struct GaRunResult {
  Population final_population;
  std::vector<GaEpochMetrics> epoch_metrics;
  double initial_mean_oob_probability = 0.0;
};

using EpochCallback = std::function<void(const Population&, const GaEpochMetrics&)>;

/// Full run: initial population + cfg.epochs generations, seeded by `seed`.
/// `on_epoch` (optional) fires after every generation.
GaRunResult run_evolution(const TransformerModel& model, const GAConfig& cfg, std::uint64_t seed,
                          const EpochCallback& on_epoch = nullptr);

/// Simulator-labelled random road dataset: n valid genomes, each driven by
/// the desk simulator and labelled at the OOB points.
std::vector<LabeledRoad> generate_seed_pool(int n, std::uint64_t seed, const GAConfig& ga,
                                            const SimulatorConfig& sim);

}  // namespace roadgen
