#include "roadgen/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace roadgen {

namespace {

void require_same_grid(const RoadGenome& a, const RoadGenome& b) {
  if (a.size() != b.size() || a.arc_length != b.arc_length)
    throw std::invalid_argument("operator: parents must share the arc grid");
}

/// Median of a mutable value buffer (even counts average the middle two).
double median_of(std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  if (m % 2 == 1) return v[m / 2];
  return 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

bool genome_is_valid(const RoadGenome& g, const GeometryConfig& geo) {
  const CartesianRoad road = reconstruct(g, Pose{}, geo.lane_width);
  return validate(road, g, geo.map_size, geo.curvature_limit).valid();
}

/// (f1 desc, id asc) ordering used by both eligibility and F1 truncation.
std::vector<std::size_t> order_by_f1(const std::vector<ScoredGenome>& members) {
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&members](std::size_t x, std::size_t y) {
    if (members[x].f1 != members[y].f1) return members[x].f1 > members[y].f1;
    return members[x].id < members[y].id;
  });
  return order;
}

}  // namespace

void GAConfig::check() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(p_crossover) || !prob(p_2crossover) || !prob(p_swap) || !prob(p_mutation))
    throw std::invalid_argument("ga: operator probabilities must lie in [0, 1]");
  if (select_f2 < 2 || select_f1 < select_f2)
    throw std::invalid_argument("ga: need select_f1 >= select_f2 >= 2");
  if (epochs < 0) throw std::invalid_argument("ga: epochs must be >= 0");
  if (!(mutation_min < mutation_max) || !(init_mutation_min < init_mutation_max))
    throw std::invalid_argument("ga: mutation ranges must be non-empty");
  if (mutation_halfwidth < 0) throw std::invalid_argument("ga: halfwidth must be >= 0");
  if (swap_len_min < 1 || swap_len_max < swap_len_min)
    throw std::invalid_argument("ga: need 1 <= swap_len_min <= swap_len_max");
  if (2 * swap_len_min > geometry.block_size)
    throw std::invalid_argument("ga: swap windows cannot fit the genome");
  if (!(dedup_threshold >= 0.0)) throw std::invalid_argument("ga: dedup_threshold must be >= 0");
  if (!(smoothing_factor >= 0.0))
    throw std::invalid_argument("ga: smoothing_factor must be >= 0");
  if (init_mutation_ops_max < 1)
    throw std::invalid_argument("ga: init_mutation_ops_max must be >= 1");
  geometry.check();
}

std::pair<RoadGenome, RoadGenome> crossover_at(const RoadGenome& a, const RoadGenome& b,
                                               std::size_t k) {
  require_same_grid(a, b);
  const std::size_t n = a.size();
  if (k < 1 || k > n - 1) throw std::invalid_argument("crossover: cut outside [1, n-1]");
  RoadGenome c1 = a, c2 = b;
  for (std::size_t i = k; i < n; ++i) {
    c1.curvature[i] = b.curvature[i];
    c2.curvature[i] = a.curvature[i];
  }
  return {std::move(c1), std::move(c2)};
}

std::pair<RoadGenome, RoadGenome> crossover(const RoadGenome& a, const RoadGenome& b, Rng& rng) {
  return crossover_at(a, b, rng.range(1, a.size() - 1));
}

std::pair<RoadGenome, RoadGenome> k_crossover_at(const RoadGenome& a, const RoadGenome& b,
                                                 std::size_t k1, std::size_t k2) {
  require_same_grid(a, b);
  const std::size_t n = a.size();
  if (k1 < 1 || k2 <= k1 || k2 > n - 1)
    throw std::invalid_argument("k_crossover: need 1 <= k1 < k2 <= n-1");
  RoadGenome c1 = a, c2 = b;
  for (std::size_t i = k1; i < k2; ++i) {
    c1.curvature[i] = b.curvature[i];
    c2.curvature[i] = a.curvature[i];
  }
  return {std::move(c1), std::move(c2)};
}

std::pair<RoadGenome, RoadGenome> k_crossover(const RoadGenome& a, const RoadGenome& b,
                                              Rng& rng) {
  const std::size_t n = a.size();
  if (n < 3) throw std::invalid_argument("k_crossover: genome too short");
  const std::size_t k1 = rng.range(1, n - 2);
  const std::size_t k2 = rng.range(k1 + 1, n - 1);
  return k_crossover_at(a, b, k1, k2);
}

RoadGenome swap_segments_at(const RoadGenome& g, std::size_t s1, std::size_t s2,
                            std::size_t len) {
  const std::size_t n = g.size();
  if (len == 0 || s2 < s1 + len || s2 + len > n)
    throw std::invalid_argument("swap: windows must be disjoint and inside the genome");
  RoadGenome out = g;
  for (std::size_t i = 0; i < len; ++i)
    std::swap(out.curvature[s1 + i], out.curvature[s2 + i]);
  return out;
}

RoadGenome swap_segments(const RoadGenome& g, Rng& rng, const GAConfig& cfg) {
  const std::size_t n = g.size();
  const std::size_t len_max =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.swap_len_max), n / 2);
  const std::size_t len_min = static_cast<std::size_t>(cfg.swap_len_min);
  if (len_min > len_max) throw std::invalid_argument("swap: genome too short for the window");
  const std::size_t len = rng.range(len_min, len_max);
  const std::size_t s1 = rng.range(0, n - 2 * len);
  const std::size_t s2 = rng.range(s1 + len, n - len);
  return swap_segments_at(g, s1, s2, len);
}

RoadGenome mutate_at(const RoadGenome& g, std::size_t centre, double value, int halfwidth) {
  const std::size_t n = g.size();
  if (centre >= n) throw std::invalid_argument("mutate: centre outside the genome");
  if (halfwidth < 0) throw std::invalid_argument("mutate: halfwidth must be >= 0");
  RoadGenome out = g;
  const std::size_t lo = centre >= static_cast<std::size_t>(halfwidth)
                             ? centre - static_cast<std::size_t>(halfwidth)
                             : 0;
  const std::size_t hi = std::min(n - 1, centre + static_cast<std::size_t>(halfwidth));
  for (std::size_t i = lo; i <= hi; ++i) out.curvature[i] += value;
  return out;
}

RoadGenome mutate(const RoadGenome& g, Rng& rng, double value_min, double value_max,
                  int halfwidth) {
  const std::size_t centre = rng.below(g.size());
  const double value = rng.uniform(value_min, value_max);
  return mutate_at(g, centre, value, halfwidth);
}

std::vector<RoadGenome> init_random(int n, Rng& rng, const GAConfig& cfg) {
  cfg.check();
  if (n < 0) throw std::invalid_argument("init_random: n must be >= 0");
  std::vector<RoadGenome> out;
  out.reserve(static_cast<std::size_t>(n));
  const std::vector<double> zeros(static_cast<std::size_t>(cfg.geometry.block_size), 0.0);
  long attempts = 0;
  const long max_attempts = 1000L * std::max(n, 1);
  while (static_cast<int>(out.size()) < n) {
    if (++attempts > max_attempts)
      throw std::runtime_error("init_random: could not sample enough valid genomes");
    RoadGenome g = RoadGenome::with_uniform_step(zeros, cfg.geometry.step);
    const std::size_t ops = rng.range(1, static_cast<std::size_t>(cfg.init_mutation_ops_max));
    for (std::size_t i = 0; i < ops; ++i)
      g = mutate(g, rng, cfg.init_mutation_min, cfg.init_mutation_max, cfg.mutation_halfwidth);
    g = smooth(g, cfg.smoothing_factor);
    if (genome_is_valid(g, cfg.geometry)) out.push_back(std::move(g));
  }
  return out;
}

std::vector<std::size_t> mark_reproduction_eligible(const std::vector<ScoredGenome>& members,
                                                    double threshold) {
  std::vector<std::size_t> eligible;
  for (std::size_t idx : order_by_f1(members)) {
    // Keep members at least `threshold` apart; a zero threshold disables
    // deduplication entirely (even exact duplicates stay eligible).
    bool distinct = true;
    for (std::size_t kept : eligible) {
      if (genome_distance(members[idx].genome, members[kept].genome) < threshold) {
        distinct = false;
        break;
      }
    }
    if (distinct) eligible.push_back(idx);
  }
  return eligible;
}

double median_pairwise_distance(const std::vector<RoadGenome>& genomes) {
  if (genomes.size() < 2)
    throw std::invalid_argument("median pairwise distance needs >= 2 genomes");
  std::vector<double> d;
  d.reserve(genomes.size() * (genomes.size() - 1) / 2);
  for (std::size_t i = 0; i < genomes.size(); ++i)
    for (std::size_t j = i + 1; j < genomes.size(); ++j)
      d.push_back(genome_distance(genomes[i], genomes[j]));
  return median_of(d);
}

void score_f1(const TransformerModel& model, std::vector<ScoredGenome>& members) {
  std::vector<RoadGenome> genomes;
  genomes.reserve(members.size());
  for (const auto& m : members) genomes.push_back(m.genome);
  const auto scores = model.forward_many(genomes);
  for (std::size_t i = 0; i < members.size(); ++i) members[i].f1 = scores[i].f1;
}

Population evolve_epoch(const Population& pop, const TransformerModel& model,
                        const GAConfig& cfg, Rng& rng, GaEpochMetrics* metrics) {
  cfg.check();
  if (pop.members.empty()) throw std::invalid_argument("evolve: empty population");

  const auto eligible = mark_reproduction_eligible(pop.members, cfg.dedup_threshold);

  // Variation. Crossover pairs disjoint partners off a shuffled copy of the
  // eligible list; swap and mutation visit it in eligibility order.
  std::vector<RoadGenome> offspring;
  std::vector<std::size_t> shuffled = eligible;
  rng.shuffle(shuffled);
  for (std::size_t i = 0; i + 1 < shuffled.size(); i += 2) {
    if (rng.uniform() >= cfg.p_crossover) continue;
    const RoadGenome& a = pop.members[shuffled[i]].genome;
    const RoadGenome& b = pop.members[shuffled[i + 1]].genome;
    auto kids = rng.uniform() < cfg.p_2crossover ? k_crossover(a, b, rng) : crossover(a, b, rng);
    offspring.push_back(std::move(kids.first));
    offspring.push_back(std::move(kids.second));
  }
  for (std::size_t idx : eligible) {
    if (rng.uniform() < cfg.p_swap)
      offspring.push_back(swap_segments(pop.members[idx].genome, rng, cfg));
  }
  for (std::size_t idx : eligible) {
    if (rng.uniform() < cfg.p_mutation)
      offspring.push_back(mutate(pop.members[idx].genome, rng, cfg.mutation_min,
                                 cfg.mutation_max, cfg.mutation_halfwidth));
  }

  // Smooth, validate, score; invalid offspring never reach the pool.
  Population next;
  next.epoch = pop.epoch + 1;
  next.next_id = pop.next_id;
  std::vector<ScoredGenome> pool = pop.members;
  std::size_t dropped = 0;
  std::vector<ScoredGenome> fresh;
  for (auto& g : offspring) {
    RoadGenome s = smooth(g, cfg.smoothing_factor);
    if (!genome_is_valid(s, cfg.geometry)) {
      ++dropped;
      continue;
    }
    ScoredGenome sg;
    sg.genome = std::move(s);
    sg.id = next.next_id++;
    fresh.push_back(std::move(sg));
  }
  score_f1(model, fresh);
  pool.insert(pool.end(), std::make_move_iterator(fresh.begin()),
              std::make_move_iterator(fresh.end()));

  // Elitist truncation: top select_f1 by F1, then top select_f2 by F2
  // (median distance within the F1-selected candidate set).
  auto order = order_by_f1(pool);
  if (order.size() > static_cast<std::size_t>(cfg.select_f1))
    order.resize(static_cast<std::size_t>(cfg.select_f1));
  std::vector<ScoredGenome> candidates;
  candidates.reserve(order.size());
  for (std::size_t idx : order) candidates.push_back(std::move(pool[idx]));

  if (candidates.size() > 1) {
    std::vector<RoadGenome> genomes;
    genomes.reserve(candidates.size());
    for (const auto& c : candidates) genomes.push_back(c.genome);
    for (std::size_t i = 0; i < candidates.size(); ++i)
      candidates[i].f2 = diversity_f2(genomes, i);
  }
  std::vector<std::size_t> by_f2(candidates.size());
  std::iota(by_f2.begin(), by_f2.end(), 0);
  std::sort(by_f2.begin(), by_f2.end(), [&candidates](std::size_t x, std::size_t y) {
    if (candidates[x].f2 != candidates[y].f2) return candidates[x].f2 > candidates[y].f2;
    return candidates[x].id < candidates[y].id;
  });
  if (by_f2.size() > static_cast<std::size_t>(cfg.select_f2))
    by_f2.resize(static_cast<std::size_t>(cfg.select_f2));
  next.members.reserve(by_f2.size());
  for (std::size_t idx : by_f2) next.members.push_back(std::move(candidates[idx]));

  if (metrics != nullptr) {
    metrics->epoch = next.epoch;
    double f1_sum = 0.0;
    std::vector<RoadGenome> genomes;
    genomes.reserve(next.members.size());
    for (const auto& m : next.members) {
      f1_sum += m.f1;
      genomes.push_back(m.genome);
    }
    metrics->mean_oob_probability =
        f1_sum / (static_cast<double>(next.members.size()) * cfg.geometry.block_size);
    metrics->median_pairwise_distance =
        genomes.size() > 1 ? median_pairwise_distance(genomes) : 0.0;
    metrics->pool_size = pool.size();
    metrics->invalid_offspring_dropped = dropped;
  }
  return next;
}

Population make_initial_population(const TransformerModel& model, const GAConfig& cfg,
                                   Rng& rng) {
  Population pop;
  auto genomes = init_random(cfg.select_f2, rng, cfg);
  pop.members.reserve(genomes.size());
  for (auto& g : genomes) {
    ScoredGenome sg;
    sg.genome = std::move(g);
    sg.id = pop.next_id++;
    pop.members.push_back(std::move(sg));
  }
  score_f1(model, pop.members);
  return pop;
}

GaRunResult run_evolution(const TransformerModel& model, const GAConfig& cfg, std::uint64_t seed,
                          const EpochCallback& on_epoch) {
  cfg.check();
  Rng rng(derive_seed(seed, 0x6e0));
  GaRunResult result;
  Population pop = make_initial_population(model, cfg, rng);
  double f1_sum = 0.0;
  for (const auto& m : pop.members) f1_sum += m.f1;
  result.initial_mean_oob_probability =
      f1_sum / (static_cast<double>(pop.members.size()) * cfg.geometry.block_size);

  for (int e = 0; e < cfg.epochs; ++e) {
    GaEpochMetrics metrics;
    pop = evolve_epoch(pop, model, cfg, rng, &metrics);
    result.epoch_metrics.push_back(metrics);
    if (on_epoch) on_epoch(pop, metrics);
  }
  result.final_population = std::move(pop);
  return result;
}

std::vector<LabeledRoad> generate_seed_pool(int n, std::uint64_t seed, const GAConfig& ga,
                                            const SimulatorConfig& sim) {
  sim.check();
  Rng rng(derive_seed(seed, 0x5eed));
  const auto genomes = init_random(n, rng, ga);
  std::vector<LabeledRoad> out;
  out.reserve(genomes.size());
  for (const auto& g : genomes) {
    const CartesianRoad road = reconstruct(g, Pose{}, ga.geometry.lane_width);
    const SimulationTrace trace = simulate(road, sim);
    out.push_back(label_road(g, trace));
  }
  return out;
}

}  // namespace roadgen
