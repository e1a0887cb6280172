#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "roadgen/rng.hpp"
#include "roadgen/training.hpp"
#include "roadgen/transformer.hpp"

using namespace roadgen;

namespace {

// Mimics the real labelling process: a road either passes (all negative) or
// faults once at some point, and nothing after the fault is observed.
LabeledRoad make_example(Rng& rng, int n, double fault_rate) {
  LabeledRoad ex;
  std::vector<double> c(n);
  for (int i = 0; i < n; ++i) c[i] = rng.uniform(-0.1, 0.1);
  ex.genome = RoadGenome::with_uniform_step(std::move(c));
  ex.labels.assign(n, false);
  if (rng.uniform() < fault_rate) ex.labels[rng.below(static_cast<std::uint64_t>(n))] = true;
  return ex;
}

std::vector<LabeledRoad> make_dataset(std::uint64_t seed, int count, int n, double fault_rate) {
  Rng rng(seed);
  std::vector<LabeledRoad> data;
  for (int i = 0; i < count; ++i) data.push_back(make_example(rng, n, fault_rate));
  return data;
}

}  // namespace

TEST_CASE("observed_tokens stops at the first positive") {
  LabeledRoad ex;
  ex.genome = RoadGenome::with_uniform_step(std::vector<double>(10, 0.0));
  ex.labels = std::vector<bool>(10, false);
  CHECK(observed_tokens(ex) == 10);  // clean road: everything observed
  ex.labels[4] = true;
  CHECK(observed_tokens(ex) == 5);  // fault at index 4: prefix of 5
  ex.labels[7] = true;              // a later positive is already unobserved
  CHECK(observed_tokens(ex) == 5);
  ex.labels[0] = true;
  CHECK(observed_tokens(ex) == 1);  // immediate fault: single token
}

TEST_CASE("pos_weight_for is the clamped negative/positive ratio over observed points") {
  LabeledRoad ex;
  ex.genome = RoadGenome::with_uniform_step(std::vector<double>(10, 0.0));
  ex.labels = std::vector<bool>(10, false);
  ex.labels[9] = true;  // fault at the last point: 9 negatives, 1 positive
  CHECK(pos_weight_for({ex}, 20.0) == 9.0);
  CHECK(pos_weight_for({ex}, 4.0) == 4.0);  // cap engaged

  LabeledRoad all_neg = ex;
  all_neg.labels[9] = false;
  CHECK(pos_weight_for({all_neg}, 20.0) == 1.0);  // degenerate: neutral weight

  // Points after the first positive are unobserved and must not count:
  // fault at index 4 -> 4 negatives / 1 positive regardless of what the
  // label vector claims beyond it.
  LabeledRoad masked = all_neg;
  masked.labels[4] = true;
  masked.labels[7] = true;  // ignored: never driven
  CHECK(pos_weight_for({masked}, 20.0) == 4.0);

  // A road that faults immediately observes a single (positive) point.
  LabeledRoad instant = all_neg;
  instant.labels[0] = true;
  CHECK(pos_weight_for({instant}, 20.0) == 1.0);  // no negatives -> neutral
}

namespace {

// Observed-point class counts: scan each example up to and including its
// first positive, mirroring the masking the library applies.
std::pair<long, long> observed_counts(const std::vector<LabeledRoad>& data) {
  long n_pos = 0, n_all = 0;
  for (const auto& ex : data)
    for (bool b : ex.labels) {
      n_pos += b ? 1 : 0;
      n_all++;
      if (b) break;
    }
  return {n_pos, n_all};
}

}  // namespace

TEST_CASE("weighted_bce_loss of the zero model is a closed form") {
  // Zero parameters -> p = 1/2 everywhere, so every observed point
  // contributes ln 2 (negative) or w * ln 2 (positive).
  DiscriminatorConfig cfg = DiscriminatorConfig::tiny();
  const TransformerModel model{cfg};
  auto data = make_dataset(4, 6, cfg.block_size, 0.3);
  const auto [n_pos, n_all] = observed_counts(data);
  const double w = 2.5;
  const double expected =
      (w * n_pos + (n_all - n_pos)) * 0.6931471805599453 / static_cast<double>(n_all);
  CHECK(weighted_bce_loss(model, data, w) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("evaluate counts the confusion matrix at the threshold") {
  DiscriminatorConfig cfg = DiscriminatorConfig::tiny();
  const TransformerModel model{cfg};  // p = 0.5 everywhere
  auto data = make_dataset(9, 6, cfg.block_size, 0.5);
  const auto [n_pos, n_all] = observed_counts(data);
  REQUIRE(n_pos > 0);  // the fixed seed produces both classes
  REQUIRE(n_all > n_pos);

  // At threshold 0.5 the half-probabilities all count as positive calls.
  EvalMetrics at_half = evaluate(model, data, 1.0, 0.5);
  CHECK(at_half.tp == n_pos);
  CHECK(at_half.fp == n_all - n_pos);
  CHECK(at_half.tn == 0);
  CHECK(at_half.fn == 0);
  CHECK(at_half.sensitivity == 1.0);
  CHECK(at_half.specificity == 0.0);

  // Raising the threshold above 0.5 flips every call to negative.
  EvalMetrics above = evaluate(model, data, 1.0, 0.6);
  CHECK(above.tp == 0);
  CHECK(above.tn == n_all - n_pos);
  CHECK(above.sensitivity == 0.0);
  CHECK(above.specificity == 1.0);
}

TEST_CASE("split_train_val is a seeded partition with the right sizes") {
  auto data = make_dataset(50, 40, 5, 0.2);
  // Tag each example through its first curvature so we can track identity.
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i].genome.curvature[0] = static_cast<double>(i);

  auto [train1, val1] = split_train_val(data, 0.1, 7);
  CHECK(val1.size() == 4);
  CHECK(train1.size() == 36);

  std::set<double> seen;
  for (const auto& ex : train1) seen.insert(ex.genome.curvature[0]);
  for (const auto& ex : val1) seen.insert(ex.genome.curvature[0]);
  CHECK(seen.size() == 40);  // disjoint cover of the input

  auto [train2, val2] = split_train_val(data, 0.1, 7);
  for (std::size_t i = 0; i < val1.size(); ++i)
    CHECK(val1[i].genome.curvature[0] == val2[i].genome.curvature[0]);

  auto [train3, val3] = split_train_val(data, 0.1, 8);
  bool same = val3.size() == val1.size();
  if (same)
    for (std::size_t i = 0; i < val1.size(); ++i)
      same = same && val1[i].genome.curvature[0] == val3[i].genome.curvature[0];
  CHECK_FALSE(same);

  // Tiny datasets keep at least one example on each side.
  auto pair = split_train_val(make_dataset(1, 2, 5, 0.2), 0.01, 1);
  CHECK(pair.first.size() == 1);
  CHECK(pair.second.size() == 1);
  CHECK_THROWS_AS(split_train_val(make_dataset(1, 1, 5, 0.2), 0.5, 1), std::invalid_argument);
}

TEST_CASE("analytic gradients match central differences to 1e-4") {
  for (std::uint64_t seed : {1ull, 2026ull}) {
    const GradientCheckResult r = gradient_check(seed);
    CAPTURE(seed);
    CHECK(r.checked >= 900);  // every tiny-model parameter
    CHECK(r.max_rel_error < 1e-4);
    CHECK(r.mean_rel_error < 1e-6);
  }
}

TEST_CASE("training overfits a small dataset and restores the best checkpoint") {
  DiscriminatorConfig cfg;
  cfg.d_model = 32;
  cfg.n_layers = 2;
  cfg.n_heads = 4;
  cfg.block_size = 20;
  cfg.dropout = 0.0;  // pure memorization run
  cfg.epochs = 1200;
  cfg.batch_size = 2;
  cfg.learning_rate = 3e-3;
  cfg.pos_weight_cap = 10.0;
  cfg.mirror_augment = false;  // memorize the 12 originals only

  auto data = make_dataset(11, 14, cfg.block_size, 0.5);
  auto train_set = std::vector<LabeledRoad>(data.begin(), data.begin() + 12);
  auto val_set = std::vector<LabeledRoad>(data.begin() + 12, data.end());

  TransformerModel model = TransformerModel::random_init(cfg, 5);
  TrainingOptions opts;
  opts.seed = 17;
  const TrainingReport report = train(model, train_set, val_set, opts);

  REQUIRE(report.epochs.size() == 1200);
  CHECK(report.pos_weight == pos_weight_for(train_set, cfg.pos_weight_cap));
  CHECK(report.epochs.back().train_loss < 0.10);
  CHECK(report.epochs.back().train_loss < report.epochs.front().train_loss * 0.5);

  // The model is left at the best-validation checkpoint: re-evaluating
  // reproduces the reported metrics exactly.
  const EvalMetrics check = evaluate(model, val_set, report.pos_weight, 0.5);
  CHECK(check.loss == report.best_val.loss);
  CHECK(check.sensitivity == report.best_val.sensitivity);
  CHECK(check.specificity == report.best_val.specificity);
  CHECK(report.best_epoch >= 1);
  CHECK(report.best_epoch <= 1200);
  CHECK(model.parameters_finite());
}

TEST_CASE("gradient accumulation is invariant to the micro-batch size") {
  DiscriminatorConfig cfg;
  cfg.d_model = 16;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.block_size = 12;
  cfg.dropout = 0.3;  // exercises the per-example mask derivation
  cfg.epochs = 2;
  cfg.batch_size = 12;

  auto data = make_dataset(21, 14, cfg.block_size, 0.2);
  auto train_set = std::vector<LabeledRoad>(data.begin(), data.begin() + 12);
  auto val_set = std::vector<LabeledRoad>(data.begin() + 12, data.end());

  TransformerModel m1 = TransformerModel::random_init(cfg, 9);
  TransformerModel m2 = TransformerModel::random_init(cfg, 9);
  TrainingOptions o1, o2;
  o1.seed = o2.seed = 31;
  o1.micro_batch = 3;
  o2.micro_batch = 12;
  train(m1, train_set, val_set, o1);
  train(m2, train_set, val_set, o2);

  // Identical shuffles and dropout masks; the only difference is floating
  // point reassociation across the accumulation slices.
  const auto r1 = m1.parameter_refs(), r2 = m2.parameter_refs();
  double max_diff = 0.0;
  for (std::size_t t = 0; t < r1.size(); ++t)
    for (Eigen::Index i = 0; i < r1[t].size(); ++i)
      max_diff = std::max(max_diff, std::abs(r1[t].data[i] - r2[t].data[i]));
  CHECK(max_diff < 1e-7);
}

TEST_CASE("mirror augmentation feeds extra data but leaves the class weight alone") {
  DiscriminatorConfig cfg;
  cfg.d_model = 16;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.block_size = 12;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.pos_weight_cap = 1000.0;  // leave the ratio unclamped

  auto data = make_dataset(57, 12, cfg.block_size, 0.6);
  auto train_set = std::vector<LabeledRoad>(data.begin(), data.begin() + 10);
  auto val_set = std::vector<LabeledRoad>(data.begin() + 10, data.end());

  DiscriminatorConfig plain = cfg;
  plain.mirror_augment = false;
  TransformerModel m1 = TransformerModel::random_init(plain, 4);
  TransformerModel m2 = TransformerModel::random_init(cfg, 4);
  TrainingOptions opts;
  opts.seed = 11;
  const TrainingReport a = train(m1, train_set, val_set, opts);
  const TrainingReport b = train(m2, train_set, val_set, opts);

  // Mirrored copies double positives and negatives alike; the quotient is
  // bit-identical. The extra examples must still change the training run.
  CHECK(a.pos_weight == b.pos_weight);
  const auto r1 = m1.parameter_refs(), r2 = m2.parameter_refs();
  double max_diff = 0.0;
  for (std::size_t t = 0; t < r1.size(); ++t)
    for (Eigen::Index i = 0; i < r1[t].size(); ++i)
      max_diff = std::max(max_diff, std::abs(r1[t].data[i] - r2[t].data[i]));
  CHECK(max_diff > 0.0);
}

TEST_CASE("training is deterministic for a fixed seed") {
  DiscriminatorConfig cfg;
  cfg.d_model = 16;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.block_size = 12;
  cfg.epochs = 3;
  cfg.batch_size = 8;

  auto data = make_dataset(33, 10, cfg.block_size, 0.2);
  auto train_set = std::vector<LabeledRoad>(data.begin(), data.begin() + 8);
  auto val_set = std::vector<LabeledRoad>(data.begin() + 8, data.end());

  TransformerModel m1 = TransformerModel::random_init(cfg, 2);
  TransformerModel m2 = TransformerModel::random_init(cfg, 2);
  TrainingOptions opts;
  opts.seed = 5;
  const TrainingReport a = train(m1, train_set, val_set, opts);
  const TrainingReport b = train(m2, train_set, val_set, opts);

  REQUIRE(a.epochs.size() == b.epochs.size());
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    CHECK(a.epochs[i].train_loss == b.epochs[i].train_loss);
    CHECK(a.epochs[i].val_loss == b.epochs[i].val_loss);
  }
  const auto r1 = m1.parameter_refs(), r2 = m2.parameter_refs();
  for (std::size_t t = 0; t < r1.size(); ++t)
    for (Eigen::Index i = 0; i < r1[t].size(); ++i)
      CHECK(r1[t].data[i] == r2[t].data[i]);
}

TEST_CASE("a divergent run raises instead of silently corrupting the model") {
  DiscriminatorConfig cfg;
  cfg.d_model = 8;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.block_size = 10;
  cfg.epochs = 50;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e4;  // absurd on purpose

  auto data = make_dataset(41, 10, cfg.block_size, 0.3);
  auto train_set = std::vector<LabeledRoad>(data.begin(), data.begin() + 8);
  auto val_set = std::vector<LabeledRoad>(data.begin() + 8, data.end());
  TransformerModel model = TransformerModel::random_init(cfg, 3);
  TrainingOptions opts;
  CHECK_THROWS_AS(train(model, train_set, val_set, opts), std::runtime_error);
}
