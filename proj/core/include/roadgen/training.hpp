#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "roadgen/simulator.hpp"
#include "roadgen/transformer.hpp"

namespace roadgen {

struct EvalMetrics {
  double loss = 0.0;          // weighted BCE, mean per point
  double sensitivity = 0.0;   // tp / (tp + fn); 0 when no positives
  double specificity = 0.0;   // tn / (tn + fp); 0 when no negatives
  long tp = 0, tn = 0, fp = 0, fn = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

struct TrainingReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;        // epoch whose checkpoint the model was left at
  double pos_weight = 1.0;   // class weight derived from the training set
  EvalMetrics best_val;
};

struct TrainingOptions {
  std::uint64_t seed = 1;
  int micro_batch = 32;     // examples per gradient-accumulation slice
  double threshold = 0.5;   // classification threshold for the val metrics
  bool verbose = false;     // one progress line per epoch on stderr
};

/// Number of leading points whose labels are actually observed. The
/// simulator aborts a run at the first out-of-bounds event, so points after
/// the first positive label were never driven: treating them as negatives
/// would inject label noise. Returns labels.size() for clean roads, and the
/// index of the first positive plus one otherwise. All training, loss and
/// evaluation code restricts itself to this prefix.
std::size_t observed_tokens(const LabeledRoad& ex);

/// Positive-class weight over observed points only:
/// clamp(#negative / #positive, 1, cap).
double pos_weight_for(const std::vector<LabeledRoad>& dataset, double cap);

/// Mean weighted binary cross-entropy per observed point, dropout disabled.
double weighted_bce_loss(const TransformerModel& model, const std::vector<LabeledRoad>& batch,
                         double pos_weight);

/// Confusion matrix and loss over the observed points of every example.
EvalMetrics evaluate(const TransformerModel& model, const std::vector<LabeledRoad>& dataset,
                     double pos_weight, double threshold);

/// Seeded shuffle split; the validation part takes round(val_fraction * n),
/// at least 1. Returns (train, val).
std::pair<std::vector<LabeledRoad>, std::vector<LabeledRoad>> split_train_val(
    const std::vector<LabeledRoad>& all, double val_fraction, std::uint64_t seed);

/// Adam + weighted BCE over shuffled mini-batches for the configured number
/// of epochs, with the learning rate cosine-decayed to a tenth of its
/// configured value across the run; dropout noise is derived per
/// (seed, epoch, example slot), so the whole run is deterministic. After the
/// run the model carries the parameters of the epoch with the lowest
/// weighted validation loss (threshold metrics are too jittery to pick
/// checkpoints by). Throws std::runtime_error if the loss or a parameter
/// diverges.
TrainingReport train(TransformerModel& model, const std::vector<LabeledRoad>& train_set,
                     const std::vector<LabeledRoad>& val_set, const TrainingOptions& opts);

struct GradientCheckResult {
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  std::int64_t checked = 0;
};

/// Central-difference check of the analytic gradient of the mean weighted
/// BCE, every parameter perturbed by +-step. Relative error uses
/// |a - n| / max(1e-8, |a| + |n|).
GradientCheckResult gradient_check(const TransformerModel& model,
                                   const std::vector<LabeledRoad>& batch, double pos_weight,
                                   double step);

/// Convenience: seeded random tiny model + random batch.
GradientCheckResult gradient_check(std::uint64_t seed);

}  // namespace roadgen
