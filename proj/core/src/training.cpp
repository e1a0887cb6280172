#include "roadgen/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "roadgen/rng.hpp"
#include "transformer_internal.hpp"

namespace roadgen {

namespace {

constexpr std::uint64_t kDropoutStream = 0xD40F;
constexpr std::uint64_t kSplitStream = 0x5155;

std::vector<const RoadGenome*> genome_ptrs(const std::vector<LabeledRoad>& data,
                                           const std::vector<std::size_t>& idx, std::size_t lo,
                                           std::size_t hi) {
  std::vector<const RoadGenome*> out;
  out.reserve(hi - lo);
  for (std::size_t i = lo; i < hi; ++i) out.push_back(&data[idx[i]].genome);
  return out;
}

/// Inference-mode probabilities for a whole dataset, micro-batched.
Eigen::VectorXd predict_all(const TransformerModel& model, const std::vector<LabeledRoad>& data,
                            int micro_batch) {
  const int t = model.config().block_size;
  Eigen::VectorXd probs(static_cast<Eigen::Index>(data.size()) * t);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t lo = 0; lo < data.size(); lo += static_cast<std::size_t>(micro_batch)) {
    const std::size_t hi = std::min(data.size(), lo + static_cast<std::size_t>(micro_batch));
    const auto batch = genome_ptrs(data, idx, lo, hi);
    const Eigen::VectorXd p = detail::batch_forward(model.params(), model.config(), batch,
                                                    nullptr, nullptr);
    probs.segment(static_cast<Eigen::Index>(lo) * t, static_cast<Eigen::Index>(hi - lo) * t) = p;
  }
  return probs;
}

}  // namespace

std::size_t observed_tokens(const LabeledRoad& ex) {
  for (std::size_t i = 0; i < ex.labels.size(); ++i)
    if (ex.labels[i]) return i + 1;
  return ex.labels.size();
}

double pos_weight_for(const std::vector<LabeledRoad>& dataset, double cap) {
  long n_pos = 0, n_neg = 0;
  for (const auto& ex : dataset) {
    const std::size_t obs = observed_tokens(ex);
    for (std::size_t i = 0; i < obs; ++i) (ex.labels[i] ? n_pos : n_neg)++;
  }
  if (n_pos == 0 || n_neg == 0) return 1.0;
  return std::clamp(static_cast<double>(n_neg) / static_cast<double>(n_pos), 1.0, cap);
}

double weighted_bce_loss(const TransformerModel& model, const std::vector<LabeledRoad>& batch,
                         double pos_weight) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  const int t = model.config().block_size;
  const Eigen::VectorXd probs = predict_all(model, batch, 16);
  double total = 0.0;
  long n_obs = 0;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    if (static_cast<int>(batch[e].labels.size()) != t)
      throw std::invalid_argument("loss: label length does not match block size");
    const std::size_t obs = observed_tokens(batch[e]);
    n_obs += static_cast<long>(obs);
    for (std::size_t i = 0; i < obs; ++i)
      total += weighted_bce(probs(static_cast<Eigen::Index>(e) * t + static_cast<Eigen::Index>(i)),
                            batch[e].labels[i], pos_weight);
  }
  return total / static_cast<double>(n_obs);
}

EvalMetrics evaluate(const TransformerModel& model, const std::vector<LabeledRoad>& dataset,
                     double pos_weight, double threshold) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
  const int t = model.config().block_size;
  const Eigen::VectorXd probs = predict_all(model, dataset, 16);
  EvalMetrics m;
  double total = 0.0;
  long n_obs = 0;
  for (std::size_t e = 0; e < dataset.size(); ++e) {
    const std::size_t obs = observed_tokens(dataset[e]);
    n_obs += static_cast<long>(obs);
    for (std::size_t i = 0; i < obs; ++i) {
      const double p = probs(static_cast<Eigen::Index>(e) * t + static_cast<Eigen::Index>(i));
      const bool y = dataset[e].labels[i];
      total += weighted_bce(p, y, pos_weight);
      const bool pred = p >= threshold;
      if (y && pred) m.tp++;
      else if (y && !pred) m.fn++;
      else if (!y && pred) m.fp++;
      else m.tn++;
    }
  }
  m.loss = total / static_cast<double>(n_obs);
  m.sensitivity = (m.tp + m.fn) > 0 ? static_cast<double>(m.tp) / (m.tp + m.fn) : 0.0;
  m.specificity = (m.tn + m.fp) > 0 ? static_cast<double>(m.tn) / (m.tn + m.fp) : 0.0;
  return m;
}

std::pair<std::vector<LabeledRoad>, std::vector<LabeledRoad>> split_train_val(
    const std::vector<LabeledRoad>& all, double val_fraction, std::uint64_t seed) {
  if (all.size() < 2) throw std::invalid_argument("split: need at least two examples");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw std::invalid_argument("split: val_fraction must lie in (0, 1)");
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, kSplitStream));
  rng.shuffle(idx);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(all.size()))), 1,
      all.size() - 1);
  std::vector<LabeledRoad> val, train;
  val.reserve(n_val);
  train.reserve(all.size() - n_val);
  for (std::size_t i = 0; i < idx.size(); ++i)
    (i < n_val ? val : train).push_back(all[idx[i]]);
  return {std::move(train), std::move(val)};
}

TrainingReport train(TransformerModel& model, const std::vector<LabeledRoad>& train_set,
                     const std::vector<LabeledRoad>& val_set, const TrainingOptions& opts) {
  const DiscriminatorConfig& cfg = model.config();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (val_set.empty()) throw std::invalid_argument("train: empty validation set");
  if (opts.micro_batch <= 0) throw std::invalid_argument("train: micro_batch must be positive");
  const int t = cfg.block_size;
  for (const auto& ex : train_set)
    if (static_cast<int>(ex.labels.size()) != t || static_cast<int>(ex.genome.size()) != t)
      throw std::invalid_argument("train: example length does not match block size");

  // The driving problem is left/right symmetric: negating every curvature
  // mirrors the road about the start heading and yields the identical
  // outcome, so each training road can serve twice. Validation data is
  // never augmented.
  std::vector<LabeledRoad> mirrored;
  if (cfg.mirror_augment) {
    mirrored.reserve(2 * train_set.size());
    mirrored.insert(mirrored.end(), train_set.begin(), train_set.end());
    for (const auto& ex : train_set) {
      LabeledRoad m = ex;
      for (double& k : m.genome.curvature) k = -k;
      mirrored.push_back(std::move(m));
    }
  }
  const std::vector<LabeledRoad>& data = cfg.mirror_augment ? mirrored : train_set;

  TrainingReport report;
  report.pos_weight = pos_weight_for(data, cfg.pos_weight_cap);

  detail::Gradients grads(cfg), adam_m(cfg), adam_v(cfg);
  auto model_refs = model.parameter_refs();
  auto grad_refs = detail::param_refs(grads.g);
  auto m_refs = detail::param_refs(adam_m.g);
  auto v_refs = detail::param_refs(adam_v.g);

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
  long adam_t = 0;

  const std::size_t n = data.size();
  const std::uint64_t dropout_master = derive_seed(opts.seed, kDropoutStream);

  // Loss is averaged over observed points only; see observed_tokens().
  std::vector<std::size_t> obs(n);
  double total_obs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    obs[i] = observed_tokens(data[i]);
    total_obs += static_cast<double>(obs[i]);
  }

  ModelParams best_params = model.params();
  double best_score = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(n);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(opts.seed, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    // Cosine decay from the configured rate down to a tenth of it over the
    // run; late epochs take small steps so the operating point settles
    // instead of oscillating around the decision threshold.
    const double progress =
        cfg.epochs > 1 ? static_cast<double>(epoch - 1) / static_cast<double>(cfg.epochs - 1)
                       : 0.0;
    const double lr = 0.1 * cfg.learning_rate +
                      0.45 * cfg.learning_rate * (1.0 + std::cos(3.141592653589793 * progress));

    double epoch_loss_sum = 0.0;
    for (std::size_t b0 = 0; b0 < n; b0 += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t b1 = std::min(n, b0 + static_cast<std::size_t>(cfg.batch_size));
      double batch_tokens = 0.0;
      for (std::size_t i = b0; i < b1; ++i) batch_tokens += static_cast<double>(obs[order[i]]);
      grads.set_zero();
      double batch_loss = 0.0;

      for (std::size_t m0 = b0; m0 < b1; m0 += static_cast<std::size_t>(opts.micro_batch)) {
        const std::size_t m1 = std::min(b1, m0 + static_cast<std::size_t>(opts.micro_batch));
        const auto batch = genome_ptrs(data, order, m0, m1);
        detail::DropoutPlan plan;
        plan.rate = cfg.dropout;
        plan.master_seed = dropout_master;
        plan.first_example_index = static_cast<std::uint64_t>(epoch - 1) * n + m0;
        detail::BatchCache cache;
        const Eigen::VectorXd probs =
            detail::batch_forward(model.params(), cfg, batch, &plan, &cache);

        Eigen::VectorXd dlogits = Eigen::VectorXd::Zero(probs.size());
        for (std::size_t e = 0; e < batch.size(); ++e) {
          const auto& labels = data[order[m0 + e]].labels;
          const std::size_t e_obs = obs[order[m0 + e]];
          for (std::size_t i = 0; i < e_obs; ++i) {
            const Eigen::Index at =
                static_cast<Eigen::Index>(e) * t + static_cast<Eigen::Index>(i);
            const double p = probs(at);
            const bool y = labels[i];
            const double w = y ? report.pos_weight : 1.0;
            batch_loss += weighted_bce(p, y, report.pos_weight);
            dlogits(at) = w * (p - (y ? 1.0 : 0.0)) / batch_tokens;
          }
        }
        detail::batch_backward(model.params(), cfg, cache, dlogits, grads);
      }

      batch_loss /= batch_tokens;
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("training diverged: non-finite loss");
      epoch_loss_sum += batch_loss * batch_tokens;

      ++adam_t;
      const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam_t));
      const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam_t));
      for (std::size_t r = 0; r < model_refs.size(); ++r) {
        double* th = model_refs[r].data;
        double* gd = grad_refs[r].data;
        double* mm = m_refs[r].data;
        double* vv = v_refs[r].data;
        const Eigen::Index len = model_refs[r].size();
        for (Eigen::Index i = 0; i < len; ++i) {
          mm[i] = kBeta1 * mm[i] + (1.0 - kBeta1) * gd[i];
          vv[i] = kBeta2 * vv[i] + (1.0 - kBeta2) * gd[i] * gd[i];
          th[i] -= lr * (mm[i] / bc1) / (std::sqrt(vv[i] / bc2) + kAdamEps);
        }
      }
    }

    if (!model.parameters_finite())
      throw std::runtime_error("training diverged: non-finite parameter");

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss_sum / total_obs;
    const EvalMetrics val = evaluate(model, val_set, report.pos_weight, opts.threshold);
    rec.val_loss = val.loss;
    rec.sensitivity = val.sensitivity;
    rec.specificity = val.specificity;
    report.epochs.push_back(rec);

    // Early-stopping criterion: keep the epoch with the lowest weighted
    // validation loss (the training objective on held-out data). Threshold
    // metrics jitter from epoch to epoch; the loss is much smoother.
    if (val.loss < best_score) {
      best_score = val.loss;
      best_params = model.params();
      report.best_epoch = epoch;
      report.best_val = val;
    }
    if (opts.verbose) {
      std::fprintf(stderr, "epoch %3d  train %.4f  val %.4f  sens %.3f  spec %.3f\n", epoch,
                   rec.train_loss, rec.val_loss, rec.sensitivity, rec.specificity);
    }
  }

  model.params() = best_params;
  return report;
}

GradientCheckResult gradient_check(const TransformerModel& model,
                                   const std::vector<LabeledRoad>& batch, double pos_weight,
                                   double step) {
  if (batch.empty()) throw std::invalid_argument("gradient check: empty batch");
  const DiscriminatorConfig& cfg = model.config();
  const int t = cfg.block_size;
  TransformerModel work = model;  // perturbed copy

  std::vector<const RoadGenome*> ptrs;
  std::vector<std::size_t> obs;
  double tokens = 0.0;
  for (const auto& ex : batch) {
    ptrs.push_back(&ex.genome);
    obs.push_back(observed_tokens(ex));
    tokens += static_cast<double>(obs.back());
  }

  auto loss_at = [&]() {
    const Eigen::VectorXd probs =
        detail::batch_forward(work.params(), cfg, ptrs, nullptr, nullptr);
    double total = 0.0;
    for (std::size_t e = 0; e < batch.size(); ++e)
      for (std::size_t i = 0; i < obs[e]; ++i)
        total += weighted_bce(
            probs(static_cast<Eigen::Index>(e) * t + static_cast<Eigen::Index>(i)),
            batch[e].labels[i], pos_weight);
    return total / tokens;
  };

  // Analytic gradient (dropout off).
  detail::Gradients grads(cfg);
  detail::BatchCache cache;
  const Eigen::VectorXd probs =
      detail::batch_forward(work.params(), cfg, ptrs, nullptr, &cache);
  Eigen::VectorXd dlogits = Eigen::VectorXd::Zero(probs.size());
  for (std::size_t e = 0; e < batch.size(); ++e)
    for (std::size_t i = 0; i < obs[e]; ++i) {
      const Eigen::Index at = static_cast<Eigen::Index>(e) * t + static_cast<Eigen::Index>(i);
      const bool y = batch[e].labels[i];
      const double w = y ? pos_weight : 1.0;
      dlogits(at) = w * (probs(at) - (y ? 1.0 : 0.0)) / tokens;
    }
  detail::batch_backward(work.params(), cfg, cache, dlogits, grads);

  auto work_refs = work.parameter_refs();
  auto grad_refs = detail::param_refs(grads.g);
  GradientCheckResult res;
  double err_sum = 0.0;
  for (std::size_t r = 0; r < work_refs.size(); ++r) {
    double* th = work_refs[r].data;
    const double* an = grad_refs[r].data;
    for (Eigen::Index i = 0; i < work_refs[r].size(); ++i) {
      const double saved = th[i];
      th[i] = saved + step;
      const double lp = loss_at();
      th[i] = saved - step;
      const double lm = loss_at();
      th[i] = saved;
      const double numeric = (lp - lm) / (2.0 * step);
      const double rel =
          std::abs(an[i] - numeric) / std::max(1e-8, std::abs(an[i]) + std::abs(numeric));
      res.max_rel_error = std::max(res.max_rel_error, rel);
      err_sum += rel;
      res.checked++;
    }
  }
  res.mean_rel_error = err_sum / static_cast<double>(res.checked);
  return res;
}

GradientCheckResult gradient_check(std::uint64_t seed) {
  DiscriminatorConfig cfg = DiscriminatorConfig::tiny();
  TransformerModel model = TransformerModel::random_init(cfg, derive_seed(seed, 1));
  Rng rng(derive_seed(seed, 2));
  const auto block = static_cast<std::size_t>(cfg.block_size);
  std::vector<LabeledRoad> batch;
  for (int e = 0; e < 4; ++e) {
    std::vector<double> curv(block);
    for (auto& c : curv) c = rng.uniform(-kCurvatureLimit, kCurvatureLimit);
    LabeledRoad ex;
    ex.genome = RoadGenome::with_uniform_step(std::move(curv));
    ex.labels.assign(block, false);
    batch.push_back(std::move(ex));
  }
  // A positive truncates observation at its index, so pick label patterns
  // that keep every block position exercised: an immediate fault, a fault at
  // the very last point, a random mid-road fault, and a clean road.
  batch[0].labels[0] = true;
  batch[1].labels[block - 1] = true;
  batch[2].labels[1 + rng.below(block - 1)] = true;
  return gradient_check(model, batch, 2.5, 1e-4);
}

}  // namespace roadgen
