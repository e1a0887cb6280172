#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "roadgen/geometry.hpp"

namespace roadgen {

/// Hyperparameters of the out-of-bound discriminator. The defaults are the
/// desk-scale setup; reference_preset() gives the full-scale 6-head variant
/// (d_model 132, the closest multiple of 6) with the large-batch schedule.
struct DiscriminatorConfig {
  int d_model = 128;
  int n_layers = 6;
  int n_heads = 8;  // 128 is not divisible by 6; see reference_preset()
  int block_size = kDefaultBlockSize;
  double dropout = 0.2;
  double learning_rate = 3e-4;  // peak rate; training cosine-decays it to a tenth
  int batch_size = 256;   // reference setup: 1024
  int epochs = 60;        // reference setup: 500
  double pos_weight_cap = 20.0;
  double val_fraction = 0.1;
  // Double the training set with curvature-mirrored copies; the driving
  // problem is left/right symmetric, so the labels carry over exactly.
  bool mirror_augment = true;

  int head_dim() const { return d_model / n_heads; }
  int ff_dim() const { return 4 * d_model; }

  /// Throws std::invalid_argument on inconsistent settings.
  void check() const;

  static DiscriminatorConfig reference_preset();
  static DiscriminatorConfig tiny();  // gradient-check scale: d=8, 1 layer, 2 heads, block 5
};

/// One pre-norm transformer block: causal multi-head self-attention plus a
/// position-wise feed-forward, each behind a LayerNorm.
struct LayerParams {
  Eigen::VectorXd ln1_gain, ln1_bias;
  Eigen::MatrixXd w_q, w_k, w_v, w_o;  // d x d, applied as x * W^T + b
  Eigen::VectorXd b_q, b_k, b_v, b_o;
  Eigen::VectorXd ln2_gain, ln2_bias;
  Eigen::MatrixXd w_ff1;  // 4d x d
  Eigen::VectorXd b_ff1;
  Eigen::MatrixXd w_ff2;  // d x 4d
  Eigen::VectorXd b_ff2;
};

struct ModelParams {
  Eigen::MatrixXd w_in;  // d x 2 input projection of (curvature, step) pairs
  Eigen::VectorXd b_in;
  Eigen::MatrixXd pos;   // block_size x d learned positional table
  std::vector<LayerParams> layers;
  Eigen::VectorXd lnf_gain, lnf_bias;
  Eigen::VectorXd w_out;  // d, single-logit head
  Eigen::VectorXd b_out;  // size 1
};

/// Per-point OOB probabilities and the summed fitness F1.
struct Scores {
  std::vector<double> p;
  double f1 = 0.0;
};

/// Mutable view over one named parameter tensor (row-major iteration order
/// is the serialization order).
struct TensorRef {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Index size() const { return rows * cols; }
};

class TransformerModel {
 public:
  /// All parameters zero (logits identically 0, every probability 0.5).
  explicit TransformerModel(DiscriminatorConfig cfg);

  /// GPT-style init: normal(0, 0.02) weights, scaled residual projections,
  /// unit LayerNorm gains. Deterministic in the seed.
  static TransformerModel random_init(DiscriminatorConfig cfg, std::uint64_t seed);

  const DiscriminatorConfig& config() const { return cfg_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

  /// Causal inference on one genome (dropout disabled): p_i depends only
  /// on points 0..i. Throws std::invalid_argument on length mismatch.
  Scores forward(const RoadGenome& genome) const;

  /// Batched inference; identical results to per-genome forward().
  std::vector<Scores> forward_many(const std::vector<RoadGenome>& genomes) const;

  std::vector<TensorRef> parameter_refs();
  std::vector<TensorRef> parameter_refs() const;  // const data viewed mutably only for reads
  std::int64_t parameter_count() const;
  bool parameters_finite() const;

 private:
  DiscriminatorConfig cfg_;
  ModelParams params_;
};

/// Pointwise weighted binary cross-entropy: -w*log(p) for positive labels,
/// -log(1-p) otherwise.
double weighted_bce(double p, bool label, double pos_weight);

/// Median of genome_distance(pool[index], pool[j]) over all j != index; even
/// counts average the two central values. Throws when the pool has fewer
/// than two members.
double diversity_f2(const std::vector<RoadGenome>& pool, std::size_t index);

}  // namespace roadgen
