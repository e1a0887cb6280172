#pragma once

// Batched forward/backward engine shared by inference (transformer.cpp) and
// training (training.cpp). Everything here is deliberately single-threaded
// and free of run-order dependence: results are a pure function of
// (parameters, batch contents, dropout seeds).

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "roadgen/geometry.hpp"
#include "roadgen/transformer.hpp"

namespace roadgen::detail {

// Row-major so that per-token (per-row) passes touch contiguous memory.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kLayerNormEps = 1e-5;

double gelu(double x);
double gelu_grad(double x);

/// Stacks the (curvature, step) features of `batch` into a (B*T) x 2 matrix,
/// example e occupying rows [e*T, (e+1)*T).
Mat stack_features(const std::vector<const RoadGenome*>& batch, int block_size);

/// Per-example dropout: masks for example e are drawn from an RNG seeded by
/// derive_seed(master_seed, first_example_index + e), so results do not
/// depend on how a dataset is split into micro-batches.
struct DropoutPlan {
  double rate = 0.0;
  std::uint64_t master_seed = 0;
  std::uint64_t first_example_index = 0;
  bool active() const { return rate > 0.0; }
};

struct LayerCache {
  Mat ln1_xhat;
  Eigen::VectorXd ln1_rstd;
  Mat q, k, v;             // (B*T) x d
  std::vector<Mat> att;    // B*H causal probability matrices, T x T, zero above diagonal
  Mat att_concat;          // (B*T) x d, heads concatenated, before w_o
  Mat ln2_xhat;
  Eigen::VectorXd ln2_rstd;
  Mat ff_pre;              // (B*T) x 4d
  Mat ff_act;              // post-GELU, post-dropout
  Mat ff_mask;             // empty when dropout off
};

struct BatchCache {
  int batch = 0;
  Mat x;        // (B*T) x 2
  Mat h0;       // embedded input after dropout
  Mat h0_mask;  // empty when dropout off
  std::vector<LayerCache> layers;
  Mat lnf_xhat;
  Eigen::VectorXd lnf_rstd;
  Eigen::VectorXd probs;  // (B*T)
};

/// Runs the model over a stacked batch. `cache` may be null for pure
/// inference; `dropout` may be null (or inactive) to disable dropout.
/// Returns the per-token sigmoid probabilities, length B*T.
Eigen::VectorXd batch_forward(const ModelParams& params, const DiscriminatorConfig& cfg,
                              const std::vector<const RoadGenome*>& batch,
                              const DropoutPlan* dropout, BatchCache* cache);

/// Parameter-shaped gradient accumulator.
struct Gradients {
  ModelParams g;
  explicit Gradients(const DiscriminatorConfig& cfg);
  void set_zero();
};

/// Backpropagates dL/dz (z = pre-sigmoid logits, length B*T) through the
/// cached forward pass, accumulating into `grads`.
void batch_backward(const ModelParams& params, const DiscriminatorConfig& cfg,
                    const BatchCache& cache, const Eigen::VectorXd& dlogits,
                    Gradients& grads);

/// Zero-initialized parameter set with the shapes implied by `cfg`.
ModelParams make_params(const DiscriminatorConfig& cfg);

/// Named views over every tensor in `p`, in a fixed order shared by
/// serialization and the optimizer.
std::vector<TensorRef> param_refs(ModelParams& p);

}  // namespace roadgen::detail
