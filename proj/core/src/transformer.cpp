#include "roadgen/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <utility>

#include "roadgen/rng.hpp"
#include "transformer_internal.hpp"

namespace roadgen {

void DiscriminatorConfig::check() const {
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || block_size <= 0)
    throw std::invalid_argument("discriminator dimensions must be positive");
  if (d_model % n_heads != 0)
    throw std::invalid_argument("d_model must be divisible by n_heads");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw std::invalid_argument("dropout must lie in [0, 1)");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (batch_size <= 0 || epochs <= 0)
    throw std::invalid_argument("batch_size and epochs must be positive");
  if (!(pos_weight_cap >= 1.0)) throw std::invalid_argument("pos_weight_cap must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw std::invalid_argument("val_fraction must lie in (0, 1)");
}

DiscriminatorConfig DiscriminatorConfig::reference_preset() {
  DiscriminatorConfig cfg;
  cfg.d_model = 132;  // nearest multiple of the 6 heads
  cfg.n_heads = 6;
  cfg.n_layers = 6;
  cfg.dropout = 0.2;
  cfg.learning_rate = 3e-4;
  cfg.batch_size = 1024;
  cfg.epochs = 500;
  cfg.pos_weight_cap = 20.0;
  return cfg;
}

DiscriminatorConfig DiscriminatorConfig::tiny() {
  DiscriminatorConfig cfg;
  cfg.d_model = 8;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.block_size = 5;
  cfg.dropout = 0.0;
  return cfg;
}

namespace detail {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865476)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * 0.7071067811865476));
  const double pdf = 0.3989422804014327 * std::exp(-0.5 * x * x);
  return cdf + x * pdf;
}

ModelParams make_params(const DiscriminatorConfig& cfg) {
  const int d = cfg.d_model;
  ModelParams p;
  p.w_in = Eigen::MatrixXd::Zero(d, 2);
  p.b_in = Eigen::VectorXd::Zero(d);
  p.pos = Eigen::MatrixXd::Zero(cfg.block_size, d);
  p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& l : p.layers) {
    l.ln1_gain = Eigen::VectorXd::Zero(d);
    l.ln1_bias = Eigen::VectorXd::Zero(d);
    l.w_q = Eigen::MatrixXd::Zero(d, d);
    l.w_k = Eigen::MatrixXd::Zero(d, d);
    l.w_v = Eigen::MatrixXd::Zero(d, d);
    l.w_o = Eigen::MatrixXd::Zero(d, d);
    l.b_q = Eigen::VectorXd::Zero(d);
    l.b_k = Eigen::VectorXd::Zero(d);
    l.b_v = Eigen::VectorXd::Zero(d);
    l.b_o = Eigen::VectorXd::Zero(d);
    l.ln2_gain = Eigen::VectorXd::Zero(d);
    l.ln2_bias = Eigen::VectorXd::Zero(d);
    l.w_ff1 = Eigen::MatrixXd::Zero(cfg.ff_dim(), d);
    l.b_ff1 = Eigen::VectorXd::Zero(cfg.ff_dim());
    l.w_ff2 = Eigen::MatrixXd::Zero(d, cfg.ff_dim());
    l.b_ff2 = Eigen::VectorXd::Zero(d);
  }
  p.lnf_gain = Eigen::VectorXd::Zero(d);
  p.lnf_bias = Eigen::VectorXd::Zero(d);
  p.w_out = Eigen::VectorXd::Zero(d);
  p.b_out = Eigen::VectorXd::Zero(1);
  return p;
}

std::vector<TensorRef> param_refs(ModelParams& p) {
  std::vector<TensorRef> refs;
  auto add_mat = [&refs](const std::string& name, Eigen::MatrixXd& m) {
    refs.push_back({name, m.data(), m.rows(), m.cols()});
  };
  auto add_vec = [&refs](const std::string& name, Eigen::VectorXd& v) {
    refs.push_back({name, v.data(), v.size(), 1});
  };
  add_mat("w_in", p.w_in);
  add_vec("b_in", p.b_in);
  add_mat("pos", p.pos);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string base = "layers." + std::to_string(i) + ".";
    add_vec(base + "ln1_gain", l.ln1_gain);
    add_vec(base + "ln1_bias", l.ln1_bias);
    add_mat(base + "w_q", l.w_q);
    add_vec(base + "b_q", l.b_q);
    add_mat(base + "w_k", l.w_k);
    add_vec(base + "b_k", l.b_k);
    add_mat(base + "w_v", l.w_v);
    add_vec(base + "b_v", l.b_v);
    add_mat(base + "w_o", l.w_o);
    add_vec(base + "b_o", l.b_o);
    add_vec(base + "ln2_gain", l.ln2_gain);
    add_vec(base + "ln2_bias", l.ln2_bias);
    add_mat(base + "w_ff1", l.w_ff1);
    add_vec(base + "b_ff1", l.b_ff1);
    add_mat(base + "w_ff2", l.w_ff2);
    add_vec(base + "b_ff2", l.b_ff2);
  }
  add_vec("lnf_gain", p.lnf_gain);
  add_vec("lnf_bias", p.lnf_bias);
  add_vec("w_out", p.w_out);
  add_vec("b_out", p.b_out);
  return refs;
}

Mat stack_features(const std::vector<const RoadGenome*>& batch, int block_size) {
  const Eigen::Index t = block_size;
  Mat x(static_cast<Eigen::Index>(batch.size()) * t, 2);
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const RoadGenome& g = *batch[e];
    if (static_cast<int>(g.size()) != block_size)
      throw std::invalid_argument("genome length does not match model block size");
    const Eigen::Index base = static_cast<Eigen::Index>(e) * t;
    for (Eigen::Index i = 0; i < t; ++i) {
      x(base + i, 0) = g.curvature[static_cast<std::size_t>(i)];
      x(base + i, 1) = g.step_at(static_cast<std::size_t>(i));
    }
  }
  return x;
}

namespace {

void layer_norm_forward(const Mat& x, const Eigen::VectorXd& gain, const Eigen::VectorXd& bias,
                        Mat& xhat, Eigen::VectorXd& rstd, Mat& out) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  xhat.resize(n, d);
  rstd.resize(n);
  out.resize(n, d);
  const Eigen::RowVectorXd g = gain.transpose();
  const Eigen::RowVectorXd b = bias.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().sum() / static_cast<double>(d);
    const double r = 1.0 / std::sqrt(var + kLayerNormEps);
    rstd(i) = r;
    xhat.row(i) = (x.row(i).array() - mu) * r;
    out.row(i) = xhat.row(i).cwiseProduct(g) + b;
  }
}

Mat apply_gain_bias(const Mat& xhat, const Eigen::VectorXd& gain, const Eigen::VectorXd& bias) {
  Mat out(xhat.rows(), xhat.cols());
  const Eigen::RowVectorXd g = gain.transpose();
  const Eigen::RowVectorXd b = bias.transpose();
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) = xhat.row(i).cwiseProduct(g) + b;
  return out;
}

/// dL/dx of LayerNorm given dL/dy; accumulates gain/bias gradients.
Mat layer_norm_backward(const Mat& dy, const Mat& xhat, const Eigen::VectorXd& rstd,
                        const Eigen::VectorXd& gain, Eigen::VectorXd& dgain,
                        Eigen::VectorXd& dbias) {
  dgain += dy.cwiseProduct(xhat).colwise().sum().transpose();
  dbias += dy.colwise().sum().transpose();
  const Eigen::RowVectorXd g = gain.transpose();
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const Eigen::RowVectorXd dxhat = dy.row(i).cwiseProduct(g);
    const double m1 = dxhat.mean();
    const double m2 = dxhat.cwiseProduct(xhat.row(i)).mean();
    dx.row(i) = ((dxhat.array() - m1 - xhat.row(i).array() * m2) * rstd(i)).matrix();
  }
  return dx;
}

/// Softmax over columns 0..i of row i; strict zeros above the diagonal keep
/// the computation causal to the bit.
void causal_softmax_inplace(Mat& s) {
  const Eigen::Index t = s.rows();
  for (Eigen::Index i = 0; i < t; ++i) {
    double mx = s(i, 0);
    for (Eigen::Index j = 1; j <= i; ++j) mx = std::max(mx, s(i, j));
    double sum = 0.0;
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double e = std::exp(s(i, j) - mx);
      s(i, j) = e;
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (Eigen::Index j = 0; j <= i; ++j) s(i, j) *= inv;
    for (Eigen::Index j = i + 1; j < t; ++j) s(i, j) = 0.0;
  }
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void fill_dropout_mask(Mat& mask, Eigen::Index row0, Eigen::Index rows, double rate,
                       std::uint64_t seed) {
  Rng rng(seed);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < mask.cols(); ++j)
      mask(row0 + i, j) = rng.uniform() < rate ? 0.0 : scale;
}

}  // namespace

Gradients::Gradients(const DiscriminatorConfig& cfg) : g(make_params(cfg)) {}

void Gradients::set_zero() {
  for (auto& ref : param_refs(g)) std::fill(ref.data, ref.data + ref.size(), 0.0);
}

Eigen::VectorXd batch_forward(const ModelParams& params, const DiscriminatorConfig& cfg,
                              const std::vector<const RoadGenome*>& batch,
                              const DropoutPlan* dropout, BatchCache* cache) {
  const int b = static_cast<int>(batch.size());
  const int t = cfg.block_size;
  const int d = cfg.d_model;
  const int heads = cfg.n_heads;
  const int dh = cfg.head_dim();
  const Eigen::Index n = static_cast<Eigen::Index>(b) * t;
  const bool drop = dropout != nullptr && dropout->active();
  if (b == 0) throw std::invalid_argument("empty batch");
  if (drop && cache == nullptr)
    throw std::logic_error("dropout requires a cache to hold the masks");

  Mat x = stack_features(batch, t);
  Mat h = x * params.w_in.transpose();
  h.rowwise() += params.b_in.transpose();
  for (int e = 0; e < b; ++e) h.middleRows(static_cast<Eigen::Index>(e) * t, t) += params.pos;

  if (cache != nullptr) {
    cache->batch = b;
    cache->x = x;
    cache->layers.assign(static_cast<std::size_t>(cfg.n_layers), LayerCache{});
    cache->h0_mask.resize(0, 0);
  }

  // Dropout seeds are derived per (example, site) so batching is immaterial:
  // site 0 is the embedding, site 1+l the feed-forward of layer l.
  if (drop) {
    cache->h0_mask.resize(n, d);
    for (int e = 0; e < b; ++e) {
      const std::uint64_t es = derive_seed(dropout->master_seed, dropout->first_example_index + e);
      fill_dropout_mask(cache->h0_mask, static_cast<Eigen::Index>(e) * t, t, dropout->rate,
                        derive_seed(es, 0));
    }
    h = h.cwiseProduct(cache->h0_mask);
  }
  if (cache != nullptr) cache->h0 = h;

  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int l = 0; l < cfg.n_layers; ++l) {
    const LayerParams& lp = params.layers[static_cast<std::size_t>(l)];
    LayerCache* lc = cache != nullptr ? &cache->layers[static_cast<std::size_t>(l)] : nullptr;

    Mat xhat, a;
    Eigen::VectorXd rstd;
    layer_norm_forward(h, lp.ln1_gain, lp.ln1_bias, xhat, rstd, a);
    if (lc != nullptr) {
      lc->ln1_xhat = std::move(xhat);
      lc->ln1_rstd = std::move(rstd);
    }

    Mat q = a * lp.w_q.transpose();
    q.rowwise() += lp.b_q.transpose();
    Mat k = a * lp.w_k.transpose();
    k.rowwise() += lp.b_k.transpose();
    Mat v = a * lp.w_v.transpose();
    v.rowwise() += lp.b_v.transpose();

    Mat att_concat(n, d);
    if (lc != nullptr) lc->att.resize(static_cast<std::size_t>(b) * heads);
    for (int e = 0; e < b; ++e) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(e) * t;
      for (int hh = 0; hh < heads; ++hh) {
        const Eigen::Index c0 = static_cast<Eigen::Index>(hh) * dh;
        Mat s = (q.block(r0, c0, t, dh) * k.block(r0, c0, t, dh).transpose()) * inv_sqrt_dh;
        causal_softmax_inplace(s);
        att_concat.block(r0, c0, t, dh) = s * v.block(r0, c0, t, dh);
        if (lc != nullptr) lc->att[static_cast<std::size_t>(e) * heads + hh] = std::move(s);
      }
    }
    if (lc != nullptr) {
      lc->q = std::move(q);
      lc->k = std::move(k);
      lc->v = std::move(v);
    }

    Mat attn_out = att_concat * lp.w_o.transpose();
    attn_out.rowwise() += lp.b_o.transpose();
    if (lc != nullptr) lc->att_concat = std::move(att_concat);
    h += attn_out;

    Mat xhat2, a2;
    Eigen::VectorXd rstd2;
    layer_norm_forward(h, lp.ln2_gain, lp.ln2_bias, xhat2, rstd2, a2);
    if (lc != nullptr) {
      lc->ln2_xhat = std::move(xhat2);
      lc->ln2_rstd = std::move(rstd2);
    }

    Mat fpre = a2 * lp.w_ff1.transpose();
    fpre.rowwise() += lp.b_ff1.transpose();
    Mat fact = fpre.unaryExpr([](double u) { return gelu(u); });
    if (drop) {
      lc->ff_mask.resize(n, cfg.ff_dim());
      for (int e = 0; e < b; ++e) {
        const std::uint64_t es =
            derive_seed(dropout->master_seed, dropout->first_example_index + e);
        fill_dropout_mask(lc->ff_mask, static_cast<Eigen::Index>(e) * t, t, dropout->rate,
                          derive_seed(es, 1 + static_cast<std::uint64_t>(l)));
      }
      fact = fact.cwiseProduct(lc->ff_mask);
    }
    Mat fout = fact * lp.w_ff2.transpose();
    fout.rowwise() += lp.b_ff2.transpose();
    if (lc != nullptr) {
      lc->ff_pre = std::move(fpre);
      lc->ff_act = std::move(fact);
    }
    h += fout;
  }

  Mat xhatf, af;
  Eigen::VectorXd rstdf;
  layer_norm_forward(h, params.lnf_gain, params.lnf_bias, xhatf, rstdf, af);
  Eigen::VectorXd z = af * params.w_out;
  z.array() += params.b_out(0);
  Eigen::VectorXd probs = z.unaryExpr([](double u) { return sigmoid(u); });
  if (cache != nullptr) {
    cache->lnf_xhat = std::move(xhatf);
    cache->lnf_rstd = std::move(rstdf);
    cache->probs = probs;
  }
  return probs;
}

void batch_backward(const ModelParams& params, const DiscriminatorConfig& cfg,
                    const BatchCache& cache, const Eigen::VectorXd& dlogits, Gradients& grads) {
  const int b = cache.batch;
  const int t = cfg.block_size;
  const int d = cfg.d_model;
  const int heads = cfg.n_heads;
  const int dh = cfg.head_dim();
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Mat lnf_out = apply_gain_bias(cache.lnf_xhat, params.lnf_gain, params.lnf_bias);
  grads.g.w_out += lnf_out.transpose() * dlogits;
  grads.g.b_out(0) += dlogits.sum();
  Mat dlnf = dlogits * params.w_out.transpose();
  Mat dh_grad = layer_norm_backward(dlnf, cache.lnf_xhat, cache.lnf_rstd, params.lnf_gain,
                                    grads.g.lnf_gain, grads.g.lnf_bias);

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const LayerParams& lp = params.layers[static_cast<std::size_t>(l)];
    const LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];
    LayerParams& gl = grads.g.layers[static_cast<std::size_t>(l)];

    // Feed-forward sublayer.
    Mat ln2_out = apply_gain_bias(lc.ln2_xhat, lp.ln2_gain, lp.ln2_bias);
    gl.w_ff2 += dh_grad.transpose() * lc.ff_act;
    gl.b_ff2 += dh_grad.colwise().sum().transpose();
    Mat dff_act = dh_grad * lp.w_ff2;
    if (lc.ff_mask.size() != 0) dff_act = dff_act.cwiseProduct(lc.ff_mask);
    Mat dff_pre = dff_act.cwiseProduct(lc.ff_pre.unaryExpr([](double u) { return gelu_grad(u); }));
    gl.w_ff1 += dff_pre.transpose() * ln2_out;
    gl.b_ff1 += dff_pre.colwise().sum().transpose();
    Mat dln2 = dff_pre * lp.w_ff1;
    Mat dh_mid = dh_grad + layer_norm_backward(dln2, lc.ln2_xhat, lc.ln2_rstd, lp.ln2_gain,
                                               gl.ln2_gain, gl.ln2_bias);

    // Attention sublayer.
    gl.w_o += dh_mid.transpose() * lc.att_concat;
    gl.b_o += dh_mid.colwise().sum().transpose();
    Mat datt = dh_mid * lp.w_o;
    const Eigen::Index n = dh_mid.rows();
    Mat dq = Mat::Zero(n, d), dk = Mat::Zero(n, d), dv = Mat::Zero(n, d);
    for (int e = 0; e < b; ++e) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(e) * t;
      for (int hh = 0; hh < heads; ++hh) {
        const Eigen::Index c0 = static_cast<Eigen::Index>(hh) * dh;
        const Mat& pm = lc.att[static_cast<std::size_t>(e) * heads + hh];
        Mat doh = datt.block(r0, c0, t, dh);
        Mat dp = doh * lc.v.block(r0, c0, t, dh).transpose();
        dv.block(r0, c0, t, dh) = pm.transpose() * doh;
        Mat ds(t, t);
        for (Eigen::Index i = 0; i < t; ++i) {
          double dot = 0.0;
          for (Eigen::Index j = 0; j <= i; ++j) dot += dp(i, j) * pm(i, j);
          for (Eigen::Index j = 0; j <= i; ++j) ds(i, j) = pm(i, j) * (dp(i, j) - dot);
          for (Eigen::Index j = i + 1; j < t; ++j) ds(i, j) = 0.0;
        }
        dq.block(r0, c0, t, dh) = (ds * lc.k.block(r0, c0, t, dh)) * inv_sqrt_dh;
        dk.block(r0, c0, t, dh) = (ds.transpose() * lc.q.block(r0, c0, t, dh)) * inv_sqrt_dh;
      }
    }
    Mat ln1_out = apply_gain_bias(lc.ln1_xhat, lp.ln1_gain, lp.ln1_bias);
    gl.w_q += dq.transpose() * ln1_out;
    gl.b_q += dq.colwise().sum().transpose();
    gl.w_k += dk.transpose() * ln1_out;
    gl.b_k += dk.colwise().sum().transpose();
    gl.w_v += dv.transpose() * ln1_out;
    gl.b_v += dv.colwise().sum().transpose();
    Mat dln1 = dq * lp.w_q + dk * lp.w_k + dv * lp.w_v;
    dh_grad = dh_mid + layer_norm_backward(dln1, lc.ln1_xhat, lc.ln1_rstd, lp.ln1_gain,
                                           gl.ln1_gain, gl.ln1_bias);
  }

  if (cache.h0_mask.size() != 0) dh_grad = dh_grad.cwiseProduct(cache.h0_mask);
  for (int e = 0; e < b; ++e)
    grads.g.pos += dh_grad.middleRows(static_cast<Eigen::Index>(e) * t, t);
  grads.g.w_in += dh_grad.transpose() * cache.x;
  grads.g.b_in += dh_grad.colwise().sum().transpose();
}

}  // namespace detail

TransformerModel::TransformerModel(DiscriminatorConfig cfg) : cfg_(cfg) {
  cfg_.check();
  params_ = detail::make_params(cfg_);
}

TransformerModel TransformerModel::random_init(DiscriminatorConfig cfg, std::uint64_t seed) {
  TransformerModel model(cfg);
  Rng rng(derive_seed(seed, 0x7a6d));
  const double std_base = 0.02;
  // Residual-output projections are damped so depth keeps activations tame.
  const double std_resid = std_base / std::sqrt(2.0 * cfg.n_layers);
  auto fill = [&rng](Eigen::MatrixXd& m, double sd) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = sd * rng.normal();
  };
  ModelParams& p = model.params_;
  fill(p.w_in, std_base);
  fill(p.pos, std_base);
  for (auto& l : p.layers) {
    l.ln1_gain.setOnes();
    l.ln2_gain.setOnes();
    fill(l.w_q, std_base);
    fill(l.w_k, std_base);
    fill(l.w_v, std_base);
    fill(l.w_o, std_resid);
    fill(l.w_ff1, std_base);
    fill(l.w_ff2, std_resid);
  }
  p.lnf_gain.setOnes();
  for (Eigen::Index i = 0; i < p.w_out.size(); ++i) p.w_out(i) = std_base * rng.normal();
  return model;
}

Scores TransformerModel::forward(const RoadGenome& genome) const {
  auto scores = forward_many({genome});
  return std::move(scores.front());
}

std::vector<Scores> TransformerModel::forward_many(const std::vector<RoadGenome>& genomes) const {
  constexpr std::size_t kChunk = 16;
  std::vector<Scores> out;
  out.reserve(genomes.size());
  const int t = cfg_.block_size;
  for (std::size_t start = 0; start < genomes.size(); start += kChunk) {
    const std::size_t stop = std::min(genomes.size(), start + kChunk);
    std::vector<const RoadGenome*> batch;
    batch.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i) batch.push_back(&genomes[i]);
    Eigen::VectorXd probs = detail::batch_forward(params_, cfg_, batch, nullptr, nullptr);
    for (std::size_t e = 0; e < batch.size(); ++e) {
      Scores s;
      s.p.resize(static_cast<std::size_t>(t));
      double f1 = 0.0;
      for (int i = 0; i < t; ++i) {
        const double pi = probs(static_cast<Eigen::Index>(e) * t + i);
        s.p[static_cast<std::size_t>(i)] = pi;
        f1 += pi;
      }
      s.f1 = f1;
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<TensorRef> TransformerModel::parameter_refs() { return detail::param_refs(params_); }

std::vector<TensorRef> TransformerModel::parameter_refs() const {
  // Read-only use: serialization walks the tensors without mutating them.
  return detail::param_refs(const_cast<ModelParams&>(params_));
}

std::int64_t TransformerModel::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& ref : parameter_refs()) total += ref.size();
  return total;
}

bool TransformerModel::parameters_finite() const {
  for (const auto& ref : parameter_refs())
    for (Eigen::Index i = 0; i < ref.size(); ++i)
      if (!std::isfinite(ref.data[i])) return false;
  return true;
}

double weighted_bce(double p, bool label, double pos_weight) {
  return label ? -pos_weight * std::log(p) : -std::log1p(-p);
}

double diversity_f2(const std::vector<RoadGenome>& pool, std::size_t index) {
  if (pool.size() < 2) throw std::invalid_argument("diversity needs at least two genomes");
  if (index >= pool.size()) throw std::invalid_argument("diversity index out of range");
  std::vector<double> dist;
  dist.reserve(pool.size() - 1);
  for (std::size_t j = 0; j < pool.size(); ++j)
    if (j != index) dist.push_back(genome_distance(pool[index], pool[j]));
  std::sort(dist.begin(), dist.end());
  const std::size_t m = dist.size();
  if (m % 2 == 1) return dist[m / 2];
  return 0.5 * (dist[m / 2 - 1] + dist[m / 2]);
}

}  // namespace roadgen
