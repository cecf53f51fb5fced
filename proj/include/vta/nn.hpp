#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "vta/common.hpp"
#include "vta/rng.hpp"

namespace vta::nn {

// ---------------------------------------------------------------------------
// Named parameter store with matching gradient buffers. Iteration order is
// the registration order, which makes optimizer updates, checkpoints and
// finite-difference sweeps deterministic.

class ParamStore {
 public:
  Mat& add(const std::string& name, int rows, int cols) {
    require(!values_.count(name), "ParamStore: duplicate parameter '" + name + "'");
    order_.push_back(name);
    grads_[name] = Mat::Zero(rows, cols);
    return values_[name] = Mat::Zero(rows, cols);
  }

  bool has(const std::string& name) const { return values_.count(name) > 0; }

  Mat& at(const std::string& name) {
    auto it = values_.find(name);
    require(it != values_.end(), "ParamStore: unknown parameter '" + name + "'");
    return it->second;
  }
  const Mat& at(const std::string& name) const {
    auto it = values_.find(name);
    require(it != values_.end(), "ParamStore: unknown parameter '" + name + "'");
    return it->second;
  }

  Mat& grad(const std::string& name) {
    auto it = grads_.find(name);
    require(it != grads_.end(), "ParamStore: unknown parameter '" + name + "'");
    return it->second;
  }

  const std::vector<std::string>& names() const { return order_; }

  void zero_grads() {
    for (auto& [name, g] : grads_) g.setZero();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, v] : values_) n += static_cast<std::size_t>(v.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& [name, v] : values_)
      if (!v.allFinite()) return false;
    return true;
  }

 private:
  std::vector<std::string> order_;
  std::map<std::string, Mat> values_;
  std::map<std::string, Mat> grads_;
};

// ---------------------------------------------------------------------------
// Initializers.

inline void init_xavier(Mat& w, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
}

inline void init_normal(Mat& w, Rng& rng, double stddev) {
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = stddev * rng.normal();
}

// ---------------------------------------------------------------------------
// Layers. Each forward fills a cache consumed by the matching backward;
// backward accumulates into parameter gradients and returns/accumulates
// input gradients.

// y = x W^T (+ b). x: (n x d_in), W: (d_out x d_in), b: d_out.
struct LinearCache {
  Mat x;
};

inline Mat linear_fwd(const Mat& x, const Mat& w, const Mat* b, LinearCache* cache) {
  require(x.cols() == w.cols(), "linear: input width mismatch");
  if (cache) cache->x = x;
  Mat y = x * w.transpose();
  if (b) {
    require(b->size() == w.rows(), "linear: bias size mismatch");
    y.rowwise() += Eigen::RowVectorXd::Map(b->data(), b->size());
  }
  return y;
}

inline void linear_bwd(const Mat& dy, const LinearCache& cache, const Mat& w, Mat& dw,
                       Mat* db, Mat* dx) {
  dw.noalias() += dy.transpose() * cache.x;
  if (db) {
    Eigen::RowVectorXd sums = dy.colwise().sum();
    *db += Mat::Map(sums.data(), db->rows(), db->cols());
  }
  if (dx) dx->noalias() += dy * w;
}

// SiLU: y = x * sigmoid(x). Smooth, so finite-difference checks are clean.
struct SiluCache {
  Mat x;
};

inline Mat silu_fwd(const Mat& x, SiluCache* cache) {
  if (cache) cache->x = x;
  return x.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
}

inline Mat silu_bwd(const Mat& dy, const SiluCache& cache) {
  return dy.cwiseProduct(cache.x.unaryExpr([](double v) {
    const double s = 1.0 / (1.0 + std::exp(-v));
    return s * (1.0 + v * (1.0 - s));
  }));
}

// Row-wise RMS normalization with a learned gain: y_r = g .* x_r / rms(x_r).
struct RmsNormCache {
  Mat x;
  Vec inv_rms;  // per row
};

inline constexpr double kRmsEps = 1e-8;

inline Mat rmsnorm_fwd(const Mat& x, const Mat& gain, RmsNormCache* cache) {
  require(gain.size() == x.cols(), "rmsnorm: gain size mismatch");
  const Eigen::Index n = x.rows(), d = x.cols();
  Mat y(n, d);
  Vec inv_rms(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double ms = x.row(r).squaredNorm() / static_cast<double>(d);
    inv_rms[r] = 1.0 / std::sqrt(ms + kRmsEps);
    y.row(r) = x.row(r) * inv_rms[r];
  }
  y.array().rowwise() *= Eigen::RowVectorXd::Map(gain.data(), d).array();
  if (cache) {
    cache->x = x;
    cache->inv_rms = inv_rms;
  }
  return y;
}

inline void rmsnorm_bwd(const Mat& dy, const RmsNormCache& cache, const Mat& gain,
                        Mat& dgain, Mat* dx) {
  const Eigen::Index n = cache.x.rows(), d = cache.x.cols();
  const Eigen::RowVectorXd g = Eigen::RowVectorXd::Map(gain.data(), d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double ir = cache.inv_rms[r];
    // dgain += dy .* x * inv_rms
    Eigen::RowVectorXd dg = dy.row(r).cwiseProduct(cache.x.row(r)) * ir;
    dgain += Mat::Map(dg.data(), dgain.rows(), dgain.cols());
    if (dx) {
      const Eigen::RowVectorXd dyg = dy.row(r).cwiseProduct(g);
      const double dot = dyg.dot(cache.x.row(r));
      dx->row(r) += dyg * ir -
                    cache.x.row(r) * (dot * ir * ir * ir / static_cast<double>(d));
    }
  }
}

// Row-wise softmax with max subtraction.
inline Mat softmax_rows(const Mat& x) {
  Mat y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    Eigen::RowVectorXd e = (x.row(r).array() - m).exp();
    y.row(r) = e / e.sum();
  }
  return y;
}

// ---------------------------------------------------------------------------
// Multi-head scaled dot-product attention. Queries come from x (n x d),
// keys/values from kv (s x d). Projection weights Wq/Wk/Wv/Wo are (d x d),
// bias-free. Heads split the feature dimension.

struct AttnWeights {
  const Mat* wq;
  const Mat* wk;
  const Mat* wv;
  const Mat* wo;
};

struct AttnGrads {
  Mat* dwq;
  Mat* dwk;
  Mat* dwv;
  Mat* dwo;
};

struct AttnCache {
  Mat x, kv;
  Mat q, k, v;              // (n x d), (s x d), (s x d)
  std::vector<Mat> attn;    // per head, (n x s)
  Mat heads;                // concatenated head outputs, (n x d)
};

inline Mat attention_fwd(const Mat& x, const Mat& kv, const AttnWeights& w, int n_heads,
                         AttnCache* cache) {
  const Eigen::Index d = x.cols();
  require(kv.cols() == d, "attention: kv width mismatch");
  require(d % n_heads == 0, "attention: d_model must be divisible by n_heads");
  const Eigen::Index dh = d / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Mat q = x * w.wq->transpose();
  Mat k = kv * w.wk->transpose();
  Mat v = kv * w.wv->transpose();
  Mat heads(x.rows(), d);
  std::vector<Mat> attn(static_cast<std::size_t>(n_heads));
  for (int h = 0; h < n_heads; ++h) {
    const auto qh = q.middleCols(h * dh, dh);
    const auto kh = k.middleCols(h * dh, dh);
    const auto vh = v.middleCols(h * dh, dh);
    Mat scores = (qh * kh.transpose()) * scale;
    attn[static_cast<std::size_t>(h)] = softmax_rows(scores);
    heads.middleCols(h * dh, dh) = attn[static_cast<std::size_t>(h)] * vh;
  }
  if (cache) {
    cache->x = x;
    cache->kv = kv;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attn = std::move(attn);
    cache->heads = heads;
  }
  return heads * w.wo->transpose();
}

// Accumulates parameter grads; optionally accumulates input grads.
inline void attention_bwd(const Mat& dy, const AttnCache& c, const AttnWeights& w,
                          int n_heads, const AttnGrads& g, Mat* dx, Mat* dkv) {
  const Eigen::Index d = c.x.cols();
  const Eigen::Index dh = d / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  g.dwo->noalias() += dy.transpose() * c.heads;
  const Mat dheads = dy * (*w.wo);

  Mat dq = Mat::Zero(c.q.rows(), d);
  Mat dk = Mat::Zero(c.k.rows(), d);
  Mat dv = Mat::Zero(c.v.rows(), d);
  for (int h = 0; h < n_heads; ++h) {
    const auto a = c.attn[static_cast<std::size_t>(h)];
    const auto vh = c.v.middleCols(h * dh, dh);
    const auto qh = c.q.middleCols(h * dh, dh);
    const auto kh = c.k.middleCols(h * dh, dh);
    const Mat dout = dheads.middleCols(h * dh, dh);
    dv.middleCols(h * dh, dh).noalias() += a.transpose() * dout;
    Mat da = dout * vh.transpose();
    // softmax backward per row: ds = a .* (da - sum(da .* a))
    Mat ds(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      const double dot = da.row(r).dot(a.row(r));
      ds.row(r) = a.row(r).cwiseProduct((da.row(r).array() - dot).matrix());
    }
    ds *= scale;
    dq.middleCols(h * dh, dh).noalias() += ds * kh;
    dk.middleCols(h * dh, dh).noalias() += ds.transpose() * qh;
  }
  g.dwq->noalias() += dq.transpose() * c.x;
  g.dwk->noalias() += dk.transpose() * c.kv;
  g.dwv->noalias() += dv.transpose() * c.kv;
  if (dx) dx->noalias() += dq * (*w.wq);
  if (dkv) dkv->noalias() += dk * (*w.wk) + dv * (*w.wv);
}

// ---------------------------------------------------------------------------
// Sinusoidal embeddings, used both for token positions and diffusion steps.

inline Vec sinusoidal_embedding(double pos, int dim) {
  Vec e(dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / static_cast<double>(dim));
    e[2 * i] = std::sin(pos * freq);
    e[2 * i + 1] = std::cos(pos * freq);
  }
  if (dim % 2 == 1) e[dim - 1] = 0.0;
  return e;
}

inline Mat positional_encoding(int length, int dim) {
  Mat pe(length, dim);
  for (int i = 0; i < length; ++i)
    pe.row(i) = sinusoidal_embedding(static_cast<double>(i), dim).transpose();
  return pe;
}

// ---------------------------------------------------------------------------
// Adam. lr = 0 leaves parameters bit-identical.

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::map<std::string, Mat> m, v;
  long step = 0;
};

inline void adam_step(ParamStore& params, AdamState& state, const AdamConfig& cfg) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (const auto& name : params.names()) {
    Mat& p = params.at(name);
    const Mat& g = params.grad(name);
    Mat& m = state.m.try_emplace(name, Mat::Zero(p.rows(), p.cols())).first->second;
    Mat& v = state.v.try_emplace(name, Mat::Zero(p.rows(), p.cols())).first->second;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    if (cfg.lr != 0.0)
      p -= cfg.lr * (m / bc1).cwiseQuotient(((v / bc2).cwiseSqrt().array() + cfg.eps).matrix());
  }
}

}  // namespace vta::nn
