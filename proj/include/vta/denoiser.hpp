#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vta/common.hpp"
#include "vta/nn.hpp"
#include "vta/rng.hpp"

namespace vta {

// ---------------------------------------------------------------------------
// Transformer-UNet noise predictor. The latent sequence (one token per latent
// frame) runs through a stack of down/mid/up blocks with additive skip
// connections; every block is self-attention, a conditioner-fusion
// cross-attention, and a feed-forward net, each pre-normalized and residual.
//
// Conditioners are projected from the shared embedding space by bias-free
// linear maps, so a zero conditioner contributes exactly nothing through the
// additive fusion path. Absent conditioners fall back to learned null
// embeddings; the classifier-free unconditional branch is the all-null set.

enum class FusionMode {
  kXattnV,         // Attn(z, c_v)
  kXattnConcatVO,  // Attn(z, [c_v; c_o])
  kXattnOAddV,     // Attn(z, c_o) + resample(c_v)
  kXattnVAddO,     // Attn(z, c_v) + resample(c_o)
};

inline const char* to_string(FusionMode m) {
  switch (m) {
    case FusionMode::kXattnV: return "xattn_v";
    case FusionMode::kXattnConcatVO: return "xattn_concat_vo";
    case FusionMode::kXattnOAddV: return "xattn_o_add_v";
    case FusionMode::kXattnVAddO: return "xattn_v_add_o";
  }
  return "?";
}

inline FusionMode fusion_mode_from_string(const std::string& s) {
  if (s == "xattn_v") return FusionMode::kXattnV;
  if (s == "xattn_concat_vo") return FusionMode::kXattnConcatVO;
  if (s == "xattn_o_add_v") return FusionMode::kXattnOAddV;
  if (s == "xattn_v_add_o") return FusionMode::kXattnVAddO;
  throw ConfigError("unknown fusion mode '" + s + "'");
}

inline bool fusion_uses_object(FusionMode m) { return m != FusionMode::kXattnV; }

// Raw conditioners in the shared embedding space; rows are frames. An absent
// member is replaced by its learned null embedding inside the denoiser. The
// all-absent set is the unconditional branch.
struct ConditionerSet {
  std::optional<Mat> video;   // (T_frames x d_cond)
  std::optional<Mat> object;  // (T_frames x d_cond)
  std::optional<Mat> text;    // (1 x d_cond)
};

struct DenoiserConfig {
  int latent_channels = 64;  // token feature width at input/output
  int d_cond = 64;           // embedding-space width of raw conditioners
  int d_model = 64;
  int n_heads = 4;
  int n_down = 2;
  int n_mid = 1;
  int n_up = 2;
  int ffn_mult = 2;

  int n_blocks() const { return n_down + n_mid + n_up; }
};

inline void validate_denoiser_config(const DenoiserConfig& c) {
  require_config(c.latent_channels >= 1 && c.d_cond >= 1 && c.d_model >= 1,
                 "denoiser: sizes must be positive");
  require_config(c.n_heads >= 1 && c.d_model % c.n_heads == 0,
                 "denoiser: d_model must be divisible by n_heads");
  require_config(c.n_down >= 0 && c.n_mid >= 0 && c.n_up >= 0 && c.n_blocks() >= 1,
                 "denoiser: need at least one block");
  require_config(c.n_up <= c.n_down, "denoiser: more up blocks than skip sources");
  require_config(c.ffn_mult >= 1, "denoiser: ffn_mult must be >= 1");
}

struct DenoiserParams {
  DenoiserConfig config;
  nn::ParamStore store;
};

namespace detail {

inline std::string block_prefix(int b) { return "block" + std::to_string(b) + "."; }

}  // namespace detail

inline DenoiserParams make_denoiser(const DenoiserConfig& config, std::uint64_t seed) {
  validate_denoiser_config(config);
  DenoiserParams p;
  p.config = config;
  nn::ParamStore& s = p.store;
  Rng rng = Rng::stream(seed, "denoiser.init");
  const int d = config.d_model;

  nn::init_xavier(s.add("in_proj.w", d, config.latent_channels), rng);
  s.add("in_proj.b", 1, d);
  nn::init_xavier(s.add("time.w1", d, d), rng);
  s.add("time.b1", 1, d);
  nn::init_xavier(s.add("time.w2", d, d), rng);
  s.add("time.b2", 1, d);

  // Bias-free conditioner projections (zero in -> zero out).
  nn::init_xavier(s.add("cond.v.w", d, config.d_cond), rng);
  nn::init_xavier(s.add("cond.o.w", d, config.d_cond), rng);
  nn::init_xavier(s.add("cond.t.w", d, config.d_cond), rng);
  nn::init_normal(s.add("null.v", 1, d), rng, 0.02);
  nn::init_normal(s.add("null.o", 1, d), rng, 0.02);
  nn::init_normal(s.add("null.t", 1, d), rng, 0.02);

  for (int b = 0; b < config.n_blocks(); ++b) {
    const std::string pre = detail::block_prefix(b);
    s.add(pre + "norm1.g", 1, d).setOnes();
    nn::init_xavier(s.add(pre + "self.wq", d, d), rng);
    nn::init_xavier(s.add(pre + "self.wk", d, d), rng);
    nn::init_xavier(s.add(pre + "self.wv", d, d), rng);
    nn::init_xavier(s.add(pre + "self.wo", d, d), rng);
    s.add(pre + "norm2.g", 1, d).setOnes();
    nn::init_xavier(s.add(pre + "cross.wq", d, d), rng);
    nn::init_xavier(s.add(pre + "cross.wk", d, d), rng);
    nn::init_xavier(s.add(pre + "cross.wv", d, d), rng);
    nn::init_xavier(s.add(pre + "cross.wo", d, d), rng);
    s.add(pre + "norm3.g", 1, d).setOnes();
    nn::init_xavier(s.add(pre + "ffn.w1", d * config.ffn_mult, d), rng);
    s.add(pre + "ffn.b1", 1, d * config.ffn_mult);
    nn::init_xavier(s.add(pre + "ffn.w2", d, d * config.ffn_mult), rng);
    s.add(pre + "ffn.b2", 1, d);
  }
  s.add("out_norm.g", 1, d).setOnes();
  nn::init_xavier(s.add("out_proj.w", config.latent_channels, d), rng);
  s.add("out_proj.b", 1, config.latent_channels);
  return p;
}

// Linear time interpolation of conditioner rows onto target_len steps;
// endpoints map to endpoints. A single source row broadcasts.
inline Mat resample_conditioner(const Mat& c, int target_len) {
  require(c.rows() >= 1 && target_len >= 1, "resample_conditioner: empty input");
  const int src = static_cast<int>(c.rows());
  if (src == target_len) return c;
  Mat out(target_len, c.cols());
  for (int i = 0; i < target_len; ++i) {
    const double pos = target_len == 1
                           ? 0.5 * (src - 1)
                           : static_cast<double>(i) * (src - 1) / (target_len - 1);
    const int lo = static_cast<int>(std::floor(pos));
    const int hi = std::min(lo + 1, src - 1);
    const double w = pos - lo;
    out.row(i) = (1.0 - w) * c.row(lo) + w * c.row(hi);
  }
  return out;
}

// Adjoint of resample_conditioner as a map of rows (for backprop).
inline Mat resample_conditioner_adjoint(const Mat& dout, int src_len) {
  const int target_len = static_cast<int>(dout.rows());
  if (src_len == target_len) return dout;
  Mat dsrc = Mat::Zero(src_len, dout.cols());
  for (int i = 0; i < target_len; ++i) {
    const double pos = target_len == 1
                           ? 0.5 * (src_len - 1)
                           : static_cast<double>(i) * (src_len - 1) / (target_len - 1);
    const int lo = static_cast<int>(std::floor(pos));
    const int hi = std::min(lo + 1, src_len - 1);
    const double w = pos - lo;
    dsrc.row(lo) += (1.0 - w) * dout.row(i);
    if (hi != lo) dsrc.row(hi) += w * dout.row(i);
  }
  return dsrc;
}

namespace detail {

// One projected conditioner: the KV view carries positional encodings (real
// sequences only), the additive view never does.
struct CondView {
  Mat kv;         // rows used as attention keys/values
  Mat add_basis;  // projected rows without PE (additive fusion input)
  bool is_null = false;
  nn::LinearCache proj_cache;  // raw-conditioner projection
};

struct BlockCtx {
  nn::RmsNormCache norm1, norm2, norm3;
  nn::AttnCache self_attn, cross_attn;
  nn::LinearCache ffn1, ffn2;
  nn::SiluCache ffn_act;
  Mat kv;  // assembled cross-attention keys/values
};

struct DenoiserCtx {
  int t_lat = 0;
  int t_step = 0;
  CondView v, o, t;
  Mat add_term;      // resampled additive rows (empty if no additive path)
  int add_src_len = 0;
  char add_slot = 0;  // 'v' or 'o'
  nn::LinearCache in_proj;
  nn::LinearCache time1, time2;
  nn::SiluCache time_act;
  Vec time_embed;
  std::vector<BlockCtx> blocks;
  std::vector<Mat> skip_sources;  // down-block outputs consumed by up blocks
  nn::RmsNormCache out_norm;
  nn::LinearCache out_proj;
  FusionMode mode = FusionMode::kXattnV;
};

inline void project_conditioner(const std::optional<Mat>& raw, const std::string& proj,
                                const std::string& null_name, bool with_pe,
                                const DenoiserParams& p, CondView& out) {
  if (raw.has_value()) {
    require(raw->cols() == p.config.d_cond,
            "conditioning error: conditioner width does not match d_cond");
    require(raw->rows() >= 1, "conditioning error: empty conditioner sequence");
    out.is_null = false;
    out.add_basis = nn::linear_fwd(*raw, p.store.at(proj), nullptr, &out.proj_cache);
    out.kv = out.add_basis;
    if (with_pe)
      out.kv += nn::positional_encoding(static_cast<int>(out.kv.rows()), p.config.d_model);
  } else {
    out.is_null = true;
    out.add_basis = p.store.at(null_name);
    out.kv = out.add_basis;
  }
}

}  // namespace detail

using detail::DenoiserCtx;

// Predicts the noise for latent tokens z_t (T_lat x C) at diffusion step t.
// Pass a ctx to enable the matching backward call.
inline Mat denoiser_forward(const Mat& z_t, int t, const ConditionerSet& cond,
                            FusionMode mode, const DenoiserParams& p,
                            DenoiserCtx* ctx = nullptr) {
  const DenoiserConfig& c = p.config;
  require(z_t.cols() == c.latent_channels,
          "denoiser: latent width does not match latent_channels");
  require(z_t.rows() >= 1, "denoiser: empty latent sequence");
  const int t_lat = static_cast<int>(z_t.rows());
  const int d = c.d_model;
  DenoiserCtx local;
  DenoiserCtx& cx = ctx ? *ctx : local;
  cx.t_lat = t_lat;
  cx.t_step = t;
  cx.mode = mode;

  // Conditioner views. Text rows are utterance-level and carry no PE.
  detail::project_conditioner(cond.video, "cond.v.w", "null.v", true, p, cx.v);
  detail::project_conditioner(cond.object, "cond.o.w", "null.o", true, p, cx.o);
  detail::project_conditioner(cond.text, "cond.t.w", "null.t", false, p, cx.t);

  // Additive fusion term, shared by every block.
  cx.add_term = Mat();
  if (mode == FusionMode::kXattnOAddV) {
    cx.add_slot = 'v';
    cx.add_src_len = static_cast<int>(cx.v.add_basis.rows());
    cx.add_term = resample_conditioner(cx.v.add_basis, t_lat);
  } else if (mode == FusionMode::kXattnVAddO) {
    cx.add_slot = 'o';
    cx.add_src_len = static_cast<int>(cx.o.add_basis.rows());
    cx.add_term = resample_conditioner(cx.o.add_basis, t_lat);
  }

  // Cross-attention key/value assembly per fusion mode, plus the text row.
  Mat kv;
  auto stack = [](const Mat& a, const Mat& b) {
    Mat out(a.rows() + b.rows(), a.cols());
    out.topRows(a.rows()) = a;
    out.bottomRows(b.rows()) = b;
    return out;
  };
  switch (mode) {
    case FusionMode::kXattnV: kv = cx.v.kv; break;
    case FusionMode::kXattnConcatVO: kv = stack(cx.v.kv, cx.o.kv); break;
    case FusionMode::kXattnOAddV: kv = cx.o.kv; break;
    case FusionMode::kXattnVAddO: kv = cx.v.kv; break;
  }
  kv = stack(kv, cx.t.kv);

  // Input projection + token positions + diffusion-step embedding.
  Mat h = nn::linear_fwd(z_t, p.store.at("in_proj.w"), &p.store.at("in_proj.b"),
                         &cx.in_proj);
  h += nn::positional_encoding(t_lat, d);
  const Vec t_embed = nn::sinusoidal_embedding(static_cast<double>(t), d);
  cx.time_embed = t_embed;
  Mat te = nn::linear_fwd(t_embed.transpose(), p.store.at("time.w1"),
                          &p.store.at("time.b1"), &cx.time1);
  te = nn::silu_fwd(te, &cx.time_act);
  te = nn::linear_fwd(te, p.store.at("time.w2"), &p.store.at("time.b2"), &cx.time2);
  h.rowwise() += te.row(0);

  cx.blocks.resize(static_cast<std::size_t>(c.n_blocks()));
  cx.skip_sources.clear();
  int skips_taken = 0;
  for (int b = 0; b < c.n_blocks(); ++b) {
    detail::BlockCtx& bc = cx.blocks[static_cast<std::size_t>(b)];
    const std::string pre = detail::block_prefix(b);
    const bool is_up = b >= c.n_down + c.n_mid;
    if (is_up) {
      // Up block: add the matching down block's output (LIFO skip order).
      h += cx.skip_sources[cx.skip_sources.size() - 1 - static_cast<std::size_t>(skips_taken)];
      ++skips_taken;
    }
    bc.kv = kv;

    // Self-attention.
    const nn::AttnWeights self_w{&p.store.at(pre + "self.wq"), &p.store.at(pre + "self.wk"),
                                 &p.store.at(pre + "self.wv"), &p.store.at(pre + "self.wo")};
    Mat n1 = nn::rmsnorm_fwd(h, p.store.at(pre + "norm1.g"), &bc.norm1);
    h += nn::attention_fwd(n1, n1, self_w, c.n_heads, &bc.self_attn);

    // Cross-attention fusion (Attn over kv, plus the additive term if any).
    const nn::AttnWeights cross_w{&p.store.at(pre + "cross.wq"),
                                  &p.store.at(pre + "cross.wk"),
                                  &p.store.at(pre + "cross.wv"),
                                  &p.store.at(pre + "cross.wo")};
    Mat n2 = nn::rmsnorm_fwd(h, p.store.at(pre + "norm2.g"), &bc.norm2);
    Mat fused = nn::attention_fwd(n2, bc.kv, cross_w, c.n_heads, &bc.cross_attn);
    if (cx.add_term.size() > 0) fused += cx.add_term;
    h += fused;

    // Feed-forward.
    Mat n3 = nn::rmsnorm_fwd(h, p.store.at(pre + "norm3.g"), &bc.norm3);
    Mat f = nn::linear_fwd(n3, p.store.at(pre + "ffn.w1"), &p.store.at(pre + "ffn.b1"),
                           &bc.ffn1);
    f = nn::silu_fwd(f, &bc.ffn_act);
    h += nn::linear_fwd(f, p.store.at(pre + "ffn.w2"), &p.store.at(pre + "ffn.b2"),
                        &bc.ffn2);

    if (b < c.n_down) cx.skip_sources.push_back(h);
  }

  Mat out = nn::rmsnorm_fwd(h, p.store.at("out_norm.g"), &cx.out_norm);
  return nn::linear_fwd(out, p.store.at("out_proj.w"), &p.store.at("out_proj.b"),
                        &cx.out_proj);
}

// Accumulates parameter gradients for one forward pass. Raw conditioners are
// treated as constants; the projections and null embeddings are trained.
inline void denoiser_backward(const Mat& d_eps, const DenoiserCtx& cx, DenoiserParams& p) {
  const DenoiserConfig& c = p.config;
  nn::ParamStore& s = p.store;
  const int d = c.d_model;
  const int t_lat = cx.t_lat;

  Mat dh = Mat::Zero(t_lat, d);
  {
    Mat dnorm = Mat::Zero(t_lat, d);
    nn::linear_bwd(d_eps, cx.out_proj, s.at("out_proj.w"), s.grad("out_proj.w"),
                   &s.grad("out_proj.b"), &dnorm);
    nn::rmsnorm_bwd(dnorm, cx.out_norm, s.at("out_norm.g"), s.grad("out_norm.g"), &dh);
  }

  Mat dkv_total = Mat::Zero(cx.blocks.empty() ? 1 : cx.blocks[0].kv.rows(), d);
  Mat dadd_total = Mat::Zero(t_lat, d);
  std::vector<Mat> dskips(cx.skip_sources.size());
  for (auto& m : dskips) m = Mat::Zero(t_lat, d);

  for (int b = c.n_blocks() - 1; b >= 0; --b) {
    const detail::BlockCtx& bc = cx.blocks[static_cast<std::size_t>(b)];
    const std::string pre = detail::block_prefix(b);
    const bool is_up = b >= c.n_down + c.n_mid;

    if (b < c.n_down) {
      // This block's output fed a skip connection; fold that gradient in.
      dh += dskips[static_cast<std::size_t>(b)];
    }

    // Feed-forward backward.
    {
      Mat df = Mat::Zero(t_lat, d * c.ffn_mult);
      nn::linear_bwd(dh, bc.ffn2, s.at(pre + "ffn.w2"), s.grad(pre + "ffn.w2"),
                     &s.grad(pre + "ffn.b2"), &df);
      const Mat df_pre = nn::silu_bwd(df, bc.ffn_act);
      Mat dn3 = Mat::Zero(t_lat, d);
      nn::linear_bwd(df_pre, bc.ffn1, s.at(pre + "ffn.w1"), s.grad(pre + "ffn.w1"),
                     &s.grad(pre + "ffn.b1"), &dn3);
      nn::rmsnorm_bwd(dn3, bc.norm3, s.at(pre + "norm3.g"), s.grad(pre + "norm3.g"), &dh);
    }

    // Cross-attention fusion backward.
    {
      if (cx.add_term.size() > 0) dadd_total += dh;
      const nn::AttnWeights w{&s.at(pre + "cross.wq"), &s.at(pre + "cross.wk"),
                              &s.at(pre + "cross.wv"), &s.at(pre + "cross.wo")};
      const nn::AttnGrads g{&s.grad(pre + "cross.wq"), &s.grad(pre + "cross.wk"),
                            &s.grad(pre + "cross.wv"), &s.grad(pre + "cross.wo")};
      Mat dn2 = Mat::Zero(t_lat, d);
      nn::attention_bwd(dh, bc.cross_attn, w, c.n_heads, g, &dn2, &dkv_total);
      nn::rmsnorm_bwd(dn2, bc.norm2, s.at(pre + "norm2.g"), s.grad(pre + "norm2.g"), &dh);
    }

    // Self-attention backward (queries and keys/values share the input).
    {
      const nn::AttnWeights w{&s.at(pre + "self.wq"), &s.at(pre + "self.wk"),
                              &s.at(pre + "self.wv"), &s.at(pre + "self.wo")};
      const nn::AttnGrads g{&s.grad(pre + "self.wq"), &s.grad(pre + "self.wk"),
                            &s.grad(pre + "self.wv"), &s.grad(pre + "self.wo")};
      Mat dn1 = Mat::Zero(t_lat, d);
      nn::attention_bwd(dh, bc.self_attn, w, c.n_heads, g, &dn1, &dn1);
      nn::rmsnorm_bwd(dn1, bc.norm1, s.at(pre + "norm1.g"), s.grad(pre + "norm1.g"), &dh);
    }

    if (is_up) {
      // The skip source added at this block's input receives dh as-is.
      const int u = b - (c.n_down + c.n_mid);
      dskips[cx.skip_sources.size() - 1 - static_cast<std::size_t>(u)] += dh;
    }
  }

  // Time-embedding MLP: gradient is the column sum over tokens.
  {
    Mat dte = dh.colwise().sum();
    Mat dmid = Mat::Zero(1, d);
    nn::linear_bwd(dte, cx.time2, s.at("time.w2"), s.grad("time.w2"), &s.grad("time.b2"),
                   &dmid);
    const Mat dmid_pre = nn::silu_bwd(dmid, cx.time_act);
    nn::linear_bwd(dmid_pre, cx.time1, s.at("time.w1"), s.grad("time.w1"),
                   &s.grad("time.b1"), nullptr);
  }

  // Input projection.
  nn::linear_bwd(dh, cx.in_proj, s.at("in_proj.w"), s.grad("in_proj.w"),
                 &s.grad("in_proj.b"), nullptr);

  // Additive fusion path back to the projected conditioner rows.
  Mat dv_rows = Mat::Zero(cx.v.kv.rows(), d);
  Mat do_rows = Mat::Zero(cx.o.kv.rows(), d);
  Mat dt_rows = Mat::Zero(cx.t.kv.rows(), d);
  if (cx.add_term.size() > 0) {
    const Mat dsrc = resample_conditioner_adjoint(dadd_total, cx.add_src_len);
    if (cx.add_slot == 'v')
      dv_rows += dsrc;
    else
      do_rows += dsrc;
  }

  // Split the assembled-KV gradient back into the participating views.
  Eigen::Index off = 0;
  auto take = [&](Mat& dst) {
    dst += dkv_total.middleRows(off, dst.rows());
    off += dst.rows();
  };
  switch (cx.mode) {
    case FusionMode::kXattnV: take(dv_rows); break;
    case FusionMode::kXattnConcatVO:
      take(dv_rows);
      take(do_rows);
      break;
    case FusionMode::kXattnOAddV: take(do_rows); break;
    case FusionMode::kXattnVAddO: take(dv_rows); break;
  }
  take(dt_rows);

  // Through each view: either the projection weight or the null embedding.
  auto view_bwd = [&](const detail::CondView& view, Mat& dview, const std::string& proj,
                      const std::string& null_name) {
    if (dview.size() == 0) return;
    if (view.is_null)
      s.grad(null_name) += dview.colwise().sum();
    else
      nn::linear_bwd(dview, view.proj_cache, s.at(proj), s.grad(proj), nullptr, nullptr);
  };
  view_bwd(cx.v, dv_rows, "cond.v.w", "null.v");
  view_bwd(cx.o, do_rows, "cond.o.w", "null.o");
  view_bwd(cx.t, dt_rows, "cond.t.w", "null.t");
}

}  // namespace vta
