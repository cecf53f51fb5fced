#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "vta/common.hpp"
#include "vta/mel.hpp"
#include "vta/nn.hpp"
#include "vta/rng.hpp"

namespace vta {

// ---------------------------------------------------------------------------
// Tiny trainable VAE defining the latent space for diffusion. The encoder and
// decoder are affine+SiLU stacks over non-overlapping patches of `downsample`
// mel frames, so T_lat = ceil(T_mel / downsample). The identity configuration
// bypasses the network entirely (latent = mel), which decouples diffusion
// tests from codec training.

// Surrogate for log-variance -inf: exp(kLogVarNegInf / 2) underflows to 0.
inline constexpr double kLogVarNegInf = -1e4;

struct VaeConfig {
  bool identity = true;
  int n_mels = 64;
  int downsample = 1;
  int latent_channels = 64;
  int hidden = 128;
  double log_floor_db = -80.0;

  // Mel dB in [floor, 0] maps to roughly [-1, 1] inside the network.
  double norm_shift() const { return log_floor_db / 2.0; }
  double norm_scale() const { return -log_floor_db / 2.0; }
};

struct Latent {
  Mat values;  // (C x T_lat)
  int downsample = 1;
};

struct VaeParams {
  VaeConfig config;
  nn::ParamStore store;
};

inline void validate_vae_config(const VaeConfig& c) {
  require_config(c.n_mels >= 1 && c.downsample >= 1 && c.latent_channels >= 1 &&
                     c.hidden >= 1,
                 "vae: sizes must be positive");
  if (c.identity) {
    require_config(c.downsample == 1 && c.latent_channels == c.n_mels,
                   "vae: identity mode requires downsample 1 and C == n_mels");
  }
}

inline VaeParams make_vae(const VaeConfig& config, std::uint64_t seed) {
  validate_vae_config(config);
  VaeParams p;
  p.config = config;
  if (config.identity) return p;
  const int patch = config.n_mels * config.downsample;
  Rng rng = Rng::stream(seed, "vae.init");
  nn::init_xavier(p.store.add("enc.w1", config.hidden, patch), rng);
  p.store.add("enc.b1", 1, config.hidden);
  nn::init_xavier(p.store.add("enc.w2", 2 * config.latent_channels, config.hidden), rng);
  p.store.add("enc.b2", 1, 2 * config.latent_channels);
  nn::init_xavier(p.store.add("dec.w1", config.hidden, config.latent_channels), rng);
  p.store.add("dec.b1", 1, config.hidden);
  nn::init_xavier(p.store.add("dec.w2", patch, config.hidden), rng);
  p.store.add("dec.b2", 1, patch);
  return p;
}

inline int latent_frames(int t_mel, int downsample) {
  return (t_mel + downsample - 1) / downsample;
}

namespace detail {

// (n_mels x T_mel) dB -> (T_lat x n_mels*ds) normalized patch rows, tail
// padded with the normalized floor (-1).
inline Mat mel_to_patches(const Mat& values, const VaeConfig& c) {
  const int t_mel = static_cast<int>(values.cols());
  const int t_lat = latent_frames(t_mel, c.downsample);
  Mat patches = Mat::Constant(t_lat, c.n_mels * c.downsample, -1.0);
  for (int p = 0; p < t_lat; ++p)
    for (int j = 0; j < c.downsample; ++j) {
      const int col = p * c.downsample + j;
      if (col >= t_mel) break;
      patches.row(p).segment(static_cast<Eigen::Index>(j) * c.n_mels, c.n_mels) =
          ((values.col(col).array() - c.norm_shift()) / c.norm_scale()).transpose();
    }
  return patches;
}

// Inverse of mel_to_patches without denormalization.
inline Mat patches_to_mel_normalized(const Mat& patches, const VaeConfig& c) {
  const int t_lat = static_cast<int>(patches.rows());
  Mat values(c.n_mels, static_cast<Eigen::Index>(t_lat) * c.downsample);
  for (int p = 0; p < t_lat; ++p)
    for (int j = 0; j < c.downsample; ++j)
      values.col(static_cast<Eigen::Index>(p) * c.downsample + j) =
          patches.row(p).segment(static_cast<Eigen::Index>(j) * c.n_mels, c.n_mels)
              .transpose();
  return values;
}

struct VaeEncCache {
  Mat patches;
  nn::LinearCache l1, l2;
  nn::SiluCache s1;
};

// Returns (T_lat x 2C): mean columns then logvar columns.
inline Mat encode_core(const Mat& mel_values, const VaeParams& p, VaeEncCache* cache) {
  const VaeConfig& c = p.config;
  const Mat patches = mel_to_patches(mel_values, c);
  nn::LinearCache l1, l2;
  nn::SiluCache s1;
  const Mat h1 = nn::silu_fwd(
      nn::linear_fwd(patches, p.store.at("enc.w1"), &p.store.at("enc.b1"), &l1), &s1);
  const Mat mv = nn::linear_fwd(h1, p.store.at("enc.w2"), &p.store.at("enc.b2"), &l2);
  if (cache) {
    cache->patches = patches;
    cache->l1 = std::move(l1);
    cache->l2 = std::move(l2);
    cache->s1 = std::move(s1);
  }
  return mv;
}

struct VaeDecCache {
  nn::LinearCache l1, l2;
  nn::SiluCache s1;
};

// z rows are latent frames; returns normalized patch rows (pre-floor).
inline Mat decode_core(const Mat& z_rows, const VaeParams& p, VaeDecCache* cache) {
  nn::LinearCache l1, l2;
  nn::SiluCache s1;
  const Mat h2 = nn::silu_fwd(
      nn::linear_fwd(z_rows, p.store.at("dec.w1"), &p.store.at("dec.b1"), &l1), &s1);
  const Mat patches = nn::linear_fwd(h2, p.store.at("dec.w2"), &p.store.at("dec.b2"), &l2);
  if (cache) {
    cache->l1 = std::move(l1);
    cache->l2 = std::move(l2);
    cache->s1 = std::move(s1);
  }
  return patches;
}

}  // namespace detail

inline std::pair<Latent, Latent> vae_encode(const MelSpectrogram& mel, const VaeParams& p) {
  const VaeConfig& c = p.config;
  require(static_cast<int>(mel.values.rows()) == c.n_mels,
          "vae_encode: mel band count does not match the VAE configuration");
  Latent mean, logvar;
  mean.downsample = logvar.downsample = c.downsample;
  if (c.identity) {
    mean.values = mel.values;
    logvar.values = Mat::Constant(mel.values.rows(), mel.values.cols(), kLogVarNegInf);
    return {mean, logvar};
  }
  const Mat mv = detail::encode_core(mel.values, p, nullptr);
  mean.values = mv.leftCols(c.latent_channels).transpose();
  logvar.values = mv.rightCols(c.latent_channels).transpose();
  return {mean, logvar};
}

// Reparameterized draw: mean + exp(logvar/2) .* eps.
inline Latent vae_sample(const Latent& mean, const Latent& logvar, std::uint64_t seed) {
  require(mean.values.rows() == logvar.values.rows() &&
              mean.values.cols() == logvar.values.cols(),
          "vae_sample: mean/logvar shape mismatch");
  Rng rng = Rng::stream(seed, "vae.sample");
  Latent z;
  z.downsample = mean.downsample;
  z.values = mean.values;
  for (Eigen::Index c = 0; c < z.values.cols(); ++c)
    for (Eigen::Index r = 0; r < z.values.rows(); ++r)
      z.values(r, c) += std::exp(0.5 * logvar.values(r, c)) * rng.normal();
  return z;
}

inline MelSpectrogram vae_decode(const Latent& z, const VaeParams& p,
                                 const MelParams& mel_params) {
  const VaeConfig& c = p.config;
  require(static_cast<int>(z.values.rows()) == c.latent_channels,
          "vae_decode: latent channel count mismatch");
  MelSpectrogram out;
  out.params = mel_params;
  if (c.identity) {
    out.values = z.values.cwiseMax(c.log_floor_db);
    return out;
  }
  const Mat patches = detail::decode_core(z.values.transpose(), p, nullptr);
  const Mat normalized = detail::patches_to_mel_normalized(patches, c);
  out.values =
      (normalized.array() * c.norm_scale() + c.norm_shift()).cwiseMax(c.log_floor_db);
  return out;
}

// ELBO-style loss: mean squared reconstruction error (normalized space,
// pre-floor) + beta_kl * sum of the per-coordinate closed-form KL
// 0.5*(exp(lv) + mu^2 - 1 - lv). Gradients accumulate into p.store.
inline double vae_loss(const MelSpectrogram& mel, VaeParams& p, double beta_kl,
                       std::uint64_t seed, bool accumulate_grads = true) {
  const VaeConfig& c = p.config;
  require(!c.identity, "vae_loss: identity VAE has no trainable parameters");
  require(beta_kl >= 0.0, "vae_loss: beta_kl must be >= 0");

  detail::VaeEncCache enc;
  const Mat mv = detail::encode_core(mel.values, p, &enc);
  const Eigen::Index t_lat = mv.rows();
  const int C = c.latent_channels;
  const Mat mean = mv.leftCols(C);
  const Mat logvar = mv.rightCols(C);

  Rng rng = Rng::stream(seed, "vae.loss");
  Mat eps(t_lat, C);
  for (Eigen::Index r = 0; r < t_lat; ++r)
    for (Eigen::Index k = 0; k < C; ++k) eps(r, k) = rng.normal();
  const Mat std_dev = (0.5 * logvar).array().exp();
  const Mat z = mean + std_dev.cwiseProduct(eps);

  detail::VaeDecCache dec;
  const Mat recon = detail::decode_core(z, p, &dec);
  const Mat diff = recon - enc.patches;
  const double n_recon = static_cast<double>(diff.size());
  const double recon_mse = diff.squaredNorm() / n_recon;
  const double kl =
      0.5 * (logvar.array().exp() + mean.array().square() - 1.0 - logvar.array()).sum();
  const double loss = recon_mse + beta_kl * kl;

  if (accumulate_grads) {
    // Decoder path.
    const Mat drecon = (2.0 / n_recon) * diff;
    Mat dh2 = Mat::Zero(t_lat, c.hidden);
    nn::linear_bwd(drecon, dec.l2, p.store.at("dec.w2"), p.store.grad("dec.w2"),
                   &p.store.grad("dec.b2"), &dh2);
    const Mat dh2_pre = nn::silu_bwd(dh2, dec.s1);
    Mat dz = Mat::Zero(t_lat, C);
    nn::linear_bwd(dh2_pre, dec.l1, p.store.at("dec.w1"), p.store.grad("dec.w1"),
                   &p.store.grad("dec.b1"), &dz);
    // Reparameterization + KL into (mean, logvar).
    Mat dmv(t_lat, 2 * C);
    dmv.leftCols(C) = dz + beta_kl * mean;
    dmv.rightCols(C) = 0.5 * dz.cwiseProduct(std_dev).cwiseProduct(eps) +
                       (0.5 * beta_kl) * (logvar.array().exp() - 1.0).matrix();
    // Encoder path.
    Mat dh1 = Mat::Zero(t_lat, c.hidden);
    nn::linear_bwd(dmv, enc.l2, p.store.at("enc.w2"), p.store.grad("enc.w2"),
                   &p.store.grad("enc.b2"), &dh1);
    const Mat dh1_pre = nn::silu_bwd(dh1, enc.s1);
    nn::linear_bwd(dh1_pre, enc.l1, p.store.at("enc.w1"), p.store.grad("enc.w1"),
                   &p.store.grad("enc.b1"), nullptr);
  }
  return loss;
}

struct VaeTrainConfig {
  int steps = 500;
  double lr = 1e-3;
  double beta_kl = 1e-3;
  std::uint64_t seed = 0;
};

// Plain Adam loop over per-step random clips; returns the loss curve.
inline std::vector<double> train_vae(VaeParams& p, const std::vector<MelSpectrogram>& mels,
                                     const VaeTrainConfig& cfg) {
  require(!mels.empty(), "train_vae: empty training set");
  nn::AdamState adam;
  nn::AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  std::vector<double> losses;
  Rng pick = Rng::stream(cfg.seed, "vae.train.pick");
  for (int step = 0; step < cfg.steps; ++step) {
    const int idx = pick.uniform_int(0, static_cast<int>(mels.size()) - 1);
    p.store.zero_grads();
    const double loss =
        vae_loss(mels[static_cast<std::size_t>(idx)], p, cfg.beta_kl,
                 derive_seed(cfg.seed, "vae.step", static_cast<std::uint64_t>(step)));
    if (!std::isfinite(loss))
      throw NumericalError("vae training diverged at step " + std::to_string(step));
    adam_step(p.store, adam, adam_cfg);
    losses.push_back(loss);
  }
  return losses;
}

}  // namespace vta
