#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "vta/common.hpp"
#include "vta/denoiser.hpp"
#include "vta/nn.hpp"
#include "vta/rng.hpp"
#include "vta/schedule.hpp"

namespace vta {

// ---------------------------------------------------------------------------
// Training objective, classifier-free guidance and ancestral sampling on the
// latent sequence. All randomness is addressed by (seed, tag, index) streams,
// so results are independent of evaluation order.

struct GuidanceConfig {
  double alpha = 3.0;  // guided = alpha * cond + (1 - alpha) * uncond
};

// Exact affine combination of the conditional and unconditional predictions.
inline Mat cfg_combine(const Mat& eps_cond, const Mat& eps_uncond, double alpha) {
  require(eps_cond.rows() == eps_uncond.rows() && eps_cond.cols() == eps_uncond.cols(),
          "cfg_combine: shape mismatch");
  require(std::isfinite(alpha), "cfg_combine: alpha must be finite");
  return alpha * eps_cond + (1.0 - alpha) * eps_uncond;
}

struct TrainingExample {
  Mat z0;  // (T_lat x C)
  ConditionerSet cond;
};

// The per-sample draw used by the training objective: diffusion step, noise,
// and the condition-dropout decision. Exposed so tests can reproduce the
// exact draw a stub predictor needs to echo.
struct TrainingDraw {
  int t = 0;
  Mat eps;
  bool dropped = false;
};

inline TrainingDraw make_training_draw(std::uint64_t seed, int sample_index, int steps,
                                       Eigen::Index rows, Eigen::Index cols,
                                       double dropout_p) {
  Rng rng = Rng::stream(seed, "loss.draw", static_cast<std::uint64_t>(sample_index));
  TrainingDraw d;
  d.t = rng.uniform_int(0, steps - 1);
  d.dropped = rng.uniform() < dropout_p;
  d.eps = Mat(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) d.eps(r, c) = rng.normal();
  return d;
}

// Noise predictor interface for the objective/sampler cores; the extra index
// identifies the batch element so stubs can reproduce its draw.
using BatchDenoiseFn =
    std::function<Mat(const Mat& z_t, int t, const ConditionerSet& cond, int sample_index)>;

// Mean over the batch of the per-sample mean squared error between the drawn
// noise and the prediction. With probability dropout_p a sample's
// conditioners are replaced by the learned null set (the all-absent set).
inline double training_loss_core(const std::vector<TrainingExample>& batch,
                                 const BatchDenoiseFn& predict, const NoiseSchedule& schedule,
                                 double dropout_p, std::uint64_t seed) {
  require(!batch.empty(), "training_loss: empty batch");
  require(dropout_p >= 0.0 && dropout_p < 1.0, "training_loss: dropout_p in [0,1)");
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const TrainingExample& ex = batch[i];
    const TrainingDraw draw = make_training_draw(seed, static_cast<int>(i), schedule.steps,
                                                 ex.z0.rows(), ex.z0.cols(), dropout_p);
    const Mat z_t = q_sample(ex.z0, draw.t, draw.eps, schedule);
    const ConditionerSet& cond = draw.dropped ? ConditionerSet{} : ex.cond;
    const Mat eps_hat = predict(z_t, draw.t, cond, static_cast<int>(i));
    loss += (eps_hat - draw.eps).squaredNorm() / static_cast<double>(draw.eps.size());
  }
  return loss / static_cast<double>(batch.size());
}

// Same objective against the real denoiser, accumulating parameter
// gradients. Per-sample contexts are dropped right after use.
inline double training_loss(const std::vector<TrainingExample>& batch, DenoiserParams& params,
                            const NoiseSchedule& schedule, FusionMode mode, double dropout_p,
                            std::uint64_t seed, bool accumulate_grads = true) {
  require(!batch.empty(), "training_loss: empty batch");
  require(dropout_p >= 0.0 && dropout_p < 1.0, "training_loss: dropout_p in [0,1)");
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const TrainingExample& ex = batch[i];
    const TrainingDraw draw = make_training_draw(seed, static_cast<int>(i), schedule.steps,
                                                 ex.z0.rows(), ex.z0.cols(), dropout_p);
    const Mat z_t = q_sample(ex.z0, draw.t, draw.eps, schedule);
    const ConditionerSet& cond = draw.dropped ? ConditionerSet{} : ex.cond;
    DenoiserCtx ctx;
    const Mat eps_hat = denoiser_forward(z_t, draw.t, cond, mode, params, &ctx);
    const Mat diff = eps_hat - draw.eps;
    loss += diff.squaredNorm() / static_cast<double>(diff.size());
    if (accumulate_grads) {
      const Mat d_eps = diff * (2.0 * inv_batch / static_cast<double>(diff.size()));
      denoiser_backward(d_eps, ctx, params);
    }
  }
  return loss * inv_batch;
}

using DenoiseFn = std::function<Mat(const Mat& z_t, int t, const ConditionerSet& cond)>;

// Ancestral DDPM sampler with classifier-free guidance. Starts from seeded
// standard normal noise; each step forms the posterior mean from the guided
// prediction and adds posterior-variance noise except at t = 0.
inline Mat sample_core(const ConditionerSet& cond, const DenoiseFn& predict,
                       const NoiseSchedule& s, const GuidanceConfig& guidance, int rows,
                       int cols, std::uint64_t seed) {
  require(rows >= 1 && cols >= 1, "sample: empty latent shape");
  Rng rng = Rng::stream(seed, "sample");
  Mat z(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) z(r, c) = rng.normal();

  const ConditionerSet uncond{};
  for (int t = s.steps - 1; t >= 0; --t) {
    const Mat eps_cond = predict(z, t, cond);
    const Mat eps_guided =
        guidance.alpha == 1.0 ? eps_cond
                              : cfg_combine(eps_cond, predict(z, t, uncond), guidance.alpha);
    const double ab = s.alpha_bar[t];
    z = (z - (s.beta[t] / std::sqrt(1.0 - ab)) * eps_guided) / std::sqrt(s.alpha[t]);
    if (t > 0) {
      const double ab_prev = s.alpha_bar[t - 1];
      const double sigma2 = (1.0 - ab_prev) / (1.0 - ab) * s.beta[t];
      const double sigma = std::sqrt(sigma2);
      for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) z(r, c) += sigma * rng.normal();
    }
    if (!z.allFinite())
      throw NumericalError("sampling produced non-finite values at step " +
                           std::to_string(t));
  }
  return z;
}

inline Mat sample(const ConditionerSet& cond, const DenoiserParams& params,
                  const NoiseSchedule& schedule, const GuidanceConfig& guidance,
                  FusionMode mode, int t_lat, std::uint64_t seed) {
  return sample_core(
      cond,
      [&](const Mat& z, int t, const ConditionerSet& c) {
        return denoiser_forward(z, t, c, mode, params);
      },
      schedule, guidance, t_lat, params.config.latent_channels, seed);
}

// ---------------------------------------------------------------------------
// Training loop: Adam over the Eq.-style objective with condition dropout.

struct TrainConfig {
  int steps = 2000;
  int batch = 4;
  double lr = 2e-4;
  double dropout_p = 0.1;
  std::uint64_t seed = 0;
};

struct TrainLogRow {
  int step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

inline std::vector<TrainLogRow> train_denoiser(DenoiserParams& params,
                                               const std::vector<TrainingExample>& data,
                                               const NoiseSchedule& schedule, FusionMode mode,
                                               const TrainConfig& cfg) {
  require(!data.empty(), "train: empty dataset");
  require(cfg.steps >= 1 && cfg.batch >= 1, "train: steps and batch must be positive");
  nn::AdamState adam;
  nn::AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  std::vector<TrainLogRow> log;
  log.reserve(static_cast<std::size_t>(cfg.steps));
  Rng pick = Rng::stream(cfg.seed, "train.pick");
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<TrainingExample> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch));
    for (int i = 0; i < cfg.batch; ++i)
      batch.push_back(data[static_cast<std::size_t>(
          pick.uniform_int(0, static_cast<int>(data.size()) - 1))]);
    params.store.zero_grads();
    const double loss =
        training_loss(batch, params, schedule, mode, cfg.dropout_p,
                      derive_seed(cfg.seed, "train.step", static_cast<std::uint64_t>(step)));
    if (!std::isfinite(loss))
      throw NumericalError("training diverged at step " + std::to_string(step));
    nn::adam_step(params.store, adam, adam_cfg);
    log.push_back({step, loss, adam_cfg.lr});
  }
  return log;
}

}  // namespace vta
