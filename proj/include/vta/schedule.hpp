#pragma once

#include <cmath>

#include "vta/common.hpp"

namespace vta {

// ---------------------------------------------------------------------------
// DDPM noise schedule: beta_t linearly spaced, alpha_t = 1 - beta_t,
// alpha_bar_t the running product. The forward chain has the closed form
// z_t = sqrt(alpha_bar_t) z_0 + sqrt(1 - alpha_bar_t) eps.

struct NoiseSchedule {
  int steps = 0;
  Vec beta;
  Vec alpha;
  Vec alpha_bar;
};

inline NoiseSchedule make_schedule(int steps, double beta_start, double beta_end) {
  require_config(steps >= 1, "schedule: need at least one step");
  require_config(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
                 "schedule: need 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.steps = steps;
  s.beta = Vec(steps);
  s.alpha = Vec(steps);
  s.alpha_bar = Vec(steps);
  double prod = 1.0;
  for (int t = 0; t < steps; ++t) {
    const double beta =
        steps == 1 ? beta_start
                   : beta_start + (beta_end - beta_start) * t / static_cast<double>(steps - 1);
    s.beta[t] = beta;
    s.alpha[t] = 1.0 - beta;
    prod *= s.alpha[t];
    s.alpha_bar[t] = prod;
  }
  return s;
}

inline Mat q_sample(const Mat& z0, int t, const Mat& eps, const NoiseSchedule& s) {
  require(t >= 0 && t < s.steps, "q_sample: step index out of range");
  require(z0.rows() == eps.rows() && z0.cols() == eps.cols(),
          "q_sample: z0/eps shape mismatch");
  const double ab = s.alpha_bar[t];
  return std::sqrt(ab) * z0 + std::sqrt(1.0 - ab) * eps;
}

}  // namespace vta
