#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vta/common.hpp"
#include "vta/mel.hpp"
#include "vta/scene.hpp"

namespace vta {

// ---------------------------------------------------------------------------
// Objective evaluation: Frechet distance between embedding distributions,
// KL between class posteriors, and the AV-Align temporal alignment score.

struct EmbeddingSet {
  Mat vectors;  // (N x d)
  std::string source_tag;
};

namespace detail {

// Symmetric PSD square root via eigendecomposition; tiny negative
// eigenvalues from roundoff are clamped to zero.
inline Mat sym_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  if (es.info() != Eigen::Success)
    throw NumericalError("frechet_distance: eigendecomposition failed");
  const Vec evals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * evals.asDiagonal() * es.eigenvectors().transpose();
}

inline std::pair<Vec, Mat> fit_gaussian(const Mat& x) {
  const Eigen::Index n = x.rows(), d = x.cols();
  const Vec mean = x.colwise().mean().transpose();
  Mat centered = x.rowwise() - mean.transpose();
  Mat cov = centered.transpose() * centered / static_cast<double>(n - 1);
  cov += 1e-6 * Mat::Identity(d, d);
  return {mean, cov};
}

}  // namespace detail

// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}), with Gaussians fit by
// sample mean and covariance (1e-6 diagonal regularizer).
inline double frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b) {
  require(a.vectors.rows() >= 2 && b.vectors.rows() >= 2,
          "frechet_distance: need at least 2 vectors per set");
  require(a.vectors.cols() == b.vectors.cols(), "frechet_distance: dimension mismatch");
  const auto [mu1, s1] = detail::fit_gaussian(a.vectors);
  const auto [mu2, s2] = detail::fit_gaussian(b.vectors);
  const Mat root_s1 = detail::sym_sqrt(s1);
  const Mat cross = detail::sym_sqrt(root_s1 * s2 * root_s1);
  const double fd =
      (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * cross.trace();
  if (!std::isfinite(fd))
    throw NumericalError("frechet_distance: degenerate covariance");
  return std::max(fd, 0.0);
}

struct ClassPosterior {
  Vec probs;  // nonnegative, sums to 1
};

// Mean over pairs of sum_k ref_k * log(ref_k / gen_k). Probabilities are
// floored at 1e-10 inside the log; a zero reference weight contributes
// nothing.
inline double kl_metric(
    const std::vector<std::pair<ClassPosterior, ClassPosterior>>& gen_ref_pairs) {
  require(!gen_ref_pairs.empty(), "kl_metric: empty pair list");
  constexpr double kFloor = 1e-10;
  double total = 0.0;
  for (const auto& [gen, ref] : gen_ref_pairs) {
    require(gen.probs.size() == ref.probs.size(), "kl_metric: posterior length mismatch");
    double kl = 0.0;
    for (Eigen::Index k = 0; k < ref.probs.size(); ++k) {
      const double r = ref.probs[k];
      if (r <= 0.0) continue;
      kl += r * std::log(std::max(r, kFloor) / std::max(gen.probs[k], kFloor));
    }
    total += kl;
  }
  return total / static_cast<double>(gen_ref_pairs.size());
}

// ---------------------------------------------------------------------------
// Template classifier over the four sound primitives. Each class keeps a
// small bank of templates (the primitive rendered at a grid of base
// frequencies); a clip's band-smoothed mean spectrum is scored by its best
// cosine correlation within each bank, softmaxed into a posterior.

struct AudioClassifierParams {
  MelParams mel;
  double softmax_scale = 8.0;
  std::vector<Mat> class_templates;  // one (grid x n_mels) bank per class, unit rows
};

namespace detail {

// Triangular smoothing across neighboring mel bands; tolerates the gap
// between template grid frequencies.
inline Vec smooth_bands(const Vec& x) {
  static const double kKernel[5] = {0.25, 0.5, 1.0, 0.5, 0.25};
  const Eigen::Index n = x.size();
  Vec out = Vec::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0, wsum = 0.0;
    for (int k = -2; k <= 2; ++k) {
      const Eigen::Index j = i + k;
      if (j < 0 || j >= n) continue;
      acc += kKernel[k + 2] * x[j];
      wsum += kKernel[k + 2];
    }
    out[i] = acc / wsum;
  }
  return out;
}

// Band-smoothed mean linear-mel spectrum with the floor level removed, so
// silence maps to the exact zero feature.
inline Vec spectral_feature(const std::vector<double>& wave, const MelParams& p) {
  const MelSpectrogram mel = compute_mel(wave, p);
  const double floor_mag = std::pow(10.0, p.log_floor_db / 20.0);
  const Mat linear = mel.values.unaryExpr([floor_mag](double db) {
    return std::max(std::pow(10.0, db / 20.0) - floor_mag, 0.0);
  });
  return smooth_bands(linear.rowwise().mean());
}

}  // namespace detail

inline AudioClassifierParams make_audio_classifier(int sample_rate_hz) {
  AudioClassifierParams params;
  params.mel.sample_rate_hz = sample_rate_hz;
  params.mel.n_fft = 512;
  params.mel.hop = 256;
  params.mel.n_mels = 64;
  params.mel.fmax_hz = sample_rate_hz / 2.0;
  constexpr int kGrid = 9;
  for (int cls = 0; cls < 4; ++cls) {
    const auto& prof = detail::class_profile(static_cast<SoundClass>(cls));
    Mat bank = Mat::Zero(kGrid, params.mel.n_mels);
    for (int i = 0; i < kGrid; ++i) {
      SceneScript script;
      script.duration_s = 2.0;
      script.fps = 10;
      script.sample_rate_hz = sample_rate_hz;
      SceneEvent ev;
      ev.object_label = "template";
      ev.sound_class = static_cast<SoundClass>(cls);
      ev.base_freq_hz =
          prof.freq_lo * std::pow(prof.freq_hi / prof.freq_lo,
                                  static_cast<double>(i) / (kGrid - 1));
      ev.onset_s = 0.0;
      ev.offset_s = script.duration_s;
      script.events.push_back(ev);
      script.caption = "template";
      script.seed = 12345;
      const Vec feat = detail::spectral_feature(render_audio(script), params.mel);
      if (feat.norm() > 1e-12) bank.row(i) = (feat / feat.norm()).transpose();
    }
    params.class_templates.push_back(std::move(bank));
  }
  return params;
}

inline ClassPosterior classify_audio(const std::vector<double>& wave,
                                     const AudioClassifierParams& params) {
  ClassPosterior post;
  const int k = static_cast<int>(params.class_templates.size());
  Vec corr = Vec::Zero(k);
  const Vec feat = detail::spectral_feature(wave, params.mel);
  const double norm = feat.norm();
  if (norm > 1e-12) {
    const Vec unit = feat / norm;
    for (int c = 0; c < k; ++c) {
      double best = 0.0;
      const Mat& bank = params.class_templates[static_cast<std::size_t>(c)];
      for (Eigen::Index r = 0; r < bank.rows(); ++r)
        best = std::max(best, bank.row(r).dot(unit));
      corr[c] = best;
    }
  }
  Vec scaled = params.softmax_scale * corr;
  const double m = scaled.maxCoeff();
  Vec e = (scaled.array() - m).exp();
  post.probs = e / e.sum();
  return post;
}

// ---------------------------------------------------------------------------
// Onset and peak detection for AV-Align.

struct OnsetList {
  std::vector<double> times;  // sorted ascending, seconds
};

struct OnsetParams {
  int frame_len = 256;
  int hop = 128;
  double theta_on = 0.05;   // RMS level that fires an onset
  double theta_off = 0.02;  // level that re-arms the detector
  double refractory_s = 0.05;
};

// Short-time RMS envelope; an onset is an upward crossing of theta_on while
// armed, with hysteresis at theta_off and a refractory gap.
inline OnsetList detect_onsets(const std::vector<double>& wave, int sample_rate_hz,
                               const OnsetParams& p = {}) {
  require(sample_rate_hz > 0, "detect_onsets: bad sample rate");
  require(p.frame_len >= 1 && p.hop >= 1, "detect_onsets: bad frame parameters");
  OnsetList out;
  if (wave.size() < static_cast<std::size_t>(p.frame_len)) return out;
  bool armed = true;
  double last_onset = -1e9;
  for (std::size_t off = 0; off + static_cast<std::size_t>(p.frame_len) <= wave.size();
       off += static_cast<std::size_t>(p.hop)) {
    double energy = 0.0;
    for (int i = 0; i < p.frame_len; ++i) {
      const double s = wave[off + static_cast<std::size_t>(i)];
      energy += s * s;
    }
    const double rms = std::sqrt(energy / p.frame_len);
    const double t =
        (static_cast<double>(off) + 0.5 * p.frame_len) / static_cast<double>(sample_rate_hz);
    if (armed && rms >= p.theta_on) {
      if (t - last_onset >= p.refractory_s) {
        out.times.push_back(t);
        last_onset = t;
      }
      armed = false;
    } else if (!armed && rms < p.theta_off) {
      armed = true;
    }
  }
  return out;
}

struct VideoPeakParams {
  double threshold = 0.5;
};

// Per-step change magnitude ||f_{i+1} - f_i||; local maxima above the
// threshold become peaks at (i + 0.5) / fps.
inline OnsetList detect_video_peaks(const Mat& frames, double fps,
                                    const VideoPeakParams& p = {}) {
  require(frames.rows() >= 2, "detect_video_peaks: need at least 2 frames");
  require(fps > 0, "detect_video_peaks: fps must be positive");
  const Eigen::Index n = frames.rows() - 1;
  Vec change(n);
  for (Eigen::Index i = 0; i < n; ++i)
    change[i] = (frames.row(i + 1) - frames.row(i)).norm();
  OnsetList out;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (change[i] < p.threshold) continue;
    const bool left_ok = i == 0 || change[i] > change[i - 1];
    const bool right_ok = i == n - 1 || change[i] >= change[i + 1];
    if (left_ok && right_ok)
      out.times.push_back((static_cast<double>(i) + 0.5) / fps);
  }
  return out;
}

// Greedy earliest-first one-to-one matching within +/- window_s, scored as
// intersection-over-union of the two event sets. Two empty lists align
// perfectly by convention.
inline double av_align(const OnsetList& audio, const OnsetList& video, double window_s) {
  require(window_s > 0, "av_align: window must be positive");
  const std::size_t na = audio.times.size(), nv = video.times.size();
  if (na == 0 && nv == 0) return 1.0;
  std::vector<bool> used(nv, false);
  std::size_t matches = 0;
  for (double t : audio.times) {
    for (std::size_t j = 0; j < nv; ++j) {
      if (used[j]) continue;
      if (std::abs(video.times[j] - t) <= window_s) {
        used[j] = true;
        ++matches;
        break;
      }
      if (video.times[j] > t + window_s) break;
    }
  }
  return static_cast<double>(matches) / static_cast<double>(na + nv - matches);
}

// ---------------------------------------------------------------------------
// Default audio embedder for the Frechet metric: per-clip mean and standard
// deviation of each mel band (dB), giving a 2*n_mels-dimensional vector.

using AudioEmbedder = std::function<Vec(const std::vector<double>&)>;

inline AudioEmbedder make_mel_stats_embedder(MelParams params) {
  return [params](const std::vector<double>& wave) {
    const MelSpectrogram mel = compute_mel(wave, params);
    const Eigen::Index n = mel.values.rows();
    Vec out(2 * n);
    for (Eigen::Index b = 0; b < n; ++b) {
      const double mean = mel.values.row(b).mean();
      const double var =
          (mel.values.row(b).array() - mean).square().sum() /
          std::max<double>(1.0, static_cast<double>(mel.values.cols() - 1));
      out[b] = mean;
      out[n + b] = std::sqrt(var);
    }
    return out;
  };
}

}  // namespace vta
