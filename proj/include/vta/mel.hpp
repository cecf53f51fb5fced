#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "vta/common.hpp"
#include "vta/dsp.hpp"

namespace vta {

// ---------------------------------------------------------------------------
// Mel-spectrogram analysis and waveform reconstruction. Values are
// log-amplitude dB (20*log10 of the mel-filtered magnitude STFT), floored at
// log_floor_db. Reconstruction inverts the filterbank with a pseudo-inverse
// and estimates phase iteratively.

struct MelParams {
  int sample_rate_hz = 16000;
  int n_fft = 512;
  int hop = 128;
  int n_mels = 64;
  double fmin_hz = 0.0;
  double fmax_hz = 8000.0;
  double log_floor_db = -80.0;

  bool operator==(const MelParams&) const = default;
};

struct MelSpectrogram {
  Mat values;  // (n_mels x T_mel), dB
  MelParams params;
};

inline void validate_mel_params(const MelParams& p) {
  require_config(p.sample_rate_hz > 0, "mel: sample rate must be positive");
  require_config(p.n_fft >= 2, "mel: n_fft must be >= 2");
  require_config(p.hop >= 1 && p.hop <= p.n_fft, "mel: hop must satisfy 1 <= hop <= n_fft");
  require_config(p.n_mels >= 1, "mel: n_mels must be >= 1");
  require_config(p.fmin_hz >= 0 && p.fmin_hz < p.fmax_hz &&
                     p.fmax_hz <= p.sample_rate_hz / 2.0,
                 "mel: need 0 <= fmin < fmax <= sample_rate/2");
  require_config(p.log_floor_db < 0, "mel: log floor must be negative");
}

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular filters, (n_mels x n_bins). Band k peaks at the k-th interior
// mel point.
inline Mat mel_filterbank(const MelParams& p) {
  const int n_bins = p.n_fft / 2 + 1;
  std::vector<double> mel_pts(static_cast<std::size_t>(p.n_mels) + 2);
  const double m_lo = hz_to_mel(p.fmin_hz), m_hi = hz_to_mel(p.fmax_hz);
  for (int i = 0; i < p.n_mels + 2; ++i)
    mel_pts[static_cast<std::size_t>(i)] =
        mel_to_hz(m_lo + (m_hi - m_lo) * i / (p.n_mels + 1));
  Mat fb = Mat::Zero(p.n_mels, n_bins);
  for (int k = 0; k < p.n_mels; ++k) {
    const double f_l = mel_pts[static_cast<std::size_t>(k)];
    const double f_c = mel_pts[static_cast<std::size_t>(k) + 1];
    const double f_r = mel_pts[static_cast<std::size_t>(k) + 2];
    for (int b = 0; b < n_bins; ++b) {
      const double f = static_cast<double>(b) * p.sample_rate_hz / p.n_fft;
      if (f > f_l && f < f_c)
        fb(k, b) = (f - f_l) / (f_c - f_l);
      else if (f >= f_c && f < f_r)
        fb(k, b) = (f_r - f) / (f_r - f_c);
    }
  }
  return fb;
}

// Center frequency of band k (useful for oracle-style checks).
inline double mel_band_center_hz(const MelParams& p, int k) {
  const double m_lo = hz_to_mel(p.fmin_hz), m_hi = hz_to_mel(p.fmax_hz);
  return mel_to_hz(m_lo + (m_hi - m_lo) * (k + 1) / (p.n_mels + 1));
}

inline MelSpectrogram compute_mel(const std::vector<double>& wave, const MelParams& p) {
  validate_mel_params(p);
  if (wave.size() < static_cast<std::size_t>(p.n_fft))
    throw DataError("compute_mel: waveform shorter than one analysis frame");
  const Eigen::MatrixXcd spec = dsp::stft(wave, p.n_fft, p.hop);
  const Mat mag = spec.cwiseAbs();
  const Mat mel = mel_filterbank(p) * mag;
  MelSpectrogram out;
  out.params = p;
  out.values = mel.unaryExpr([&](double v) {
    const double db = 20.0 * std::log10(v);  // log10(0) == -inf, floored below
    return std::max(db, p.log_floor_db);
  });
  return out;
}

// Mel dB -> linear magnitude spectrogram via the filterbank pseudo-inverse,
// clamped at zero. The floor maps to exactly zero magnitude, so silence
// inverts to silence.
inline Mat mel_to_linear_magnitude(const MelSpectrogram& mel) {
  const Mat fb = mel_filterbank(mel.params);
  const Mat pinv = Eigen::CompleteOrthogonalDecomposition<Mat>(fb).pseudoInverse();
  const double floor_mag = std::pow(10.0, mel.params.log_floor_db / 20.0);
  const Mat melmag = mel.values.unaryExpr([floor_mag](double db) {
    return std::max(std::pow(10.0, db / 20.0) - floor_mag, 0.0);
  });
  return (pinv * melmag).cwiseMax(0.0);
}

// Griffin-Lim style phase reconstruction with a zero initial phase (keeps the
// whole path deterministic). Output length is (T_mel-1)*hop + n_fft.
inline std::vector<double> reconstruct_waveform(const MelSpectrogram& mel, int n_iters) {
  require(n_iters >= 1, "reconstruct_waveform: n_iters must be >= 1");
  const MelParams& p = mel.params;
  const Mat target = mel_to_linear_magnitude(mel);
  Eigen::MatrixXcd spec = target.cast<std::complex<double>>();
  std::vector<double> y;
  for (int it = 0; it < n_iters; ++it) {
    y = dsp::istft(spec, p.n_fft, p.hop);
    Eigen::MatrixXcd est = dsp::stft(y, p.n_fft, p.hop);
    if (est.cols() != spec.cols()) est.conservativeResize(Eigen::NoChange, spec.cols());
    for (Eigen::Index c = 0; c < spec.cols(); ++c)
      for (Eigen::Index r = 0; r < spec.rows(); ++r) {
        const std::complex<double> e = est(r, c);
        const double m = std::abs(e);
        spec(r, c) = m > 1e-12 ? target(r, c) * (e / m)
                               : std::complex<double>(target(r, c), 0.0);
      }
  }
  return dsp::istft(spec, p.n_fft, p.hop);
}

// Relative Frobenius mismatch between |STFT(y)| and the linear magnitude the
// reconstruction targeted; used to check that iterating refines the estimate.
inline double spectral_convergence_error(const std::vector<double>& y,
                                         const MelSpectrogram& mel) {
  const MelParams& p = mel.params;
  const Mat target = mel_to_linear_magnitude(mel);
  Mat mag = dsp::stft(y, p.n_fft, p.hop).cwiseAbs();
  if (mag.cols() > target.cols()) mag.conservativeResize(Eigen::NoChange, target.cols());
  const double denom = target.norm();
  return denom > 1e-12 ? (mag - target).norm() / denom : mag.norm();
}

}  // namespace vta
