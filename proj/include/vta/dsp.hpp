#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "vta/common.hpp"

namespace vta::dsp {

using cplx = std::complex<double>;

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey; falls back to the O(n^2) transform for
// non-power-of-two sizes (desk-scale configs use powers of two).
inline void fft_inplace(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  if (!is_power_of_two(static_cast<int>(n))) {
    std::vector<cplx> out(n, cplx(0.0, 0.0));
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j) {
        const double ang = sign * 2.0 * M_PI * static_cast<double>(k * j % n) /
                           static_cast<double>(n);
        out[k] += a[j] * cplx(std::cos(ang), std::sin(ang));
      }
    a = std::move(out);
  } else {
    for (std::size_t i = 1, j = 0; i < n; ++i) {
      std::size_t bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
      const cplx wlen(std::cos(ang), std::sin(ang));
      for (std::size_t i = 0; i < n; i += len) {
        cplx w(1.0, 0.0);
        for (std::size_t k = 0; k < len / 2; ++k) {
          const cplx u = a[i + k];
          const cplx v = a[i + k + len / 2] * w;
          a[i + k] = u + v;
          a[i + k + len / 2] = u - v;
          w *= wlen;
        }
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

// Periodic Hann window.
inline std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    w[static_cast<std::size_t>(i)] =
        0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / n);
  return w;
}

// Non-centered STFT: frame f covers samples [f*hop, f*hop + n_fft).
// Result is (n_fft/2 + 1) x T, one column per frame.
inline Eigen::MatrixXcd stft(const std::vector<double>& x, int n_fft, int hop) {
  require(n_fft >= 2 && hop >= 1 && hop <= n_fft, "stft: bad frame parameters");
  require(x.size() >= static_cast<std::size_t>(n_fft), "stft: signal shorter than n_fft");
  const int n_frames = 1 + static_cast<int>((x.size() - static_cast<std::size_t>(n_fft)) /
                                            static_cast<std::size_t>(hop));
  const int n_bins = n_fft / 2 + 1;
  const std::vector<double> win = hann_window(n_fft);
  Eigen::MatrixXcd out(n_bins, n_frames);
  std::vector<cplx> buf(static_cast<std::size_t>(n_fft));
  for (int f = 0; f < n_frames; ++f) {
    const std::size_t off = static_cast<std::size_t>(f) * static_cast<std::size_t>(hop);
    for (int i = 0; i < n_fft; ++i)
      buf[static_cast<std::size_t>(i)] =
          cplx(x[off + static_cast<std::size_t>(i)] * win[static_cast<std::size_t>(i)], 0.0);
    fft_inplace(buf, false);
    for (int b = 0; b < n_bins; ++b) out(b, f) = buf[static_cast<std::size_t>(b)];
  }
  return out;
}

// Weighted overlap-add inverse with the same analysis window; output length
// is (T-1)*hop + n_fft.
inline std::vector<double> istft(const Eigen::MatrixXcd& spec, int n_fft, int hop) {
  const int n_bins = n_fft / 2 + 1;
  require(spec.rows() == n_bins, "istft: bin count does not match n_fft");
  const int n_frames = static_cast<int>(spec.cols());
  const std::size_t out_len =
      static_cast<std::size_t>(n_frames - 1) * static_cast<std::size_t>(hop) +
      static_cast<std::size_t>(n_fft);
  const std::vector<double> win = hann_window(n_fft);
  std::vector<double> y(out_len, 0.0), wsum(out_len, 0.0);
  std::vector<cplx> buf(static_cast<std::size_t>(n_fft));
  for (int f = 0; f < n_frames; ++f) {
    for (int b = 0; b < n_bins; ++b) buf[static_cast<std::size_t>(b)] = spec(b, f);
    for (int b = n_bins; b < n_fft; ++b)
      buf[static_cast<std::size_t>(b)] = std::conj(spec(n_fft - b, f));
    fft_inplace(buf, true);
    const std::size_t off = static_cast<std::size_t>(f) * static_cast<std::size_t>(hop);
    for (int i = 0; i < n_fft; ++i) {
      const double w = win[static_cast<std::size_t>(i)];
      y[off + static_cast<std::size_t>(i)] += w * buf[static_cast<std::size_t>(i)].real();
      wsum[off + static_cast<std::size_t>(i)] += w * w;
    }
  }
  for (std::size_t i = 0; i < out_len; ++i) y[i] /= std::max(wsum[i], 1e-8);
  return y;
}

}  // namespace vta::dsp
