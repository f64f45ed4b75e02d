#pragma once

// Numeric kernels: Butterworth low-pass design/application, framing, center
// clipping and short-time autocorrelation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vaclass/audio_io.hpp"
#include "vaclass/error.hpp"

namespace vaclass {

/// Transfer function b(z^-1)/a(z^-1) with a[0] = 1.
struct FilterCoefficients {
  std::vector<double> b;
  std::vector<double> a;
  int order = 0;
  double cutoff_hz = 0.0;
  double sample_rate_hz = 0.0;
  /// Digital poles produced by the design (z-plane).
  std::vector<std::complex<double>> poles;
};

namespace detail {

// Expands prod_k (1 - r_k z^-1) into coefficients of z^-0 .. z^-n.
inline std::vector<std::complex<double>> poly_from_roots(std::span<const std::complex<double>> roots) {
  std::vector<std::complex<double>> c{1.0};
  for (const auto& r : roots) {
    c.push_back(0.0);
    for (std::size_t i = c.size() - 1; i > 0; --i) c[i] -= r * c[i - 1];
  }
  return c;
}

}  // namespace detail

/// Designs an order-N Butterworth low-pass: analog prototype poles on the
/// left-half unit circle, frequency prewarping, bilinear transform, then
/// scaling for unit DC gain.
inline FilterCoefficients design_butterworth_lowpass(int order, double cutoff_hz, double sample_rate_hz) {
  if (order < 1) throw std::invalid_argument("filter order must be >= 1");
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("sample rate must be positive");
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < sample_rate_hz / 2.0))
    throw std::invalid_argument("cutoff " + std::to_string(cutoff_hz) +
                                " Hz must lie strictly between 0 and Nyquist (" +
                                std::to_string(sample_rate_hz / 2.0) + " Hz)");

  const double fs2 = 2.0 * sample_rate_hz;
  const double warped = fs2 * std::tan(std::numbers::pi * cutoff_hz / sample_rate_hz);

  FilterCoefficients f;
  f.order = order;
  f.cutoff_hz = cutoff_hz;
  f.sample_rate_hz = sample_rate_hz;
  f.poles.reserve(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
    const std::complex<double> s = warped * std::polar(1.0, theta);
    f.poles.push_back((fs2 + s) / (fs2 - s));
  }

  const auto a = detail::poly_from_roots(f.poles);
  const std::vector<std::complex<double>> zeros(static_cast<std::size_t>(order), {-1.0, 0.0});
  const auto b = detail::poly_from_roots(zeros);

  std::complex<double> a_at_dc = 0.0;
  std::complex<double> b_at_dc = 0.0;
  for (const auto& c : a) a_at_dc += c;
  for (const auto& c : b) b_at_dc += c;
  const double gain = (a_at_dc / b_at_dc).real();

  for (const auto& c : a) f.a.push_back(c.real());
  for (const auto& c : b) f.b.push_back(gain * c.real());
  return f;
}

/// H(e^{jw}) at the given frequency.
inline std::complex<double> frequency_response(const FilterCoefficients& f, double hz) {
  const double w = 2.0 * std::numbers::pi * hz / f.sample_rate_hz;
  const std::complex<double> zinv = std::polar(1.0, -w);
  std::complex<double> num = 0.0;
  std::complex<double> den = 0.0;
  std::complex<double> p = 1.0;
  for (std::size_t i = 0; i < std::max(f.b.size(), f.a.size()); ++i) {
    if (i < f.b.size()) num += f.b[i] * p;
    if (i < f.a.size()) den += f.a[i] * p;
    p *= zinv;
  }
  return num / den;
}

/// Causal filtering with zero initial state (transposed direct form II).
inline std::vector<double> apply_filter(const FilterCoefficients& f, std::span<const double> x) {
  const std::size_t n = std::max(f.a.size(), f.b.size());
  std::vector<double> b(n, 0.0), a(n, 0.0), state(n, 0.0);
  std::copy(f.b.begin(), f.b.end(), b.begin());
  std::copy(f.a.begin(), f.a.end(), a.begin());
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double out = b[0] * x[i] + state[0];
    for (std::size_t k = 1; k < n; ++k)
      state[k - 1] = b[k] * x[i] - a[k] * out + (k < n - 1 ? state[k] : 0.0);
    y[i] = out;
  }
  return y;
}

inline AudioSignal apply_filter(const FilterCoefficients& f, const AudioSignal& signal) {
  return {apply_filter(f, std::span<const double>(signal.samples)), signal.sample_rate_hz};
}

/// A window of N contiguous samples viewing a source buffer. `previous` holds
/// the source sample just before the window, when there is one.
struct Frame {
  std::size_t start = 0;
  std::span<const double> samples;
  std::optional<double> previous;

  std::size_t size() const { return samples.size(); }
};

/// Cuts the source into windows starting at multiples of window_len - overlap.
/// A trailing remainder shorter than a window is dropped. The frames view
/// `source`, which must outlive them.
inline std::vector<Frame> frame_signal(std::span<const double> source, std::size_t window_len,
                                       std::size_t overlap) {
  if (window_len < 2) throw std::invalid_argument("window length must be >= 2");
  if (overlap >= window_len) throw std::invalid_argument("overlap must be smaller than the window");
  if (source.size() < window_len)
    throw DataError("signal of " + std::to_string(source.size()) +
                    " samples is shorter than one window of " + std::to_string(window_len));
  const std::size_t hop = window_len - overlap;
  const std::size_t count = (source.size() - window_len) / hop + 1;
  std::vector<Frame> frames;
  frames.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t start = i * hop;
    Frame f{start, source.subspan(start, window_len), std::nullopt};
    if (start > 0) f.previous = source[start - 1];
    frames.push_back(f);
  }
  return frames;
}

/// fraction * min(max|first third|, max|last third|).
inline double clipping_level(std::span<const double> frame, double fraction = 0.68) {
  if (frame.size() < 3) throw std::invalid_argument("clipping level needs at least 3 samples");
  const std::size_t third = frame.size() / 3;
  const auto peak = [](std::span<const double> s) {
    double m = 0.0;
    for (double v : s) m = std::max(m, std::abs(v));
    return m;
  };
  return fraction * std::min(peak(frame.first(third)), peak(frame.last(third)));
}

struct ClippedFrame {
  std::vector<double> samples;
  double level = 0.0;
};

/// Symmetric center clipper: x - C above C, x + C below -C, zero in between.
inline ClippedFrame center_clip(std::span<const double> frame, double level) {
  if (!(level >= 0.0)) throw std::invalid_argument("clipping level must be non-negative");
  ClippedFrame out{std::vector<double>(frame.size()), level};
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const double x = frame[i];
    out.samples[i] = x > level ? x - level : (x < -level ? x + level : 0.0);
  }
  return out;
}

/// Short-time (zero-padded, unnormalized) autocorrelation r[0..max_lag].
inline std::vector<double> autocorrelation(std::span<const double> s, std::size_t max_lag) {
  if (max_lag >= s.size()) throw std::invalid_argument("max lag must be smaller than the frame length");
  std::vector<double> r(max_lag + 1, 0.0);
  const std::size_t n = s.size();
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (std::size_t m = 0; m + lag < n; ++m) acc += s[m] * s[m + lag];
    r[lag] = acc;
  }
  return r;
}

}  // namespace vaclass
