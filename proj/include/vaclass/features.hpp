#pragma once

// Short-time features per frame: energy, zero-cross rate and pitch from the
// center-clipped autocorrelation; plus median smoothing of the pitch track,
// periodic-frame filtering and the high-energy selection criterion
//   E_n > alpha * mean(E)  and  Z_n < zeta * mean(Z).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vaclass/audio_io.hpp"
#include "vaclass/dsp.hpp"
#include "vaclass/error.hpp"
#include "vaclass/format.hpp"

namespace vaclass {

/// How the pitch lag is chosen from the clipped autocorrelation.
enum class PitchSearch {
  /// Skip the zero-lag lobe, take the peak of the overlap-normalized
  /// autocorrelation, then prefer a sub-multiple lag scoring within 80% of it.
  /// Periodicity test: r[lag] * N / (N - lag) >= threshold * r[0].
  normalized,
  /// Largest raw r[lag] over the admissible lags; periodic iff
  /// r[lag] >= threshold * r[0].
  biased,
};

inline std::string to_string(PitchSearch p) { return p == PitchSearch::biased ? "biased" : "normalized"; }

struct ExtractionConfig {
  std::size_t window_len = 165;  // 15 ms at 11025 Hz
  std::size_t overlap = 55;      // 5 ms
  int filter_order = 4;
  double cutoff_hz = 4000.0;
  double clip_fraction = 0.68;
  double periodicity_threshold = 0.30;
  double max_pitch_hz = 1000.0;
  std::size_t median_width = 3;
  double alpha = 1.0;
  double zeta = 1.0;
  PitchSearch pitch_search = PitchSearch::normalized;

  void validate() const {
    if (window_len < 3) throw ConfigError("window_len must be >= 3");
    if (overlap >= window_len) throw ConfigError("overlap must be smaller than window_len");
    if (filter_order < 1) throw ConfigError("filter_order must be >= 1");
    if (!(cutoff_hz > 0.0)) throw ConfigError("cutoff_hz must be positive");
    if (!(clip_fraction > 0.0 && clip_fraction < 1.0)) throw ConfigError("clip_fraction must lie in (0, 1)");
    if (!(periodicity_threshold > 0.0 && periodicity_threshold < 1.0))
      throw ConfigError("periodicity_threshold must lie in (0, 1)");
    if (!(max_pitch_hz > 0.0)) throw ConfigError("max_pitch_hz must be positive");
    if (median_width < 1 || median_width % 2 == 0) throw ConfigError("median_width must be odd and >= 1");
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (!(zeta > 0.0)) throw ConfigError("zeta must be positive");
  }

  bool operator==(const ExtractionConfig&) const = default;
};

struct FrameFeatures {
  double energy = 0.0;
  double zcr = 0.0;
  double pitch_hz = 0.0;  // 0 marks an un-periodic frame

  bool operator==(const FrameFeatures&) const = default;
};

/// Per-frame features of one signal. `frame_index` and `starts` refer to the
/// full frame sequence, so subsets keep their provenance.
struct FeatureTrack {
  double sample_rate_hz = 0.0;
  std::vector<std::size_t> frame_index;
  std::vector<std::size_t> starts;
  std::vector<FrameFeatures> frames;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }

  void push_back(std::size_t index, std::size_t start, const FrameFeatures& f) {
    frame_index.push_back(index);
    starts.push_back(start);
    frames.push_back(f);
  }

  bool operator==(const FeatureTrack&) const = default;
};

/// Sum of squares over a rectangular window.
inline double short_time_energy(std::span<const double> frame) {
  double e = 0.0;
  for (double x : frame) e += x * x;
  return e;
}

namespace detail {
inline int sgn(double x) { return x >= 0.0 ? 1 : -1; }
}  // namespace detail

/// Number of sign changes between adjacent samples of the window; sgn(0) = +1.
inline double zero_cross_rate(std::span<const double> frame) {
  if (frame.size() < 2) throw std::invalid_argument("zero-cross rate needs at least 2 samples");
  int changes = 0;
  for (std::size_t m = 1; m < frame.size(); ++m)
    changes += detail::sgn(frame[m]) != detail::sgn(frame[m - 1]);
  return static_cast<double>(changes);
}

/// Zero-cross rate over the N window positions: the term for the first sample
/// pairs it with the preceding source sample when the frame has one.
inline double zero_cross_rate(const Frame& frame) {
  double z = zero_cross_rate(frame.samples);
  if (frame.previous) z += detail::sgn(frame.samples.front()) != detail::sgn(*frame.previous);
  return z;
}

inline std::size_t min_pitch_lag(double sample_rate_hz, double max_pitch_hz) {
  return static_cast<std::size_t>(std::ceil(sample_rate_hz / max_pitch_hz));
}

namespace detail {

inline constexpr double kOverlapEnergyFloor = 0.05;
inline constexpr double kSubmultipleRatio = 0.8;

inline std::size_t biased_peak(std::span<const double> r, std::size_t lo) {
  std::size_t best = lo;
  for (std::size_t lag = lo + 1; lag < r.size(); ++lag)
    if (r[lag] > r[best]) best = lag;
  return best;
}

// Returns 0 when the frame is judged un-periodic.
inline std::size_t normalized_peak(std::span<const double> clipped, std::span<const double> r,
                                   std::size_t min_lag, double threshold) {
  const std::size_t n = clipped.size();
  const double r0 = r[0];

  // End of the zero-lag lobe: first lag where r stops decreasing.
  std::size_t lobe = 1;
  while (lobe + 1 < n && r[lobe + 1] <= r[lobe]) ++lobe;
  const std::size_t lo = std::max(min_lag, lobe);
  if (lo >= n) return 0;

  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + clipped[i] * clipped[i];

  // Correlation normalized by the energy of the two overlapping segments;
  // lags whose overlap carries too little energy are not candidates.
  std::vector<double> score(n, 0.0);
  std::vector<bool> valid(n, false);
  for (std::size_t lag = lo; lag < n; ++lag) {
    const double head = prefix[n - lag];
    const double tail = prefix[n] - prefix[lag];
    if (head < kOverlapEnergyFloor * r0 || tail < kOverlapEnergyFloor * r0) continue;
    valid[lag] = true;
    score[lag] = r[lag] / std::sqrt(head * tail);
  }

  std::size_t best = 0;
  for (std::size_t lag = lo; lag < n; ++lag)
    if (valid[lag] && (best == 0 || score[lag] > score[best])) best = lag;
  if (best == 0) return 0;

  // Octave guard: a lag near best/d scoring nearly as high is the fundamental.
  for (std::size_t d = best / lo; d >= 2; --d) {
    const double centre = static_cast<double>(best) / static_cast<double>(d);
    const auto first = static_cast<std::ptrdiff_t>(std::floor(centre)) - 1;
    const auto last = static_cast<std::ptrdiff_t>(std::ceil(centre)) + 1;
    std::size_t pick = 0;
    for (std::ptrdiff_t c = std::max<std::ptrdiff_t>(first, static_cast<std::ptrdiff_t>(lo));
         c <= last && c < static_cast<std::ptrdiff_t>(n); ++c) {
      const auto lag = static_cast<std::size_t>(c);
      if (valid[lag] && (pick == 0 || score[lag] > score[pick])) pick = lag;
    }
    if (pick != 0 && score[pick] >= kSubmultipleRatio * score[best]) {
      best = pick;
      break;
    }
  }

  const double compensated = r[best] * static_cast<double>(n) / static_cast<double>(n - best);
  return compensated >= threshold * r0 ? best : 0;
}

}  // namespace detail

/// Pitch in Hz from the center-clipped autocorrelation, or 0 for an
/// un-periodic frame. Lags range over [ceil(fs / max_pitch), N - 1]; ties go
/// to the smaller lag.
inline double estimate_pitch(std::span<const double> frame, double sample_rate_hz,
                             const ExtractionConfig& config) {
  const std::size_t min_lag = min_pitch_lag(sample_rate_hz, config.max_pitch_hz);
  if (frame.size() < min_lag + 1 || frame.size() < 3)
    throw std::invalid_argument("frame of " + std::to_string(frame.size()) +
                                " samples is too short for the minimum pitch lag " +
                                std::to_string(min_lag));
  const auto clipped = center_clip(frame, clipping_level(frame, config.clip_fraction));
  const auto r = autocorrelation(clipped.samples, frame.size() - 1);
  if (r[0] <= 0.0) return 0.0;

  std::size_t lag = 0;
  if (config.pitch_search == PitchSearch::biased) {
    lag = detail::biased_peak(r, min_lag);
    if (r[lag] < config.periodicity_threshold * r[0]) lag = 0;
  } else {
    lag = detail::normalized_peak(clipped.samples, r, min_lag, config.periodicity_threshold);
  }
  return lag == 0 ? 0.0 : sample_rate_hz / static_cast<double>(lag);
}

/// Running median over a centered window; edges use the truncated window and
/// even-sized windows take the lower median.
inline std::vector<double> median_smooth(std::span<const double> values, std::size_t width) {
  if (width % 2 == 0) throw std::invalid_argument("median width must be odd");
  const std::size_t half = width / 2;
  std::vector<double> out(values.size());
  std::vector<double> window;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(values.size(), i + half + 1);
    window.assign(values.begin() + static_cast<std::ptrdiff_t>(lo),
                  values.begin() + static_cast<std::ptrdiff_t>(hi));
    const std::size_t mid = (window.size() - 1) / 2;
    std::nth_element(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(mid), window.end());
    out[i] = window[mid];
  }
  return out;
}

/// normalize -> low-pass -> frame -> (energy, zcr, pitch) -> median-smoothed pitch.
inline FeatureTrack extract_track(const AudioSignal& signal, const ExtractionConfig& config) {
  config.validate();
  if (signal.samples.empty()) throw DataError("empty signal");
  if (!(signal.sample_rate_hz > 0.0)) throw DataError("sample rate must be positive");
  if (!(config.cutoff_hz < signal.sample_rate_hz / 2.0))
    throw ConfigError("cutoff_hz " + std::to_string(config.cutoff_hz) +
                      " is not below the Nyquist frequency of a " +
                      std::to_string(signal.sample_rate_hz) + " Hz signal");

  const auto filter = design_butterworth_lowpass(config.filter_order, config.cutoff_hz, signal.sample_rate_hz);
  const auto filtered = apply_filter(filter, normalize(signal));
  const auto frames = frame_signal(filtered.samples, config.window_len, config.overlap);

  FeatureTrack track;
  track.sample_rate_hz = signal.sample_rate_hz;
  std::vector<double> pitch;
  pitch.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    track.push_back(i, f.start, {short_time_energy(f.samples), zero_cross_rate(f), 0.0});
    pitch.push_back(estimate_pitch(f.samples, signal.sample_rate_hz, config));
  }
  const auto smoothed = median_smooth(pitch, config.median_width);
  for (std::size_t i = 0; i < frames.size(); ++i) track.frames[i].pitch_hz = smoothed[i];
  return track;
}

/// Frames with a nonzero pitch, in order.
inline FeatureTrack select_periodic(const FeatureTrack& track) {
  FeatureTrack out;
  out.sample_rate_hz = track.sample_rate_hz;
  for (std::size_t i = 0; i < track.size(); ++i)
    if (track.frames[i].pitch_hz > 0.0) out.push_back(track.frame_index[i], track.starts[i], track.frames[i]);
  return out;
}

/// Frames with energy strictly above alpha * mean energy and zcr strictly below
/// zeta * mean zcr, means taken over the given track.
inline FeatureTrack select_high_energy(const FeatureTrack& track, double alpha, double zeta) {
  FeatureTrack out;
  out.sample_rate_hz = track.sample_rate_hz;
  if (track.empty()) return out;
  double mean_energy = 0.0;
  double mean_zcr = 0.0;
  for (const auto& f : track.frames) {
    mean_energy += f.energy;
    mean_zcr += f.zcr;
  }
  mean_energy /= static_cast<double>(track.size());
  mean_zcr /= static_cast<double>(track.size());
  for (std::size_t i = 0; i < track.size(); ++i) {
    const auto& f = track.frames[i];
    if (f.energy > alpha * mean_energy && f.zcr < zeta * mean_zcr)
      out.push_back(track.frame_index[i], track.starts[i], f);
  }
  return out;
}

/// Full track plus both selection stages for one signal.
struct SignalFeatures {
  FeatureTrack all;
  FeatureTrack periodic;
  FeatureTrack high_energy;
};

inline SignalFeatures analyze_signal(const AudioSignal& signal, const ExtractionConfig& config) {
  SignalFeatures s;
  s.all = extract_track(signal, config);
  s.periodic = select_periodic(s.all);
  s.high_energy = select_high_energy(s.periodic, config.alpha, config.zeta);
  return s;
}

inline constexpr std::string_view kFeatureCsvHeader =
    "signal,frame_index,start_sample,energy,zcr,pitch_hz,selected_periodic,selected_high_energy";

/// One CSV row per frame of `features.all` (header not included).
inline void write_feature_rows(std::ostream& out, const std::string& signal_name, const SignalFeatures& features) {
  std::size_t p = 0;
  std::size_t h = 0;
  const auto& all = features.all;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const std::size_t index = all.frame_index[i];
    const bool periodic = p < features.periodic.size() && features.periodic.frame_index[p] == index;
    const bool high = h < features.high_energy.size() && features.high_energy.frame_index[h] == index;
    p += periodic;
    h += high;
    const auto& f = all.frames[i];
    out << signal_name << ',' << index << ',' << all.starts[i] << ',' << format_double(f.energy) << ','
        << format_double(f.zcr) << ',' << format_double(f.pitch_hz) << ',' << (periodic ? 1 : 0) << ','
        << (high ? 1 : 0) << '\n';
  }
}

/// Extraction settings as key -> text, sorted by key.
inline std::map<std::string, std::string> extraction_settings(const ExtractionConfig& c) {
  return {
      {"alpha", format_double(c.alpha)},
      {"clip_fraction", format_double(c.clip_fraction)},
      {"cutoff_hz", format_double(c.cutoff_hz)},
      {"filter_order", std::to_string(c.filter_order)},
      {"max_pitch_hz", format_double(c.max_pitch_hz)},
      {"median_width", std::to_string(c.median_width)},
      {"overlap", std::to_string(c.overlap)},
      {"periodicity_threshold", format_double(c.periodicity_threshold)},
      {"pitch_search", to_string(c.pitch_search)},
      {"window_len", std::to_string(c.window_len)},
      {"zeta", format_double(c.zeta)},
  };
}

/// 64-bit FNV-1a over the "key=value" lines of the extraction settings, as hex.
inline std::string extraction_fingerprint(const ExtractionConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : extraction_settings(c)) {
    for (char ch : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace vaclass
