#pragma once

// Synthetic labeled corpus: harmonic tones plus white noise, one fundamental
// per class. Optionally the tone is gated into segments separated by
// noise-only gaps.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "vaclass/audio_io.hpp"
#include "vaclass/error.hpp"
#include "vaclass/format.hpp"
#include "vaclass/random.hpp"

namespace vaclass {

struct SynthClass {
  double fundamental_hz = 100.0;
  int harmonics = 3;
  double decay = 0.7;      // amplitude of harmonic h is decay^(h-1)
  double amplitude = 1.0;  // before peak normalization
  double snr_db = 10.0;    // tone power over noise power; +inf disables noise
  std::size_t count = 40;

  bool operator==(const SynthClass&) const = default;
};

struct SynthSpec {
  std::vector<SynthClass> classes;
  double duration_s = 2.0;
  double sample_rate_hz = 11025.0;
  std::uint64_t seed = 1;
  /// When both are positive the tone is on for tone_segment_s, then off for
  /// gap_segment_s, repeating; gaps hold noise at gap_snr_db relative to the
  /// tone power.
  double tone_segment_s = 0.0;
  double gap_segment_s = 0.0;
  double gap_snr_db = 0.0;

  bool gated() const { return tone_segment_s > 0.0 && gap_segment_s > 0.0; }

  void validate(double max_pitch_hz, std::size_t window_len) const {
    if (classes.empty()) throw ConfigError("synthetic corpus needs at least one class");
    if (!(sample_rate_hz > 0.0)) throw ConfigError("synth_sample_rate_hz must be positive");
    if (!(duration_s * sample_rate_hz >= 2.0 * static_cast<double>(window_len)))
      throw ConfigError("synth_duration_s must cover at least two analysis windows");
    if (tone_segment_s < 0.0 || gap_segment_s < 0.0) throw ConfigError("synth segment lengths must be >= 0");
    if (gated() && std::isnan(gap_snr_db)) throw ConfigError("synth_gap_snr_db must be a number");
    for (std::size_t c = 0; c < classes.size(); ++c) {
      const auto& k = classes[c];
      const auto where = " (class " + std::to_string(c + 1) + ")";
      if (!(k.fundamental_hz > 0.0) || k.fundamental_hz > max_pitch_hz)
        throw ConfigError("synth fundamental " + format_double(k.fundamental_hz) + " Hz must lie in (0, " +
                          format_double(max_pitch_hz) + "]" + where);
      if (k.harmonics < 1) throw ConfigError("synth_harmonics must be >= 1" + where);
      if (k.fundamental_hz * k.harmonics >= sample_rate_hz / 2.0)
        throw ConfigError("highest synth harmonic is above the Nyquist frequency" + where);
      if (!(k.decay > 0.0)) throw ConfigError("synth_decay must be positive" + where);
      if (!(k.amplitude > 0.0) || !std::isfinite(k.amplitude)) throw ConfigError("synth_amplitude must be positive" + where);
      if (std::isnan(k.snr_db) || (std::isinf(k.snr_db) && k.snr_db < 0)) throw ConfigError("synth_snr_db must be a number or inf" + where);
      if (k.count < 1) throw ConfigError("synth_count must be >= 1" + where);
    }
  }

  bool operator==(const SynthSpec&) const = default;
};

/// One signal of class `c`, consuming randomness from `rng`.
inline AudioSignal synthesize_signal(const SynthSpec& spec, const SynthClass& c, Rng& rng) {
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate_hz));
  std::vector<double> phase(static_cast<std::size_t>(c.harmonics));
  for (auto& p : phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);

  std::vector<double> tone(n, 0.0);
  double power = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate_hz;
    double v = 0.0;
    double a = c.amplitude;
    for (int h = 1; h <= c.harmonics; ++h, a *= c.decay)
      v += a * std::sin(2.0 * std::numbers::pi * h * c.fundamental_hz * t + phase[static_cast<std::size_t>(h - 1)]);
    tone[i] = v;
    power += v * v;
  }
  power /= static_cast<double>(n);

  const auto noise_sigma = [&](double snr_db) {
    return std::isinf(snr_db) && snr_db > 0 ? 0.0 : std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  };
  const double sigma = noise_sigma(c.snr_db);
  const double gap_sigma = noise_sigma(spec.gap_snr_db);
  const double cycle = spec.tone_segment_s + spec.gap_segment_s;

  AudioSignal s;
  s.sample_rate_hz = spec.sample_rate_hz;
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    bool in_gap = false;
    if (spec.gated()) {
      const double t = static_cast<double>(i) / spec.sample_rate_hz;
      in_gap = std::fmod(t, cycle) >= spec.tone_segment_s;
    }
    const double sd = in_gap ? gap_sigma : sigma;
    const double noise = sd > 0.0 ? sd * rng.normal() : 0.0;
    s.samples[i] = (in_gap ? 0.0 : tone[i]) + noise;
  }
  return normalize(s);
}

/// File name of the i-th (0-based) signal of a class.
inline std::string synth_file_name(const std::string& label, std::size_t i) {
  std::string num = std::to_string(i);
  if (num.size() < 3) num.insert(0, 3 - num.size(), '0');
  return label + "_" + num + ".wav";
}

/// Writes every signal as a 16-bit WAV plus manifest.csv into `out_dir`.
/// Classes are generated in label order from a single seeded stream.
inline LabeledDataset write_synthetic_corpus(const SynthSpec& spec, const LabelSet& labels,
                                             const std::filesystem::path& out_dir) {
  if (spec.classes.size() != labels.size())
    throw ConfigError("synthetic spec has " + std::to_string(spec.classes.size()) + " classes but the label set has " +
                      std::to_string(labels.size()));
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());

  LabeledDataset dataset{labels, {}};
  Rng rng(spec.seed);
  for (ClassId c = 0; c < labels.size(); ++c) {
    for (std::size_t i = 0; i < spec.classes[c].count; ++i) {
      const auto path = out_dir / synth_file_name(labels.name(c), i);
      write_wav16(path, synthesize_signal(spec, spec.classes[c], rng));
      dataset.entries.push_back({path, c});
    }
  }
  write_manifest(dataset, out_dir / "manifest.csv");
  return dataset;
}

}  // namespace vaclass
