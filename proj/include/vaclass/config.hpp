#pragma once

// Flat "key = value" configuration shared by every command. Lines starting
// with '#' are comments. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vaclass/audio_io.hpp"
#include "vaclass/classify.hpp"
#include "vaclass/error.hpp"
#include "vaclass/features.hpp"
#include "vaclass/format.hpp"
#include "vaclass/synth.hpp"

namespace vaclass {

struct CliConfig {
  ExtractionConfig extraction;
  ClassifierSpec classifier;
  std::size_t folds = 10;
  std::uint64_t seed = 1;
  LabelSet labels;

  // Synthetic corpus; per-class lists hold one value per label or a single
  // value shared by all.
  std::vector<double> synth_fundamental_hz{80.0, 150.0, 300.0, 500.0};
  std::vector<int> synth_harmonics{3};
  std::vector<double> synth_decay{0.7};
  std::vector<double> synth_amplitude{1.0};
  std::vector<double> synth_snr_db{10.0};
  std::vector<std::size_t> synth_count{40};
  double synth_duration_s = 2.0;
  double synth_sample_rate_hz = 11025.0;
  double synth_tone_segment_s = 0.0;
  double synth_gap_segment_s = 0.0;
  double synth_gap_snr_db = 0.0;

  bool operator==(const CliConfig&) const = default;

  SynthSpec synth_spec() const;
};

namespace detail {

template <typename T>
std::string join_list(const std::vector<T>& v) {
  std::string s;
  for (const auto& x : v) {
    if (!s.empty()) s += ',';
    if constexpr (std::is_floating_point_v<T>)
      s += format_double(x);
    else
      s += std::to_string(x);
  }
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double to_double(std::string_view key, std::string_view v) {
  if (auto d = parse_double(v)) return *d;
  throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
}

template <typename Int>
Int to_int(std::string_view key, std::string_view v) {
  if (auto i = parse_integer<Int>(v)) return *i;
  throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
}

inline bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

template <typename T, typename Parse>
std::vector<T> to_list(std::string_view key, std::string_view v, Parse parse) {
  std::vector<T> out;
  for (auto item : split_commas(v)) out.push_back(parse(key, item));
  if (out.empty()) throw ConfigError(std::string(key) + ": empty list");
  return out;
}

}  // namespace detail

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<std::string(const CliConfig&)> get;
  std::function<void(CliConfig&, std::string_view)> set;
};

/// Every recognised key, in the order they are written out.
inline const std::vector<ConfigKey>& config_keys() {
  using namespace detail;
  static const std::vector<ConfigKey> keys = {
      {"window_len", "analysis window length in samples",
       [](const CliConfig& c) { return std::to_string(c.extraction.window_len); },
       [](CliConfig& c, std::string_view v) { c.extraction.window_len = to_int<std::size_t>("window_len", v); }},
      {"overlap", "samples shared by consecutive windows",
       [](const CliConfig& c) { return std::to_string(c.extraction.overlap); },
       [](CliConfig& c, std::string_view v) { c.extraction.overlap = to_int<std::size_t>("overlap", v); }},
      {"filter_order", "Butterworth low-pass order",
       [](const CliConfig& c) { return std::to_string(c.extraction.filter_order); },
       [](CliConfig& c, std::string_view v) { c.extraction.filter_order = to_int<int>("filter_order", v); }},
      {"cutoff_hz", "low-pass cutoff frequency",
       [](const CliConfig& c) { return format_double(c.extraction.cutoff_hz); },
       [](CliConfig& c, std::string_view v) { c.extraction.cutoff_hz = to_double("cutoff_hz", v); }},
      {"clip_fraction", "center-clipping level as a fraction of the smaller end-third peak",
       [](const CliConfig& c) { return format_double(c.extraction.clip_fraction); },
       [](CliConfig& c, std::string_view v) { c.extraction.clip_fraction = to_double("clip_fraction", v); }},
      {"periodicity_threshold", "autocorrelation peak / energy needed for a periodic frame",
       [](const CliConfig& c) { return format_double(c.extraction.periodicity_threshold); },
       [](CliConfig& c, std::string_view v) {
         c.extraction.periodicity_threshold = to_double("periodicity_threshold", v);
       }},
      {"max_pitch_hz", "highest pitch searched",
       [](const CliConfig& c) { return format_double(c.extraction.max_pitch_hz); },
       [](CliConfig& c, std::string_view v) { c.extraction.max_pitch_hz = to_double("max_pitch_hz", v); }},
      {"median_width", "pitch median-smoothing width in frames (odd)",
       [](const CliConfig& c) { return std::to_string(c.extraction.median_width); },
       [](CliConfig& c, std::string_view v) { c.extraction.median_width = to_int<std::size_t>("median_width", v); }},
      {"alpha", "high-energy selection: energy must exceed alpha * mean",
       [](const CliConfig& c) { return format_double(c.extraction.alpha); },
       [](CliConfig& c, std::string_view v) { c.extraction.alpha = to_double("alpha", v); }},
      {"zeta", "high-energy selection: zcr must stay below zeta * mean",
       [](const CliConfig& c) { return format_double(c.extraction.zeta); },
       [](CliConfig& c, std::string_view v) { c.extraction.zeta = to_double("zeta", v); }},
      {"pitch_search", "pitch lag rule: normalized | biased",
       [](const CliConfig& c) { return to_string(c.extraction.pitch_search); },
       [](CliConfig& c, std::string_view v) {
         if (v == "normalized")
           c.extraction.pitch_search = PitchSearch::normalized;
         else if (v == "biased")
           c.extraction.pitch_search = PitchSearch::biased;
         else
           throw ConfigError("pitch_search: expected normalized or biased, got '" + std::string(v) + "'");
       }},
      {"classifier", "qda | lda | knn | least_squares",
       [](const CliConfig& c) { return to_string(c.classifier.kind); },
       [](CliConfig& c, std::string_view v) {
         auto k = parse_classifier_kind(v);
         if (!k) throw ConfigError("classifier: expected qda, lda, knn or least_squares, got '" + std::string(v) + "'");
         c.classifier.kind = *k;
       }},
      {"knn_k", "neighbours consulted by kNN",
       [](const CliConfig& c) { return std::to_string(c.classifier.knn_k); },
       [](CliConfig& c, std::string_view v) { c.classifier.knn_k = to_int<std::size_t>("knn_k", v); }},
      {"knn_metric", "euclidean | cosine",
       [](const CliConfig& c) { return to_string(c.classifier.metric); },
       [](CliConfig& c, std::string_view v) {
         if (v == "euclidean")
           c.classifier.metric = KnnMetric::euclidean;
         else if (v == "cosine")
           c.classifier.metric = KnnMetric::cosine;
         else
           throw ConfigError("knn_metric: expected euclidean or cosine, got '" + std::string(v) + "'");
       }},
      {"shrinkage", "covariance shrinkage toward a scaled identity, in [0, 1)",
       [](const CliConfig& c) { return format_double(c.classifier.shrinkage); },
       [](CliConfig& c, std::string_view v) { c.classifier.shrinkage = to_double("shrinkage", v); }},
      {"standardize", "z-score features: auto (kNN and least squares) | on | off",
       [](const CliConfig& c) { return to_string(c.classifier.standardize); },
       [](CliConfig& c, std::string_view v) {
         if (v == "auto")
           c.classifier.standardize = StandardizeMode::automatic;
         else
           c.classifier.standardize = to_bool("standardize", v) ? StandardizeMode::on : StandardizeMode::off;
       }},
      {"high_energy_only", "train and vote only on high-energy frames",
       [](const CliConfig& c) { return std::string(c.classifier.high_energy_only ? "true" : "false"); },
       [](CliConfig& c, std::string_view v) { c.classifier.high_energy_only = to_bool("high_energy_only", v); }},
      {"folds", "cross-validation folds",
       [](const CliConfig& c) { return std::to_string(c.folds); },
       [](CliConfig& c, std::string_view v) { c.folds = to_int<std::size_t>("folds", v); }},
      {"seed", "seed for fold assignment and synthetic data",
       [](const CliConfig& c) { return std::to_string(c.seed); },
       [](CliConfig& c, std::string_view v) { c.seed = to_int<std::uint64_t>("seed", v); }},
      {"labels", "class names in order, comma-separated",
       [](const CliConfig& c) { return c.labels.joined(","); },
       [](CliConfig& c, std::string_view v) {
         std::vector<std::string> names;
         for (auto n : split_commas(v)) names.emplace_back(n);
         c.labels = LabelSet(std::move(names));
       }},
      {"synth_fundamental_hz", "per-class fundamental frequency",
       [](const CliConfig& c) { return join_list(c.synth_fundamental_hz); },
       [](CliConfig& c, std::string_view v) { c.synth_fundamental_hz = to_list<double>("synth_fundamental_hz", v, to_double); }},
      {"synth_harmonics", "per-class harmonic count",
       [](const CliConfig& c) { return join_list(c.synth_harmonics); },
       [](CliConfig& c, std::string_view v) { c.synth_harmonics = to_list<int>("synth_harmonics", v, to_int<int>); }},
      {"synth_decay", "per-class amplitude ratio between successive harmonics",
       [](const CliConfig& c) { return join_list(c.synth_decay); },
       [](CliConfig& c, std::string_view v) { c.synth_decay = to_list<double>("synth_decay", v, to_double); }},
      {"synth_amplitude", "per-class tone amplitude before normalization",
       [](const CliConfig& c) { return join_list(c.synth_amplitude); },
       [](CliConfig& c, std::string_view v) { c.synth_amplitude = to_list<double>("synth_amplitude", v, to_double); }},
      {"synth_snr_db", "per-class tone-to-noise ratio in dB (inf = no noise)",
       [](const CliConfig& c) { return join_list(c.synth_snr_db); },
       [](CliConfig& c, std::string_view v) { c.synth_snr_db = to_list<double>("synth_snr_db", v, to_double); }},
      {"synth_count", "per-class number of signals",
       [](const CliConfig& c) { return join_list(c.synth_count); },
       [](CliConfig& c, std::string_view v) { c.synth_count = to_list<std::size_t>("synth_count", v, to_int<std::size_t>); }},
      {"synth_duration_s", "signal length in seconds",
       [](const CliConfig& c) { return format_double(c.synth_duration_s); },
       [](CliConfig& c, std::string_view v) { c.synth_duration_s = to_double("synth_duration_s", v); }},
      {"synth_sample_rate_hz", "sample rate of generated signals",
       [](const CliConfig& c) { return format_double(c.synth_sample_rate_hz); },
       [](CliConfig& c, std::string_view v) { c.synth_sample_rate_hz = to_double("synth_sample_rate_hz", v); }},
      {"synth_tone_segment_s", "tone-on segment length (0 = continuous tone)",
       [](const CliConfig& c) { return format_double(c.synth_tone_segment_s); },
       [](CliConfig& c, std::string_view v) { c.synth_tone_segment_s = to_double("synth_tone_segment_s", v); }},
      {"synth_gap_segment_s", "noise-only gap length between tone segments",
       [](const CliConfig& c) { return format_double(c.synth_gap_segment_s); },
       [](CliConfig& c, std::string_view v) { c.synth_gap_segment_s = to_double("synth_gap_segment_s", v); }},
      {"synth_gap_snr_db", "tone power over gap-noise power in dB",
       [](const CliConfig& c) { return format_double(c.synth_gap_snr_db); },
       [](CliConfig& c, std::string_view v) { c.synth_gap_snr_db = to_double("synth_gap_snr_db", v); }},
  };
  return keys;
}

inline const ConfigKey* find_config_key(std::string_view name) {
  for (const auto& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

inline void set_config_value(CliConfig& config, std::string_view key, std::string_view value) {
  const auto* k = find_config_key(key);
  if (!k) throw ConfigError("unknown config key '" + std::string(key) + "'");
  k->set(config, value);
}

/// Applies one "key=value" assignment.
inline void apply_assignment(CliConfig& config, std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(text) + "'");
  set_config_value(config, detail::trim(text.substr(0, eq)), detail::trim(text.substr(eq + 1)));
}

/// Applies every assignment in `text` on top of `config`.
inline void parse_config_text(CliConfig& config, std::string_view text, const std::string& source = "config") {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line.front() == '#') continue;
    try {
      apply_assignment(config, line);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline CliConfig load_config(const std::filesystem::path& path, CliConfig base = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  parse_config_text(base, ss.str(), path.string());
  return base;
}

inline std::string emit_config(const CliConfig& config) {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

/// Key list with defaults, for --help.
inline std::string config_keys_help() {
  const CliConfig defaults;
  std::size_t w = 0;
  for (const auto& k : config_keys()) w = std::max(w, k.name.size() + 3 + k.get(defaults).size());
  std::string out = "Config keys (file lines or --set key=value; default shown):\n";
  for (const auto& k : config_keys()) {
    std::string left = "  " + k.name + " = " + k.get(defaults);
    left.resize(std::max(left.size(), w + 4), ' ');
    out += left + "  " + k.help + "\n";
  }
  return out;
}

inline SynthSpec CliConfig::synth_spec() const {
  const std::size_t n = labels.size();
  const auto pick = [&](const auto& list, const char* key) {
    if (list.size() != 1 && list.size() != n)
      throw ConfigError(std::string(key) + " has " + std::to_string(list.size()) + " values for " +
                        std::to_string(n) + " labels");
    return [&list](std::size_t c) { return list.size() == 1 ? list[0] : list[c]; };
  };
  const auto f0 = pick(synth_fundamental_hz, "synth_fundamental_hz");
  const auto harm = pick(synth_harmonics, "synth_harmonics");
  const auto decay = pick(synth_decay, "synth_decay");
  const auto amp = pick(synth_amplitude, "synth_amplitude");
  const auto snr = pick(synth_snr_db, "synth_snr_db");
  const auto count = pick(synth_count, "synth_count");
  SynthSpec s;
  for (std::size_t c = 0; c < n; ++c) s.classes.push_back({f0(c), harm(c), decay(c), amp(c), snr(c), count(c)});
  s.duration_s = synth_duration_s;
  s.sample_rate_hz = synth_sample_rate_hz;
  s.seed = seed;
  s.tone_segment_s = synth_tone_segment_s;
  s.gap_segment_s = synth_gap_segment_s;
  s.gap_snr_db = synth_gap_snr_db;
  s.validate(extraction.max_pitch_hz, extraction.window_len);
  return s;
}

}  // namespace vaclass
