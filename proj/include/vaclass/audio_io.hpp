#pragma once

// Audio ingestion: mono PCM/float WAV files, amplitude normalization and
// CSV label manifests.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vaclass/error.hpp"

namespace vaclass {

/// Sampled amplitude sequence x(m) plus its sample rate.
struct AudioSignal {
  std::vector<double> samples;
  double sample_rate_hz = 0.0;

  std::size_t size() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }

  bool operator==(const AudioSignal&) const = default;
};

/// Index into a LabelSet.
using ClassId = std::size_t;

/// Ordered, duplicate-free class names. Order defines tie-breaking and the
/// axes of every per-class matrix.
class LabelSet {
 public:
  LabelSet() : LabelSet(std::vector<std::string>{"bus", "car", "motor", "truck"}) {}

  explicit LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw ConfigError("label set is empty");
    std::set<std::string> seen;
    for (const auto& n : names_) {
      if (n.empty()) throw ConfigError("label set contains an empty name");
      if (n.find_first_of(",\r\n") != std::string::npos)
        throw ConfigError("label '" + n + "' contains a comma or newline");
      if (!seen.insert(n).second) throw ConfigError("duplicate label '" + n + "'");
    }
  }

  std::size_t size() const { return names_.size(); }
  const std::string& name(ClassId id) const { return names_.at(id); }
  const std::vector<std::string>& names() const { return names_; }

  std::optional<ClassId> find(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<ClassId>(it - names_.begin());
  }

  std::string joined(std::string_view sep = ", ") const {
    std::string out;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (i) out += sep;
      out += names_[i];
    }
    return out;
  }

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<std::string> names_;
};

struct DatasetEntry {
  std::filesystem::path path;  // resolved against the manifest directory
  ClassId label = 0;

  bool operator==(const DatasetEntry&) const = default;
};

struct LabeledDataset {
  LabelSet labels;
  std::vector<DatasetEntry> entries;

  std::size_t size() const { return entries.size(); }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(labels.size(), 0);
    for (const auto& e : entries) ++counts.at(e.label);
    return counts;
  }

  std::vector<ClassId> label_vector() const {
    std::vector<ClassId> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.label);
    return out;
  }

  bool operator==(const LabeledDataset&) const = default;
};

// ---------------------------------------------------------------------------
// WAV

namespace detail {

inline std::uint32_t read_le(const unsigned char* p, int bytes) {
  std::uint32_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline void write_le(std::ostream& os, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline constexpr std::uint16_t kWavePcm = 1;
inline constexpr std::uint16_t kWaveFloat = 3;
inline constexpr std::uint16_t kWaveExtensible = 0xFFFE;

}  // namespace detail

/// Reads a mono linear-PCM (8/16/24/32-bit integer) or 32-bit IEEE-float WAV.
/// Integer codes are divided by 2^(bits-1) so the most negative code maps to
/// -1.0; 8-bit data is unsigned with a 128 offset.
inline AudioSignal load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open WAV file '" + path.string() + "'");
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), {}};
  const auto fail = [&](const std::string& what) -> DataError {
    return DataError("'" + path.string() + "': " + what);
  };

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw fail("not a RIFF/WAVE file");

  std::optional<std::uint16_t> format;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = detail::read_le(chunk + 4, 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw fail("truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = static_cast<std::uint16_t>(detail::read_le(f, 2));
      channels = static_cast<std::uint16_t>(detail::read_le(f + 2, 2));
      rate = detail::read_le(f + 4, 4);
      block_align = static_cast<std::uint16_t>(detail::read_le(f + 12, 2));
      bits = static_cast<std::uint16_t>(detail::read_le(f + 14, 2));
      if (*format == detail::kWaveExtensible) {
        if (size < 40) throw fail("truncated WAVE_FORMAT_EXTENSIBLE header");
        format = static_cast<std::uint16_t>(detail::read_le(f + 24, 2));
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (body + size > bytes.size()) throw fail("data chunk extends past end of file");
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1);
  }

  if (!format) throw fail("missing fmt chunk");
  if (!data) throw fail("missing data chunk");
  if (channels != 1)
    throw fail(std::to_string(channels) + " channels; only mono recordings are accepted");
  if (rate == 0) throw fail("sample rate is zero");

  const bool is_int = *format == detail::kWavePcm && (bits == 8 || bits == 16 || bits == 24 || bits == 32);
  const bool is_float = *format == detail::kWaveFloat && bits == 32;
  if (!is_int && !is_float)
    throw fail("unsupported encoding (format " + std::to_string(*format) + ", " +
               std::to_string(bits) + " bits)");
  const std::size_t width = bits / 8;
  if (block_align != width) throw fail("block alignment does not match sample width");

  AudioSignal signal;
  signal.sample_rate_hz = static_cast<double>(rate);
  const std::size_t count = data_size / width;
  if (count == 0) throw fail("no samples");
  signal.samples.resize(count);

  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* p = data + i * width;
    double v = 0.0;
    if (is_float) {
      v = static_cast<double>(std::bit_cast<float>(detail::read_le(p, 4)));
    } else if (bits == 8) {
      v = (static_cast<double>(p[0]) - 128.0) / 128.0;
    } else {
      const std::uint32_t raw = detail::read_le(p, static_cast<int>(width));
      // Sign-extend from the sample width.
      const int shift = 32 - bits;
      const auto code = static_cast<std::int32_t>(raw << shift) >> shift;
      v = static_cast<double>(code) / std::ldexp(1.0, bits - 1);
    }
    signal.samples[i] = v;
  }
  return signal;
}

/// Writes a mono 16-bit PCM WAV. Samples are scaled by 32768, rounded and
/// clamped to the int16 range.
inline void write_wav16(const std::filesystem::path& path, const AudioSignal& signal) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write WAV file '" + path.string() + "'");
  const auto rate = static_cast<std::uint32_t>(std::lround(signal.sample_rate_hz));
  const auto data_bytes = static_cast<std::uint32_t>(signal.samples.size() * 2);
  out.write("RIFF", 4);
  detail::write_le(out, 36 + data_bytes, 4);
  out.write("WAVEfmt ", 8);
  detail::write_le(out, 16, 4);
  detail::write_le(out, detail::kWavePcm, 2);
  detail::write_le(out, 1, 2);
  detail::write_le(out, rate, 4);
  detail::write_le(out, rate * 2, 4);
  detail::write_le(out, 2, 2);
  detail::write_le(out, 16, 2);
  out.write("data", 4);
  detail::write_le(out, data_bytes, 4);
  for (double s : signal.samples) {
    const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    const auto code = static_cast<std::int16_t>(scaled);
    detail::write_le(out, static_cast<std::uint16_t>(code), 2);
  }
  if (!out) throw DataError("failed writing WAV file '" + path.string() + "'");
}

/// Scales the signal so that max |x| = 1. An all-zero signal is returned unchanged.
inline AudioSignal normalize(const AudioSignal& signal) {
  if (signal.samples.empty()) throw DataError("cannot normalize an empty signal");
  double peak = 0.0;
  for (double s : signal.samples) peak = std::max(peak, std::abs(s));
  AudioSignal out = signal;
  if (peak > 0.0)
    for (double& s : out.samples) s /= peak;
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

/// Parses a `path,label` CSV. Relative paths resolve against the manifest's
/// directory; lines starting with '#' and blank lines are skipped.
inline LabeledDataset load_manifest(const std::filesystem::path& path, const LabelSet& labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  const auto base = path.parent_path();
  const auto where = [&](std::size_t line) { return path.string() + ":" + std::to_string(line); };

  LabeledDataset dataset{labels, {}};
  std::set<std::filesystem::path> seen;
  bool header = false;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    line = detail::trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "path,label")
        throw DataError(where(line_no) + ": expected header 'path,label'");
      header = true;
      continue;
    }
    const auto comma = line.rfind(',');
    if (comma == std::string_view::npos) throw DataError(where(line_no) + ": expected 'path,label'");
    const auto file = detail::trim(line.substr(0, comma));
    const auto name = detail::trim(line.substr(comma + 1));
    if (file.empty()) throw DataError(where(line_no) + ": empty path");
    const auto id = labels.find(name);
    if (!id)
      throw DataError(where(line_no) + ": unknown label '" + std::string(name) + "' (allowed: " +
                      labels.joined() + ")");
    std::filesystem::path resolved{std::string(file)};
    if (resolved.is_relative()) resolved = base / resolved;
    resolved = resolved.lexically_normal();
    if (!seen.insert(resolved).second)
      throw DataError(where(line_no) + ": duplicate path '" + std::string(file) + "'");
    dataset.entries.push_back({std::move(resolved), *id});
  }
  if (dataset.entries.empty()) throw DataError("manifest '" + path.string() + "' has no entries");
  return dataset;
}

/// Writes a manifest that load_manifest reads back to the same dataset. Paths
/// are stored relative to the manifest directory when possible.
inline void write_manifest(const LabeledDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest '" + path.string() + "'");
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  out << "path,label\n";
  for (const auto& e : dataset.entries) {
    std::filesystem::path p = e.path;
    if (p.is_absolute() == std::filesystem::path(base).is_absolute() || base == ".") {
      auto rel = p.lexically_relative(base);
      if (!rel.empty()) p = rel;
    }
    out << p.generic_string() << ',' << dataset.labels.name(e.label) << '\n';
  }
  if (!out) throw DataError("failed writing manifest '" + path.string() + "'");
}

}  // namespace vaclass
