#pragma once

// Signal-level k-fold cross-validation, confusion matrices and report output.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vaclass/audio_io.hpp"
#include "vaclass/classify.hpp"
#include "vaclass/error.hpp"
#include "vaclass/features.hpp"
#include "vaclass/format.hpp"
#include "vaclass/parallel.hpp"
#include "vaclass/random.hpp"
#include "vaclass/version.hpp"

namespace vaclass {

struct FoldPlan {
  std::size_t k = 10;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> folds;  // dataset indices, ascending

  /// Every index not in fold f, ascending.
  std::vector<std::size_t> training_indices(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t g = 0; g < folds.size(); ++g)
      if (g != f) out.insert(out.end(), folds[g].begin(), folds[g].end());
    std::sort(out.begin(), out.end());
    return out;
  }

  bool operator==(const FoldPlan&) const = default;
};

/// Stratified split: each class (in label order) is shuffled with one seeded
/// generator and dealt round-robin, the dealing position carrying over from
/// class to class so fold totals stay within one of each other.
inline FoldPlan kfold_split(std::span<const ClassId> labels, const LabelSet& label_set, std::size_t k,
                            std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be at least 2 (got " + std::to_string(k) + ")");
  std::vector<std::vector<std::size_t>> members(label_set.size());
  for (std::size_t i = 0; i < labels.size(); ++i) members.at(labels[i]).push_back(i);

  std::string small;
  for (ClassId c = 0; c < members.size(); ++c)
    if (members[c].size() < k)
      small += (small.empty() ? "" : ", ") + label_set.name(c) + " (" + std::to_string(members[c].size()) + ")";
  if (!small.empty())
    throw DataError("stratified " + std::to_string(k) + "-fold split needs at least " + std::to_string(k) +
                    " signals per class; too few in: " + small);

  FoldPlan plan{k, seed, std::vector<std::vector<std::size_t>>(k)};
  Rng rng(seed);
  std::size_t deal = 0;
  for (auto& m : members) {
    rng.shuffle(std::span<std::size_t>(m));
    for (std::size_t idx : m) plan.folds[deal++ % k].push_back(idx);
  }
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

inline FoldPlan kfold_split(const LabeledDataset& dataset, std::size_t k, std::uint64_t seed) {
  const auto y = dataset.label_vector();
  return kfold_split(y, dataset.labels, k, seed);
}

// ---------------------------------------------------------------------------

/// K x K counts; rows = actual, columns = predicted.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : n_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const { return n_; }
  std::size_t& at(ClassId actual, ClassId predicted) { return counts_.at(actual * n_ + predicted); }
  std::size_t at(ClassId actual, ClassId predicted) const { return counts_.at(actual * n_ + predicted); }
  const std::vector<std::size_t>& counts() const { return counts_; }

  std::size_t total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }
  std::size_t trace() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < n_; ++i) t += at(i, i);
    return t;
  }
  std::size_t row_sum(ClassId actual) const {
    std::size_t s = 0;
    for (std::size_t j = 0; j < n_; ++j) s += at(actual, j);
    return s;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    if (o.n_ != n_) throw std::invalid_argument("confusion matrices differ in size");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    return *this;
  }

  static ConfusionMatrix from_rows(const std::vector<std::vector<std::size_t>>& rows) {
    ConfusionMatrix m(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) throw DataError("confusion matrix must be square");
      for (std::size_t j = 0; j < rows.size(); ++j) m.at(i, j) = rows[i][j];
    }
    return m;
  }

  std::vector<std::vector<std::size_t>> rows() const {
    std::vector<std::vector<std::size_t>> r(n_);
    for (std::size_t i = 0; i < n_; ++i) r[i].assign(counts_.begin() + i * n_, counts_.begin() + (i + 1) * n_);
    return r;
  }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> counts_;
};

/// 100 * trace / total.
inline double confusion_accuracy(const ConfusionMatrix& m) {
  const auto total = m.total();
  if (total == 0) throw DataError("accuracy of an empty confusion matrix is undefined");
  return 100.0 * static_cast<double>(m.trace()) / static_cast<double>(total);
}

inline double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
inline double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// ---------------------------------------------------------------------------
// Cross-validation core

struct CvOutcome {
  std::vector<double> fold_accuracies;
  std::vector<ConfusionMatrix> fold_confusions;
  ConfusionMatrix confusion;
  /// Held-out signals that produced no label, per actual class. They count as
  /// errors in the accuracies but do not appear in the confusion matrix.
  std::vector<std::size_t> unclassified;
  std::vector<std::vector<std::size_t>> fold_unclassified;
};

/// `predict(train, test)` returns one optional label per test index. Folds
/// run concurrently; results are assembled in fold order.
template <typename Predict>
CvOutcome cross_validate(const FoldPlan& plan, std::span<const ClassId> labels, std::size_t num_classes,
                         Predict&& predict, std::size_t threads = 0) {
  const std::size_t k = plan.folds.size();
  std::vector<ConfusionMatrix> confusions(k, ConfusionMatrix(num_classes));
  std::vector<std::vector<std::size_t>> missing(k, std::vector<std::size_t>(num_classes, 0));
  std::vector<double> accuracies(k, 0.0);

  parallel_for(
      k,
      [&](std::size_t f) {
        const auto& test = plan.folds[f];
        if (test.empty()) throw DataError("fold " + std::to_string(f + 1) + " is empty");
        const std::vector<std::optional<ClassId>> out = predict(plan.training_indices(f), test);
        if (out.size() != test.size()) throw std::logic_error("prediction count does not match the test fold");
        std::size_t correct = 0;
        for (std::size_t i = 0; i < test.size(); ++i) {
          const ClassId actual = labels[test[i]];
          if (!out[i]) {
            ++missing[f][actual];
            continue;
          }
          ++confusions[f].at(actual, *out[i]);
          correct += *out[i] == actual;
        }
        accuracies[f] = 100.0 * static_cast<double>(correct) / static_cast<double>(test.size());
      },
      threads);

  CvOutcome r{accuracies, confusions, ConfusionMatrix(num_classes), std::vector<std::size_t>(num_classes, 0),
              missing};
  for (std::size_t f = 0; f < k; ++f) {
    r.confusion += confusions[f];
    for (std::size_t c = 0; c < num_classes; ++c) r.unclassified[c] += missing[f][c];
  }
  return r;
}

// ---------------------------------------------------------------------------
// Feature extraction over a dataset

/// Per-signal features in dataset order; failures name the offending file.
inline std::vector<SignalFeatures> extract_dataset(const LabeledDataset& dataset, const ExtractionConfig& config,
                                                   std::size_t threads = 0) {
  config.validate();
  std::vector<SignalFeatures> out(dataset.size());
  parallel_for(
      dataset.size(),
      [&](std::size_t i) {
        const auto& path = dataset.entries[i].path;
        try {
          out[i] = analyze_signal(load_wav(path), config);
        } catch (const ConfigError& e) {
          throw ConfigError(path.string() + ": " + e.what());
        } catch (const NumericError& e) {
          throw NumericError(path.string() + ": " + e.what());
        } catch (const std::exception& e) {
          throw DataError(path.string() + ": " + e.what());
        }
      },
      threads);
  return out;
}

inline FrameCounts count_frames(std::span<const SignalFeatures> features) {
  FrameCounts c;
  for (const auto& s : features) c += count_frames(s);
  return c;
}

/// Model fitted on the selected frames of the given signals.
inline Model fit_on_signals(const ClassifierSpec& spec, const LabelSet& labels,
                            std::span<const SignalFeatures> features, std::span<const ClassId> y,
                            std::span<const std::size_t> indices) {
  TrainingSet data;
  FrameCounts counts;
  for (std::size_t i : indices) {
    append_training(data, features[i], y[i], spec.high_energy_only);
    counts += count_frames(features[i]);
  }
  std::vector<std::size_t> per_class(labels.size(), 0);
  for (ClassId c : data.y) ++per_class[c];
  for (ClassId c = 0; c < labels.size(); ++c)
    if (per_class[c] == 0)
      throw DataError("class " + labels.name(c) + " has no " + (spec.high_energy_only ? "high-energy" : "periodic") +
                      " training frames");
  auto model = fit_model(spec, labels, data);
  model.training_frames = counts;
  return model;
}

// ---------------------------------------------------------------------------
// Reports

struct EvaluationReport {
  std::string classifier;
  std::map<std::string, std::string> config;
  std::vector<std::string> labels;
  std::uint64_t seed = 0;
  std::vector<double> fold_accuracies;
  double mean = 0.0;
  double std = 0.0;
  ConfusionMatrix confusion;
  std::vector<ConfusionMatrix> fold_confusions;
  std::vector<std::size_t> unclassified;
  std::vector<std::vector<std::size_t>> fold_unclassified;
  FrameCounts frames;
  std::string version{kVersion};

  bool operator==(const EvaluationReport&) const = default;
};

inline std::map<std::string, std::string> classifier_settings(const ClassifierSpec& s) {
  return {{"classifier", to_string(s.kind)},
          {"knn_k", std::to_string(s.knn_k)},
          {"knn_metric", to_string(s.metric)},
          {"shrinkage", format_double(s.shrinkage)},
          {"standardize", to_string(s.standardize)},
          {"high_energy_only", s.high_energy_only ? "true" : "false"}};
}

/// Cross-validates one classifier over already extracted features.
inline EvaluationReport run_cv(std::span<const SignalFeatures> features, const LabeledDataset& dataset,
                               const ExtractionConfig& extraction, const ClassifierSpec& spec,
                               const FoldPlan& plan, std::size_t threads = 0) {
  if (features.size() != dataset.size()) throw std::invalid_argument("features do not match the dataset");
  const auto y = dataset.label_vector();
  const auto outcome = cross_validate(
      plan, y, dataset.labels.size(),
      [&](const std::vector<std::size_t>& train, const std::vector<std::size_t>& test) {
        const auto model = fit_on_signals(spec, dataset.labels, features, y, train);
        std::vector<std::optional<ClassId>> out;
        out.reserve(test.size());
        for (std::size_t i : test) out.push_back(classify_signal(model, features[i]).label);
        return out;
      },
      threads);

  EvaluationReport r;
  r.classifier = spec.display_name();
  r.config = extraction_settings(extraction);
  r.config.merge(classifier_settings(spec));
  r.config["folds"] = std::to_string(plan.k);
  r.labels = dataset.labels.names();
  r.seed = plan.seed;
  r.fold_accuracies = outcome.fold_accuracies;
  r.mean = mean_of(r.fold_accuracies);
  r.std = sample_std(r.fold_accuracies);
  r.confusion = outcome.confusion;
  r.fold_confusions = outcome.fold_confusions;
  r.unclassified = outcome.unclassified;
  r.fold_unclassified = outcome.fold_unclassified;
  r.frames = count_frames(features);
  return r;
}

/// Extracts every signal once, then cross-validates.
inline EvaluationReport run_cv(const LabeledDataset& dataset, const ExtractionConfig& extraction,
                               const ClassifierSpec& spec, const FoldPlan& plan, std::size_t threads = 0) {
  const auto features = extract_dataset(dataset, extraction, threads);
  return run_cv(features, dataset, extraction, spec, plan, threads);
}

/// The seven rows of the comparison table, in its order.
inline std::vector<ClassifierSpec> comparison_specs(const ClassifierSpec& base) {
  auto make = [&](ClassifierKind kind, KnnMetric metric, bool high_energy) {
    ClassifierSpec s = base;
    s.kind = kind;
    s.metric = metric;
    s.high_energy_only = high_energy;
    return s;
  };
  return {make(ClassifierKind::least_squares, base.metric, false),
          make(ClassifierKind::knn, KnnMetric::cosine, false),
          make(ClassifierKind::knn, KnnMetric::euclidean, false),
          make(ClassifierKind::lda, base.metric, false),
          make(ClassifierKind::lda, base.metric, true),
          make(ClassifierKind::qda, base.metric, false),
          make(ClassifierKind::qda, base.metric, true)};
}

enum class ReportFormat { text, csv, json };

inline std::optional<ReportFormat> parse_report_format(std::string_view s) {
  if (s == "text") return ReportFormat::text;
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  return std::nullopt;
}

/// "53.33 ± 4.71"
inline std::string accuracy_text(double mean, double std) {
  return format_fixed(mean, 2) + " ± " + format_fixed(std, 2);
}

namespace detail {

inline std::string pad(const std::string& s, std::size_t width, bool right) {
  if (s.size() >= width) return s;
  const std::string fill(width - s.size(), ' ');
  return right ? fill + s : s + fill;
}

}  // namespace detail

/// Actual-by-predicted grid, labels in label-set order.
inline void write_confusion_grid(std::ostream& out, const ConfusionMatrix& m, const std::vector<std::string>& labels) {
  std::size_t w = 6;
  for (const auto& l : labels) w = std::max(w, l.size() + 1);
  for (auto c : m.counts()) w = std::max(w, std::to_string(c).size() + 1);
  out << detail::pad("actual\\pred", std::max<std::size_t>(w, 12), false);
  for (const auto& l : labels) out << ' ' << detail::pad(l, w, true);
  out << '\n';
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << detail::pad(labels[i], std::max<std::size_t>(w, 12), false);
    for (std::size_t j = 0; j < labels.size(); ++j) out << ' ' << detail::pad(std::to_string(m.at(i, j)), w, true);
    out << '\n';
  }
}

inline nlohmann::json report_to_json(const EvaluationReport& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& m : r.fold_confusions) folds.push_back(m.rows());
  return {{"classifier", r.classifier},
          {"config", r.config},
          {"fold_accuracies", r.fold_accuracies},
          {"mean", r.mean},
          {"std", r.std},
          {"confusion", r.confusion.rows()},
          {"fold_confusions", folds},
          {"unclassified", r.unclassified},
          {"fold_unclassified", r.fold_unclassified},
          {"frame_counts", {{"total", r.frames.total}, {"periodic", r.frames.periodic}, {"high_energy", r.frames.high_energy}}},
          {"labels", r.labels},
          {"seed", r.seed},
          {"version", r.version}};
}

inline EvaluationReport report_from_json(const nlohmann::json& j) {
  try {
    EvaluationReport r;
    r.classifier = j.at("classifier").get<std::string>();
    r.config = j.at("config").get<std::map<std::string, std::string>>();
    r.fold_accuracies = j.at("fold_accuracies").get<std::vector<double>>();
    r.mean = j.at("mean").get<double>();
    r.std = j.at("std").get<double>();
    r.confusion = ConfusionMatrix::from_rows(j.at("confusion").get<std::vector<std::vector<std::size_t>>>());
    for (const auto& m : j.at("fold_confusions"))
      r.fold_confusions.push_back(ConfusionMatrix::from_rows(m.get<std::vector<std::vector<std::size_t>>>()));
    r.unclassified = j.at("unclassified").get<std::vector<std::size_t>>();
    r.fold_unclassified = j.at("fold_unclassified").get<std::vector<std::vector<std::size_t>>>();
    const auto& fc = j.at("frame_counts");
    r.frames = {fc.at("total").get<std::size_t>(), fc.at("periodic").get<std::size_t>(),
                fc.at("high_energy").get<std::size_t>()};
    r.labels = j.at("labels").get<std::vector<std::string>>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.version = j.at("version").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

inline void emit_report(std::ostream& out, const EvaluationReport& r, ReportFormat format) {
  switch (format) {
    case ReportFormat::text: {
      out << "classifier: " << r.classifier << '\n';
      out << "folds: " << r.fold_accuracies.size() << "  seed: " << r.seed << '\n';
      out << "accuracy (%): " << accuracy_text(r.mean, r.std) << '\n';
      out << "fold accuracies:";
      for (double a : r.fold_accuracies) out << ' ' << format_fixed(a, 2);
      out << '\n';
      out << "frames: total " << r.frames.total << ", periodic " << r.frames.periodic << ", high-energy "
          << r.frames.high_energy << '\n';
      const auto missing = std::accumulate(r.unclassified.begin(), r.unclassified.end(), std::size_t{0});
      if (missing) {
        out << "unclassifiable signals:";
        for (std::size_t c = 0; c < r.labels.size(); ++c)
          if (r.unclassified[c]) out << ' ' << r.labels[c] << '=' << r.unclassified[c];
        out << '\n';
      }
      out << "\nconfusion (rows = actual, columns = predicted)\n";
      write_confusion_grid(out, r.confusion, r.labels);
      break;
    }
    case ReportFormat::csv: {
      out << "fold,accuracy";
      for (const auto& a : r.labels) out << ",unclassified_" << a;
      for (const auto& a : r.labels)
        for (const auto& p : r.labels) out << ',' << a << "_as_" << p;
      out << '\n';
      for (std::size_t f = 0; f < r.fold_accuracies.size(); ++f) {
        out << f + 1 << ',' << format_double(r.fold_accuracies[f]);
        for (auto v : r.fold_unclassified.at(f)) out << ',' << v;
        for (auto v : r.fold_confusions.at(f).counts()) out << ',' << v;
        out << '\n';
      }
      break;
    }
    case ReportFormat::json:
      out << report_to_json(r).dump(2) << '\n';
      break;
  }
}

/// One accuracy row per classifier, in the given order.
inline void emit_comparison(std::ostream& out, const std::vector<EvaluationReport>& rows, ReportFormat format) {
  switch (format) {
    case ReportFormat::text: {
      std::size_t w = 6;
      for (const auto& r : rows) w = std::max(w, r.classifier.size());
      out << detail::pad("Method", w, false) << "  Accuracy (%)\n";
      for (const auto& r : rows) out << detail::pad(r.classifier, w, false) << "  " << accuracy_text(r.mean, r.std) << '\n';
      break;
    }
    case ReportFormat::csv: {
      const std::size_t k = rows.empty() ? 0 : rows.front().fold_accuracies.size();
      out << "classifier,mean,std";
      for (std::size_t f = 0; f < k; ++f) out << ",fold_" << f + 1;
      out << '\n';
      for (const auto& r : rows) {
        out << r.classifier << ',' << format_double(r.mean) << ',' << format_double(r.std);
        for (double a : r.fold_accuracies) out << ',' << format_double(a);
        out << '\n';
      }
      break;
    }
    case ReportFormat::json: {
      nlohmann::json j = nlohmann::json::array();
      for (const auto& r : rows) j.push_back(report_to_json(r));
      out << nlohmann::json{{"version", std::string(kVersion)}, {"rows", j}}.dump(2) << '\n';
      break;
    }
  }
}

}  // namespace vaclass
