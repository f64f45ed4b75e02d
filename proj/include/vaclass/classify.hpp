#pragma once

// Frame classifiers over (energy, zcr, pitch) vectors and the signal-level
// majority vote.
//
// QDA scores each class with y_k(X) = X'Q_k X + V_k'X + v0_k where, for a
// Gaussian class with mean mu, covariance S and prior pi,
//   Q_k  = -1/2 S^-1
//   V_k  = S^-1 mu
//   v0_k = -1/2 mu' S^-1 mu - 1/2 log det S + log pi.
// LDA is the shared-covariance special case (the quadratic and log-det terms
// are common to all classes and dropped).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "vaclass/audio_io.hpp"
#include "vaclass/error.hpp"
#include "vaclass/features.hpp"

namespace vaclass {

inline constexpr int kFeatureDim = 3;
using FeatureVector = Eigen::Vector3d;
using FeatureMatrix = Eigen::Matrix3d;

inline FeatureVector to_vector(const FrameFeatures& f) { return {f.energy, f.zcr, f.pitch_hz}; }

/// Labeled frame vectors used to fit a classifier.
struct TrainingSet {
  std::vector<FeatureVector> x;
  std::vector<ClassId> y;

  std::size_t size() const { return x.size(); }
  void add(const FeatureVector& v, ClassId label) {
    x.push_back(v);
    y.push_back(label);
  }
};

/// Per-dimension z-scoring fitted on training vectors. A constant dimension
/// gets scale 1.
struct Standardizer {
  FeatureVector mean = FeatureVector::Zero();
  FeatureVector scale = FeatureVector::Ones();

  static Standardizer fit(std::span<const FeatureVector> xs) {
    Standardizer s;
    if (xs.empty()) return s;
    const auto n = static_cast<double>(xs.size());
    for (const auto& x : xs) s.mean += x;
    s.mean /= n;
    FeatureVector var = FeatureVector::Zero();
    for (const auto& x : xs) var += (x - s.mean).cwiseAbs2();
    var /= n;
    for (int d = 0; d < kFeatureDim; ++d) s.scale[d] = var[d] > 0.0 ? std::sqrt(var[d]) : 1.0;
    return s;
  }

  FeatureVector apply(const FeatureVector& x) const { return (x - mean).cwiseQuotient(scale); }

  bool is_identity() const { return mean.isZero(0.0) && scale.isOnes(0.0); }
  bool operator==(const Standardizer& o) const { return mean == o.mean && scale == o.scale; }
};

// ---------------------------------------------------------------------------
// Settings of a classifier run

enum class ClassifierKind { qda, lda, knn, least_squares };
enum class KnnMetric { euclidean, cosine };
enum class StandardizeMode { automatic, on, off };

inline std::string to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::qda: return "qda";
    case ClassifierKind::lda: return "lda";
    case ClassifierKind::knn: return "knn";
    case ClassifierKind::least_squares: return "least_squares";
  }
  return "?";
}
inline std::string to_string(KnnMetric m) { return m == KnnMetric::cosine ? "cosine" : "euclidean"; }
inline std::string to_string(StandardizeMode m) {
  return m == StandardizeMode::on ? "on" : (m == StandardizeMode::off ? "off" : "auto");
}

inline std::optional<ClassifierKind> parse_classifier_kind(std::string_view s) {
  if (s == "qda") return ClassifierKind::qda;
  if (s == "lda") return ClassifierKind::lda;
  if (s == "knn") return ClassifierKind::knn;
  if (s == "least_squares" || s == "ls") return ClassifierKind::least_squares;
  return std::nullopt;
}

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::qda;
  std::size_t knn_k = 25;
  KnnMetric metric = KnnMetric::euclidean;
  double shrinkage = 1e-4;
  StandardizeMode standardize = StandardizeMode::automatic;
  /// Train and test only on frames passing the high-energy criterion (the "**" variants).
  bool high_energy_only = false;

  bool standardizes() const {
    if (standardize == StandardizeMode::automatic)
      return kind == ClassifierKind::knn || kind == ClassifierKind::least_squares;
    return standardize == StandardizeMode::on;
  }

  /// Row name in the style of the comparison table.
  std::string display_name() const {
    std::string base;
    switch (kind) {
      case ClassifierKind::qda: base = "QDA"; break;
      case ClassifierKind::lda: base = "LDA"; break;
      case ClassifierKind::least_squares: base = "Least Square"; break;
      case ClassifierKind::knn:
        base = "kNN, k=" + std::to_string(knn_k) + (metric == KnnMetric::cosine ? ", Cosine" : ", Euclidian");
        break;
    }
    return high_energy_only ? base + "**" : base;
  }

  bool operator==(const ClassifierSpec&) const = default;
};

namespace detail {

inline ClassId argmax(std::span<const double> scores) {
  ClassId best = 0;
  for (ClassId k = 1; k < scores.size(); ++k)
    if (scores[k] > scores[best]) best = k;
  return best;
}

inline FeatureMatrix shrink(const FeatureMatrix& cov, double lambda) {
  return (1.0 - lambda) * cov + lambda * (cov.trace() / kFeatureDim) * FeatureMatrix::Identity();
}

struct GaussianTerms {
  FeatureMatrix inverse;
  double log_det = 0.0;
};

inline GaussianTerms invert_pd(const FeatureMatrix& cov, const std::string& what) {
  Eigen::LLT<FeatureMatrix> llt(cov);
  bool ok = llt.info() == Eigen::Success;
  double log_det = 0.0;
  if (ok) {
    const FeatureMatrix l = llt.matrixL();
    for (int i = 0; i < kFeatureDim; ++i) {
      ok = ok && l(i, i) > 0.0 && std::isfinite(l(i, i));
      if (ok) log_det += 2.0 * std::log(l(i, i));
    }
  }
  if (!ok || !std::isfinite(log_det))
    throw NumericError(what + " is not positive definite; increase the shrinkage parameter");
  return {llt.solve(FeatureMatrix::Identity()), log_det};
}

inline void check_labels(const TrainingSet& data, std::size_t num_classes) {
  if (data.x.size() != data.y.size()) throw std::invalid_argument("training vectors and labels differ in length");
  for (ClassId y : data.y)
    if (y >= num_classes) throw std::invalid_argument("training label out of range");
}

inline std::vector<std::vector<FeatureVector>> group_by_class(const TrainingSet& data, std::size_t num_classes,
                                                              const Standardizer& std_) {
  std::vector<std::vector<FeatureVector>> groups(num_classes);
  for (std::size_t i = 0; i < data.size(); ++i) groups[data.y[i]].push_back(std_.apply(data.x[i]));
  return groups;
}

inline FeatureVector mean_of(std::span<const FeatureVector> xs) {
  FeatureVector m = FeatureVector::Zero();
  for (const auto& x : xs) m += x;
  return m / static_cast<double>(xs.size());
}

inline FeatureMatrix scatter_of(std::span<const FeatureVector> xs, const FeatureVector& mean) {
  FeatureMatrix s = FeatureMatrix::Zero();
  for (const auto& x : xs) s += (x - mean) * (x - mean).transpose();
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// QDA

struct GaussianClass {
  FeatureVector mean = FeatureVector::Zero();
  FeatureMatrix covariance = FeatureMatrix::Identity();  // after shrinkage
  double prior = 0.0;
  std::size_t count = 0;
};

class QdaModel {
 public:
  QdaModel() = default;
  QdaModel(std::vector<GaussianClass> classes, double shrinkage, Standardizer standardizer)
      : classes_(std::move(classes)), shrinkage_(shrinkage), standardizer_(std::move(standardizer)) {
    terms_.reserve(classes_.size());
    for (std::size_t k = 0; k < classes_.size(); ++k) {
      const auto& c = classes_[k];
      const auto g = detail::invert_pd(c.covariance, "covariance of class " + std::to_string(k));
      Terms t;
      t.quadratic = -0.5 * g.inverse;
      t.linear = g.inverse * c.mean;
      t.constant = -0.5 * c.mean.dot(g.inverse * c.mean) - 0.5 * g.log_det + std::log(c.prior);
      terms_.push_back(t);
    }
  }

  const std::vector<GaussianClass>& classes() const { return classes_; }
  double shrinkage() const { return shrinkage_; }
  const Standardizer& standardizer() const { return standardizer_; }

  /// y_k(X) for every class, in label order.
  std::vector<double> discriminants(const FeatureVector& raw) const {
    const FeatureVector x = standardizer_.apply(raw);
    std::vector<double> y(terms_.size());
    for (std::size_t k = 0; k < terms_.size(); ++k)
      y[k] = x.dot(terms_[k].quadratic * x) + terms_[k].linear.dot(x) + terms_[k].constant;
    return y;
  }

  ClassId predict(const FeatureVector& x) const { return detail::argmax(discriminants(x)); }

 private:
  struct Terms {
    FeatureMatrix quadratic;
    FeatureVector linear;
    double constant = 0.0;
  };
  std::vector<GaussianClass> classes_;
  double shrinkage_ = 0.0;
  Standardizer standardizer_;
  std::vector<Terms> terms_;
};

/// Per-class Gaussian maximum likelihood: sample mean, sample covariance
/// (n_k - 1 denominator) shrunk toward (trace / dim) * I, prior n_k / n.
inline QdaModel fit_qda(const TrainingSet& data, std::size_t num_classes, double shrinkage,
                        bool standardize = false) {
  detail::check_labels(data, num_classes);
  if (num_classes < 2) throw DataError("QDA needs at least 2 classes");
  if (!(shrinkage >= 0.0 && shrinkage < 1.0)) throw ConfigError("shrinkage must lie in [0, 1)");
  const auto std_ = standardize ? Standardizer::fit(data.x) : Standardizer{};
  const auto groups = detail::group_by_class(data, num_classes, std_);
  std::vector<GaussianClass> classes(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    const auto& g = groups[k];
    if (g.size() < 2)
      throw DataError("class " + std::to_string(k) + " has " + std::to_string(g.size()) +
                      " training vectors; QDA needs at least 2");
    auto& c = classes[k];
    c.count = g.size();
    c.mean = detail::mean_of(g);
    c.covariance = detail::shrink(detail::scatter_of(g, c.mean) / static_cast<double>(g.size() - 1), shrinkage);
    c.prior = static_cast<double>(g.size()) / static_cast<double>(data.size());
  }
  return QdaModel(std::move(classes), shrinkage, std_);
}

// ---------------------------------------------------------------------------
// LDA

class LdaModel {
 public:
  LdaModel() = default;
  LdaModel(std::vector<FeatureVector> means, std::vector<double> priors, std::vector<std::size_t> counts,
           FeatureMatrix pooled, double shrinkage, Standardizer standardizer)
      : means_(std::move(means)),
        priors_(std::move(priors)),
        counts_(std::move(counts)),
        pooled_(pooled),
        shrinkage_(shrinkage),
        standardizer_(std::move(standardizer)) {
    const auto g = detail::invert_pd(pooled_, "pooled covariance");
    for (std::size_t k = 0; k < means_.size(); ++k) {
      linear_.push_back(g.inverse * means_[k]);
      constant_.push_back(-0.5 * means_[k].dot(g.inverse * means_[k]) + std::log(priors_[k]));
    }
  }

  const std::vector<FeatureVector>& means() const { return means_; }
  const std::vector<double>& priors() const { return priors_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  const FeatureMatrix& pooled_covariance() const { return pooled_; }
  double shrinkage() const { return shrinkage_; }
  const Standardizer& standardizer() const { return standardizer_; }

  std::vector<double> discriminants(const FeatureVector& raw) const {
    const FeatureVector x = standardizer_.apply(raw);
    std::vector<double> y(means_.size());
    for (std::size_t k = 0; k < means_.size(); ++k) y[k] = linear_[k].dot(x) + constant_[k];
    return y;
  }

  ClassId predict(const FeatureVector& x) const { return detail::argmax(discriminants(x)); }

 private:
  std::vector<FeatureVector> means_;
  std::vector<double> priors_;
  std::vector<std::size_t> counts_;
  FeatureMatrix pooled_ = FeatureMatrix::Identity();
  double shrinkage_ = 0.0;
  Standardizer standardizer_;
  std::vector<FeatureVector> linear_;
  std::vector<double> constant_;
};

/// Pooled covariance sum_k (n_k - 1) S_k / (n - K), shrunk like QDA.
inline LdaModel fit_lda(const TrainingSet& data, std::size_t num_classes, double shrinkage,
                        bool standardize = false) {
  detail::check_labels(data, num_classes);
  if (num_classes < 2) throw DataError("LDA needs at least 2 classes");
  if (!(shrinkage >= 0.0 && shrinkage < 1.0)) throw ConfigError("shrinkage must lie in [0, 1)");
  if (data.size() <= num_classes) throw DataError("LDA needs more training vectors than classes");
  const auto std_ = standardize ? Standardizer::fit(data.x) : Standardizer{};
  const auto groups = detail::group_by_class(data, num_classes, std_);
  std::vector<FeatureVector> means;
  std::vector<double> priors;
  std::vector<std::size_t> counts;
  FeatureMatrix scatter = FeatureMatrix::Zero();
  for (std::size_t k = 0; k < num_classes; ++k) {
    const auto& g = groups[k];
    if (g.empty()) throw DataError("class " + std::to_string(k) + " has no training vectors");
    means.push_back(detail::mean_of(g));
    scatter += detail::scatter_of(g, means.back());
    priors.push_back(static_cast<double>(g.size()) / static_cast<double>(data.size()));
    counts.push_back(g.size());
  }
  const FeatureMatrix pooled =
      detail::shrink(scatter / static_cast<double>(data.size() - num_classes), shrinkage);
  return LdaModel(std::move(means), std::move(priors), std::move(counts), pooled, shrinkage, std_);
}

// ---------------------------------------------------------------------------
// kNN

class KnnIndex {
 public:
  KnnIndex() = default;
  KnnIndex(std::vector<FeatureVector> vectors, std::vector<ClassId> labels, std::size_t num_classes,
           std::size_t k, KnnMetric metric, Standardizer standardizer)
      : vectors_(std::move(vectors)),
        labels_(std::move(labels)),
        num_classes_(num_classes),
        k_(k),
        metric_(metric),
        standardizer_(std::move(standardizer)) {
    if (vectors_.empty()) throw DataError("kNN index is empty");
    if (vectors_.size() != labels_.size()) throw std::invalid_argument("kNN vectors and labels differ in length");
    if (k_ < 1) throw ConfigError("knn_k must be >= 1");
    if (k_ > vectors_.size())
      throw DataError("knn_k = " + std::to_string(k_) + " exceeds the " + std::to_string(vectors_.size()) +
                      " training vectors");
    norms_.reserve(vectors_.size());
    for (const auto& v : vectors_) norms_.push_back(v.norm());
  }

  const std::vector<FeatureVector>& vectors() const { return vectors_; }
  const std::vector<ClassId>& labels() const { return labels_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t k() const { return k_; }
  KnnMetric metric() const { return metric_; }
  const Standardizer& standardizer() const { return standardizer_; }

  /// Distance from a stored (already standardized) vector to the query.
  double distance(std::size_t i, const FeatureVector& q, double q_norm) const {
    if (metric_ == KnnMetric::euclidean) return (vectors_[i] - q).norm();
    const double denom = norms_[i] * q_norm;
    const double similarity = denom > 0.0 ? vectors_[i].dot(q) / denom : 0.0;
    return 1.0 - similarity;
  }

  /// Majority label among the k nearest. Distance ties go to earlier training
  /// vectors, vote ties to the earlier label.
  ClassId predict(const FeatureVector& raw) const {
    const FeatureVector q = standardizer_.apply(raw);
    const double q_norm = q.norm();
    std::vector<std::pair<double, std::size_t>> d(vectors_.size());
    for (std::size_t i = 0; i < vectors_.size(); ++i) d[i] = {distance(i, q, q_norm), i};
    const auto kth = d.begin() + static_cast<std::ptrdiff_t>(k_);
    std::nth_element(d.begin(), kth - 1, d.end());
    std::vector<double> votes(num_classes_, 0.0);
    for (auto it = d.begin(); it != kth; ++it) votes[labels_[it->second]] += 1.0;
    return detail::argmax(votes);
  }

 private:
  std::vector<FeatureVector> vectors_;
  std::vector<ClassId> labels_;
  std::size_t num_classes_ = 0;
  std::size_t k_ = 25;
  KnnMetric metric_ = KnnMetric::euclidean;
  Standardizer standardizer_;
  std::vector<double> norms_;
};

inline KnnIndex build_knn(const TrainingSet& data, std::size_t num_classes, std::size_t k, KnnMetric metric,
                          bool standardize = true) {
  detail::check_labels(data, num_classes);
  const auto std_ = standardize ? Standardizer::fit(data.x) : Standardizer{};
  std::vector<FeatureVector> xs;
  xs.reserve(data.size());
  for (const auto& x : data.x) xs.push_back(std_.apply(x));
  return KnnIndex(std::move(xs), data.y, num_classes, k, metric, std_);
}

// ---------------------------------------------------------------------------
// Least squares

inline constexpr double kLeastSquaresRidge = 1e-8;

/// One-hot linear regression on [1, X]; the predicted class is the argmax of
/// the fitted scores.
class LeastSquaresModel {
 public:
  LeastSquaresModel() = default;
  LeastSquaresModel(Eigen::MatrixXd weights, Standardizer standardizer)
      : weights_(std::move(weights)), standardizer_(std::move(standardizer)) {}

  const Eigen::MatrixXd& weights() const { return weights_; }
  const Standardizer& standardizer() const { return standardizer_; }

  std::vector<double> scores(const FeatureVector& raw) const {
    Eigen::Vector4d a;
    a << 1.0, standardizer_.apply(raw);
    const Eigen::VectorXd s = weights_.transpose() * a;
    return {s.data(), s.data() + s.size()};
  }

  ClassId predict(const FeatureVector& x) const { return detail::argmax(scores(x)); }

 private:
  Eigen::MatrixXd weights_;  // (1 + dim) x K
  Standardizer standardizer_;
};

inline LeastSquaresModel fit_least_squares(const TrainingSet& data, std::size_t num_classes,
                                           bool standardize = true) {
  detail::check_labels(data, num_classes);
  if (num_classes < 2) throw DataError("least squares needs at least 2 classes");
  if (data.size() == 0) throw DataError("least squares has no training vectors");
  const auto std_ = standardize ? Standardizer::fit(data.x) : Standardizer{};
  Eigen::Matrix4d gram = Eigen::Matrix4d::Zero();
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(kFeatureDim + 1, static_cast<Eigen::Index>(num_classes));
  for (std::size_t i = 0; i < data.size(); ++i) {
    Eigen::Vector4d a;
    a << 1.0, std_.apply(data.x[i]);
    gram += a * a.transpose();
    rhs.col(static_cast<Eigen::Index>(data.y[i])) += a;
  }
  gram += kLeastSquaresRidge * Eigen::Matrix4d::Identity();
  Eigen::LDLT<Eigen::Matrix4d> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw NumericError("least-squares normal equations are not solvable");
  Eigen::MatrixXd w = ldlt.solve(rhs);
  if (!w.allFinite()) throw NumericError("least-squares solution is not finite");
  return LeastSquaresModel(std::move(w), std_);
}

// ---------------------------------------------------------------------------
// Fitted model of any kind

struct FrameCounts {
  std::size_t total = 0;
  std::size_t periodic = 0;
  std::size_t high_energy = 0;

  FrameCounts& operator+=(const FrameCounts& o) {
    total += o.total;
    periodic += o.periodic;
    high_energy += o.high_energy;
    return *this;
  }
  bool operator==(const FrameCounts&) const = default;
};

inline FrameCounts count_frames(const SignalFeatures& s) {
  return {s.all.size(), s.periodic.size(), s.high_energy.size()};
}

struct Model {
  ClassifierSpec spec;
  LabelSet labels;
  std::variant<QdaModel, LdaModel, KnnIndex, LeastSquaresModel> impl;
  /// Frame counts of the training signals, and how many frame vectors the
  /// classifier was actually fitted on.
  FrameCounts training_frames;
  std::size_t training_vectors = 0;
  /// Extraction-config fingerprint and settings the model was trained under.
  std::string fingerprint;
  std::map<std::string, std::string> extraction;

  ClassId predict(const FeatureVector& x) const {
    return std::visit([&](const auto& m) { return m.predict(x); }, impl);
  }
};

inline Model fit_model(const ClassifierSpec& spec, const LabelSet& labels, const TrainingSet& data) {
  Model m{spec, labels, QdaModel{}, {}, data.size(), {}, {}};
  const bool z = spec.standardizes();
  switch (spec.kind) {
    case ClassifierKind::qda: m.impl = fit_qda(data, labels.size(), spec.shrinkage, z); break;
    case ClassifierKind::lda: m.impl = fit_lda(data, labels.size(), spec.shrinkage, z); break;
    case ClassifierKind::knn: m.impl = build_knn(data, labels.size(), spec.knn_k, spec.metric, z); break;
    case ClassifierKind::least_squares: m.impl = fit_least_squares(data, labels.size(), z); break;
  }
  return m;
}

/// Frames of one signal that a classifier trains and votes on.
inline const FeatureTrack& selected_frames(const SignalFeatures& s, bool high_energy_only) {
  return high_energy_only ? s.high_energy : s.periodic;
}

inline void append_training(TrainingSet& out, const SignalFeatures& s, ClassId label, bool high_energy_only) {
  for (const auto& f : selected_frames(s, high_energy_only).frames) out.add(to_vector(f), label);
}

// ---------------------------------------------------------------------------
// Signal-level vote

struct SignalDecision {
  std::optional<ClassId> label;  // empty: unclassifiable
  std::vector<double> fractions;
  std::size_t frames_used = 0;
  bool used_fallback = false;
};

/// Classifies every vector and returns the modal label (ties to the earlier
/// label) with per-class vote fractions.
template <typename FrameClassifier>
SignalDecision vote(std::span<const FeatureVector> vectors, std::size_t num_classes, FrameClassifier&& classify) {
  SignalDecision d;
  d.fractions.assign(num_classes, 0.0);
  d.frames_used = vectors.size();
  if (vectors.empty()) return d;
  std::vector<double> counts(num_classes, 0.0);
  for (const auto& v : vectors) counts.at(classify(v)) += 1.0;
  for (std::size_t k = 0; k < num_classes; ++k) d.fractions[k] = counts[k] / static_cast<double>(vectors.size());
  d.label = detail::argmax(counts);
  return d;
}

/// Votes over the selected frames; when the high-energy selection is empty the
/// periodic frames are used instead. No frames at all yields no label.
inline SignalDecision classify_signal(const Model& model, const SignalFeatures& s) {
  const FeatureTrack* track = &selected_frames(s, model.spec.high_energy_only);
  bool fallback = false;
  if (track->empty() && model.spec.high_energy_only) {
    track = &s.periodic;
    fallback = true;
  }
  std::vector<FeatureVector> xs;
  xs.reserve(track->size());
  for (const auto& f : track->frames) xs.push_back(to_vector(f));
  auto d = vote(xs, model.labels.size(), [&](const FeatureVector& x) { return model.predict(x); });
  d.used_fallback = fallback;
  return d;
}

// ---------------------------------------------------------------------------
// JSON

inline constexpr int kModelFormatVersion = 1;

namespace detail {

template <typename Derived>
nlohmann::json matrix_to_json(const Eigen::MatrixBase<Derived>& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(r).size()) != cols) throw DataError("ragged matrix in model file");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

inline nlohmann::json vector_to_json(const FeatureVector& v) { return {v[0], v[1], v[2]}; }

inline FeatureVector vector_from_json(const nlohmann::json& j) {
  if (j.size() != kFeatureDim) throw DataError("feature vector in model file must have 3 entries");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline nlohmann::json standardizer_to_json(const Standardizer& s) {
  return {{"mean", vector_to_json(s.mean)}, {"scale", vector_to_json(s.scale)}};
}

inline Standardizer standardizer_from_json(const nlohmann::json& j) {
  return {vector_from_json(j.at("mean")), vector_from_json(j.at("scale"))};
}

}  // namespace detail

inline nlohmann::json model_to_json(const Model& m) {
  using nlohmann::json;
  json j;
  j["format_version"] = kModelFormatVersion;
  j["classifier"] = to_string(m.spec.kind);
  j["display_name"] = m.spec.display_name();
  j["high_energy_only"] = m.spec.high_energy_only;
  j["standardize"] = to_string(m.spec.standardize);
  j["labels"] = m.labels.names();
  j["fingerprint"] = m.fingerprint;
  j["extraction"] = m.extraction;
  j["training_frames"] = {{"total", m.training_frames.total},
                          {"periodic", m.training_frames.periodic},
                          {"high_energy", m.training_frames.high_energy}};
  j["training_vectors"] = m.training_vectors;
  j["shrinkage"] = m.spec.shrinkage;
  j["k"] = m.spec.knn_k;
  j["metric"] = to_string(m.spec.metric);

  std::visit(
      [&](const auto& impl) {
        using T = std::decay_t<decltype(impl)>;
        if constexpr (std::is_same_v<T, QdaModel>) {
          j["shrinkage"] = impl.shrinkage();
          j["standardization"] = detail::standardizer_to_json(impl.standardizer());
          json classes = json::array();
          for (const auto& c : impl.classes())
            classes.push_back({{"mean", detail::vector_to_json(c.mean)},
                               {"covariance", detail::matrix_to_json(c.covariance)},
                               {"prior", c.prior},
                               {"count", c.count}});
          j["classes"] = classes;
        } else if constexpr (std::is_same_v<T, LdaModel>) {
          j["shrinkage"] = impl.shrinkage();
          j["standardization"] = detail::standardizer_to_json(impl.standardizer());
          j["pooled_covariance"] = detail::matrix_to_json(impl.pooled_covariance());
          json classes = json::array();
          for (std::size_t k = 0; k < impl.means().size(); ++k)
            classes.push_back({{"mean", detail::vector_to_json(impl.means()[k])},
                               {"prior", impl.priors()[k]},
                               {"count", impl.counts()[k]}});
          j["classes"] = classes;
        } else if constexpr (std::is_same_v<T, KnnIndex>) {
          j["k"] = impl.k();
          j["metric"] = to_string(impl.metric());
          j["standardization"] = detail::standardizer_to_json(impl.standardizer());
          json vs = json::array();
          for (const auto& v : impl.vectors()) vs.push_back(detail::vector_to_json(v));
          j["vectors"] = vs;
          j["vector_labels"] = impl.labels();
        } else {
          j["standardization"] = detail::standardizer_to_json(impl.standardizer());
          j["weights"] = detail::matrix_to_json(impl.weights());
        }
      },
      m.impl);
  return j;
}

inline Model model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw DataError("unsupported model format version " + j.at("format_version").dump());
    const auto kind = parse_classifier_kind(j.at("classifier").get<std::string>());
    if (!kind) throw DataError("unknown classifier kind in model file");
    Model m;
    m.spec.kind = *kind;
    m.spec.high_energy_only = j.at("high_energy_only").get<bool>();
    const auto z = j.at("standardize").get<std::string>();
    m.spec.standardize = z == "on" ? StandardizeMode::on : (z == "off" ? StandardizeMode::off : StandardizeMode::automatic);
    m.labels = LabelSet(j.at("labels").get<std::vector<std::string>>());
    m.fingerprint = j.at("fingerprint").get<std::string>();
    m.extraction = j.at("extraction").get<std::map<std::string, std::string>>();
    const auto& tf = j.at("training_frames");
    m.training_frames = {tf.at("total").get<std::size_t>(), tf.at("periodic").get<std::size_t>(),
                         tf.at("high_energy").get<std::size_t>()};
    m.training_vectors = j.at("training_vectors").get<std::size_t>();
    m.spec.shrinkage = j.at("shrinkage").get<double>();
    m.spec.knn_k = j.at("k").get<std::size_t>();
    m.spec.metric = j.at("metric").get<std::string>() == "cosine" ? KnnMetric::cosine : KnnMetric::euclidean;
    const auto std_ = detail::standardizer_from_json(j.at("standardization"));
    const std::size_t num_classes = m.labels.size();

    switch (*kind) {
      case ClassifierKind::qda: {
        m.spec.shrinkage = j.at("shrinkage").get<double>();
        std::vector<GaussianClass> classes;
        for (const auto& c : j.at("classes"))
          classes.push_back({detail::vector_from_json(c.at("mean")),
                             detail::matrix_from_json(c.at("covariance")),
                             c.at("prior").get<double>(), c.at("count").get<std::size_t>()});
        if (classes.size() != num_classes) throw DataError("model class count does not match its label set");
        m.impl = QdaModel(std::move(classes), m.spec.shrinkage, std_);
        break;
      }
      case ClassifierKind::lda: {
        m.spec.shrinkage = j.at("shrinkage").get<double>();
        std::vector<FeatureVector> means;
        std::vector<double> priors;
        std::vector<std::size_t> counts;
        for (const auto& c : j.at("classes")) {
          means.push_back(detail::vector_from_json(c.at("mean")));
          priors.push_back(c.at("prior").get<double>());
          counts.push_back(c.at("count").get<std::size_t>());
        }
        if (means.size() != num_classes) throw DataError("model class count does not match its label set");
        m.impl = LdaModel(std::move(means), std::move(priors), std::move(counts),
                          detail::matrix_from_json(j.at("pooled_covariance")), m.spec.shrinkage, std_);
        break;
      }
      case ClassifierKind::knn: {
        m.spec.knn_k = j.at("k").get<std::size_t>();
        m.spec.metric = j.at("metric").get<std::string>() == "cosine" ? KnnMetric::cosine : KnnMetric::euclidean;
        std::vector<FeatureVector> vs;
        for (const auto& v : j.at("vectors")) vs.push_back(detail::vector_from_json(v));
        auto labels = j.at("vector_labels").get<std::vector<ClassId>>();
        for (ClassId y : labels)
          if (y >= num_classes) throw DataError("kNN label out of range in model file");
        m.impl = KnnIndex(std::move(vs), std::move(labels), num_classes, m.spec.knn_k, m.spec.metric, std_);
        break;
      }
      case ClassifierKind::least_squares: {
        auto w = detail::matrix_from_json(j.at("weights"));
        if (w.rows() != kFeatureDim + 1 || w.cols() != static_cast<Eigen::Index>(num_classes))
          throw DataError("least-squares weight matrix has the wrong shape");
        m.impl = LeastSquaresModel(std::move(w), std_);
        break;
      }
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

}  // namespace vaclass
