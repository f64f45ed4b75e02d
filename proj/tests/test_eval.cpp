#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "test_helpers.hpp"
#include "vaclass/config.hpp"
#include "vaclass/eval.hpp"
#include "vaclass/synth.hpp"

using namespace vaclass;

namespace {

std::vector<ClassId> profile(const std::vector<std::size_t>& counts) {
  std::vector<ClassId> y;
  for (ClassId c = 0; c < counts.size(); ++c) y.insert(y.end(), counts[c], c);
  return y;
}

void check_partition(const FoldPlan& plan, std::size_t n) {
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (const auto& f : plan.folds) {
    total += f.size();
    seen.insert(f.begin(), f.end());
  }
  CHECK(total == n);
  CHECK(seen.size() == n);
  if (!seen.empty()) CHECK(*seen.rbegin() == n - 1);
}

}  // namespace

TEST_CASE("stratified folds on the 50/70/80/40 profile", "[eval]") {
  const auto y = profile({50, 70, 80, 40});
  const auto plan = kfold_split(y, LabelSet(), 10, 7);
  REQUIRE(plan.folds.size() == 10);
  check_partition(plan, 240);
  for (const auto& f : plan.folds) {
    CHECK(f.size() == 24);
    std::vector<int> c(4, 0);
    for (auto i : f) ++c[y[i]];
    CHECK(c == std::vector<int>{5, 7, 8, 4});
  }
  CHECK(kfold_split(y, LabelSet(), 10, 7) == plan);
  CHECK_FALSE(kfold_split(y, LabelSet(), 10, 8) == plan);
}

TEST_CASE("fold sizes differ by at most one", "[eval]") {
  Rng rng(50);
  for (int t = 0; t < 20; ++t) {
    const std::size_t k = 2 + rng.below(6);
    std::vector<std::size_t> counts(4);
    for (auto& c : counts) c = k + rng.below(20);
    const auto y = profile(counts);
    const auto plan = kfold_split(y, LabelSet(), k, t);
    check_partition(plan, y.size());
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& f : plan.folds) lo = std::min(lo, f.size()), hi = std::max(hi, f.size());
    CHECK(hi - lo <= 1);
    for (ClassId c = 0; c < 4; ++c) {
      std::size_t clo = SIZE_MAX, chi = 0;
      for (const auto& f : plan.folds) {
        std::size_t n = 0;
        for (auto i : f) n += y[i] == c;
        clo = std::min(clo, n), chi = std::max(chi, n);
      }
      CHECK(chi - clo <= 1);
    }
  }
}

TEST_CASE("small class with k = 2", "[eval]") {
  const LabelSet labels({"a", "b"});
  const auto plan = kfold_split(profile({3, 2}), labels, 2, 1);
  std::vector<std::size_t> a_sizes;
  for (const auto& f : plan.folds) a_sizes.push_back(std::count_if(f.begin(), f.end(), [](auto i) { return i < 3; }));
  std::sort(a_sizes.begin(), a_sizes.end());
  CHECK(a_sizes == std::vector<std::size_t>{1, 2});
}

TEST_CASE("fold planning errors", "[eval]") {
  CHECK_THROWS_AS(kfold_split(profile({5, 5, 5, 5}), LabelSet(), 1, 0), ConfigError);
  try {
    kfold_split(profile({50, 70, 80, 4}), LabelSet(), 10, 0);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("truck") != std::string::npos);
  }
}

TEST_CASE("confusion accuracy", "[eval]") {
  const auto table = ConfusionMatrix::from_rows({{27, 20, 3, 0}, {0, 70, 0, 0}, {16, 12, 48, 4}, {9, 11, 0, 20}});
  CHECK(table.total() == 240);
  CHECK(confusion_accuracy(table) == 68.75);
  CHECK(confusion_accuracy(ConfusionMatrix::from_rows({{50, 0, 0, 0}, {0, 70, 0, 0}, {0, 0, 80, 0}, {0, 0, 0, 40}})) == 100.0);
  CHECK(confusion_accuracy(ConfusionMatrix::from_rows({{0, 3}, {4, 0}})) == 0.0);
  CHECK_THROWS_AS(confusion_accuracy(ConfusionMatrix(4)), DataError);
}

TEST_CASE("cross-validation core with fixed predictors", "[eval]") {
  const auto y = profile({50, 70, 80, 40});
  const auto plan = kfold_split(y, LabelSet(), 10, 3);

  const auto majority = cross_validate(plan, y, 4, [&](const auto& train, const auto& test) {
    std::vector<std::size_t> counts(4, 0);
    for (auto i : train) ++counts[y[i]];
    const ClassId top = std::max_element(counts.begin(), counts.end()) - counts.begin();
    return std::vector<std::optional<ClassId>>(test.size(), top);
  });
  CHECK(std::abs(confusion_accuracy(majority.confusion) - 100.0 * 80 / 240) < 1e-12);
  CHECK(std::abs(mean_of(majority.fold_accuracies) - 100.0 * 80 / 240) < 1e-9);

  const auto perfect = cross_validate(plan, y, 4, [&](const auto&, const auto& test) {
    std::vector<std::optional<ClassId>> out;
    for (auto i : test) out.push_back(y[i]);
    return out;
  });
  CHECK(confusion_accuracy(perfect.confusion) == 100.0);
  for (ClassId c = 0; c < 4; ++c) CHECK(perfect.confusion.at(c, c) == perfect.confusion.row_sum(c));
  for (double a : perfect.fold_accuracies) CHECK(a == 100.0);

  // random predictions: accuracy of the matrix equals mean per-signal correctness
  Rng rng(51);
  std::vector<int> correct(y.size(), -1);
  const auto noisy = cross_validate(
      plan, y, 4,
      [&](const auto&, const auto& test) {
        std::vector<std::optional<ClassId>> out;
        for (auto i : test) {
          const ClassId p = rng.below(4);
          correct[i] = p == y[i];
          out.push_back(p);
        }
        return out;
      },
      1);
  double per_signal = 0;
  for (int c : correct) per_signal += c;
  CHECK(std::abs(confusion_accuracy(noisy.confusion) - 100.0 * per_signal / double(y.size())) < 1e-9);
  for (ClassId c = 0; c < 4; ++c) CHECK(noisy.confusion.row_sum(c) == std::vector<std::size_t>{50, 70, 80, 40}[c]);
}

TEST_CASE("unclassified signals count as errors outside the matrix", "[eval]") {
  const auto y = profile({4, 4});
  const auto plan = kfold_split(y, LabelSet({"a", "b"}), 2, 0);
  const auto out = cross_validate(plan, y, 2, [&](const auto&, const auto& test) {
    std::vector<std::optional<ClassId>> r;
    for (auto i : test) r.push_back(i == 0 ? std::nullopt : std::optional<ClassId>(y[i]));
    return r;
  });
  CHECK(out.unclassified == std::vector<std::size_t>{1, 0});
  CHECK(out.confusion.total() == 7);
  CHECK(mean_of(out.fold_accuracies) == Catch::Approx(100.0 * 7 / 8));
}

TEST_CASE("mean and sample deviation", "[eval]") {
  const std::vector<double> v{50.0, 56.66};
  EvaluationReport r;
  r.classifier = "QDA";
  r.labels = {"a", "b"};
  r.fold_accuracies = v;
  r.mean = mean_of(v);
  r.std = sample_std(v);
  r.confusion = ConfusionMatrix(2);
  r.fold_confusions = {ConfusionMatrix(2), ConfusionMatrix(2)};
  r.unclassified = {0, 0};
  r.fold_unclassified = {{0, 0}, {0, 0}};
  std::ostringstream text;
  emit_report(text, r, ReportFormat::text);
  CHECK(text.str().find("53.33 ± 4.71") != std::string::npos);
}

TEST_CASE("report formats on a real run", "[eval]") {
  const auto dir = testing::scratch_dir("eval_run");
  CliConfig cfg;
  cfg.synth_count = {6};
  cfg.synth_duration_s = 0.5;
  const auto dataset = write_synthetic_corpus(cfg.synth_spec(), cfg.labels, dir);
  const auto plan = kfold_split(dataset, 3, 9);
  const auto features = extract_dataset(dataset, cfg.extraction);
  const auto report = run_cv(features, dataset, cfg.extraction, cfg.classifier, plan);

  CHECK(std::abs(report.mean - mean_of(report.fold_accuracies)) < 1e-9);
  const auto counts = dataset.class_counts();
  for (ClassId c = 0; c < 4; ++c) CHECK(report.confusion.row_sum(c) + report.unclassified[c] == counts[c]);
  CHECK(report.frames == count_frames(features));
  CHECK(report.frames.high_energy < report.frames.periodic);

  std::ostringstream json;
  emit_report(json, report, ReportFormat::json);
  const auto parsed = report_from_json(nlohmann::json::parse(json.str()));
  CHECK(parsed == report);
  for (const char* key : {"classifier", "config", "fold_accuracies", "mean", "std", "confusion", "labels", "seed", "version"})
    CHECK(nlohmann::json::parse(json.str()).contains(key));

  std::ostringstream csv;
  emit_report(csv, report, ReportFormat::csv);
  const auto text = csv.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 3 + 1);

  // a second run over the same inputs produces identical bytes
  const auto again = run_cv(dataset, cfg.extraction, cfg.classifier, kfold_split(dataset, 3, 9));
  std::ostringstream json2;
  emit_report(json2, again, ReportFormat::json);
  CHECK(json2.str() == json.str());
}

TEST_CASE("fold models do not see the held-out signals", "[eval]") {
  const auto dir = testing::scratch_dir("eval_leak");
  CliConfig cfg;
  cfg.synth_count = {5};
  cfg.synth_duration_s = 0.5;
  const auto dataset = write_synthetic_corpus(cfg.synth_spec(), cfg.labels, dir);
  const auto plan = kfold_split(dataset, 5, 2);
  auto features = extract_dataset(dataset, cfg.extraction);
  const auto y = dataset.label_vector();
  const auto train = plan.training_indices(0);
  for (auto kind : {ClassifierKind::qda, ClassifierKind::knn, ClassifierKind::least_squares}) {
    ClassifierSpec spec;
    spec.kind = kind;
    spec.knn_k = 3;
    const auto before = model_to_json(fit_on_signals(spec, dataset.labels, features, y, train)).dump();
    auto perturbed = features;
    for (auto i : plan.folds[0])
      for (auto* track : {&perturbed[i].periodic, &perturbed[i].high_energy})
        for (auto& f : track->frames) f.energy *= 3.0, f.pitch_hz += 50.0;
    const auto after = model_to_json(fit_on_signals(spec, dataset.labels, perturbed, y, train)).dump();
    CHECK(before == after);
  }
}

TEST_CASE("comparison rows follow the table order", "[eval]") {
  const auto specs = comparison_specs(ClassifierSpec{});
  std::vector<std::string> names;
  for (const auto& s : specs) names.push_back(s.display_name());
  CHECK(names == std::vector<std::string>{"Least Square", "kNN, k=25, Cosine", "kNN, k=25, Euclidian", "LDA", "LDA**",
                                          "QDA", "QDA**"});
}
