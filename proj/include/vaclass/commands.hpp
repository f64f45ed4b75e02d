#pragma once

// The operations behind each CLI subcommand. They throw ConfigError /
// DataError / NumericError on failure and return the process exit code.

#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vaclass/audio_io.hpp"
#include "vaclass/classify.hpp"
#include "vaclass/config.hpp"
#include "vaclass/error.hpp"
#include "vaclass/eval.hpp"
#include "vaclass/features.hpp"
#include "vaclass/format.hpp"
#include "vaclass/synth.hpp"

namespace vaclass {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Feature CSV for every signal of the manifest, grouped in manifest order.
inline int cmd_extract(const CliConfig& config, const std::filesystem::path& manifest, std::ostream& out,
                       std::size_t threads = 0) {
  const auto dataset = load_manifest(manifest, config.labels);
  const auto features = extract_dataset(dataset, config.extraction, threads);
  out << kFeatureCsvHeader << '\n';
  for (std::size_t i = 0; i < dataset.size(); ++i)
    write_feature_rows(out, dataset.entries[i].path.generic_string(), features[i]);
  return kExitOk;
}

inline Model train_model(const CliConfig& config, const LabeledDataset& dataset,
                         std::span<const SignalFeatures> features) {
  std::vector<std::size_t> all(dataset.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto y = dataset.label_vector();
  auto model = fit_on_signals(config.classifier, dataset.labels, features, y, all);
  model.fingerprint = extraction_fingerprint(config.extraction);
  model.extraction = extraction_settings(config.extraction);
  return model;
}

inline void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file '" + path.string() + "'");
  out << model_to_json(model).dump(1) << '\n';
  if (!out) throw DataError("failed writing model file '" + path.string() + "'");
}

inline Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read model file '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

inline int cmd_train(const CliConfig& config, const std::filesystem::path& manifest,
                     const std::filesystem::path& model_path, std::ostream& out, std::size_t threads = 0) {
  const auto dataset = load_manifest(manifest, config.labels);
  const auto features = extract_dataset(dataset, config.extraction, threads);
  const auto model = train_model(config, dataset, features);
  save_model(model, model_path);
  const auto& fc = model.training_frames;
  out << "trained " << config.classifier.display_name() << " on " << dataset.size() << " signals (frames: total "
      << fc.total << ", periodic " << fc.periodic << ", high-energy " << fc.high_energy << ") -> "
      << model_path.string() << '\n';
  return kExitOk;
}

/// One line per input file, in input order. Exits with kExitData if any file
/// was unclassifiable.
inline int cmd_classify(const CliConfig& config, const std::filesystem::path& model_path,
                        const std::vector<std::filesystem::path>& inputs, ReportFormat format, std::ostream& out,
                        std::size_t threads = 0) {
  const auto model = load_model(model_path);
  const auto expected = extraction_fingerprint(config.extraction);
  if (model.fingerprint != expected)
    throw ConfigError("model was trained with different extraction settings (fingerprint " + model.fingerprint +
                      ", current " + expected + "); pass the training config");
  if (inputs.empty()) throw ConfigError("no input files");

  std::vector<SignalDecision> decisions(inputs.size());
  parallel_for(
      inputs.size(),
      [&](std::size_t i) {
        try {
          decisions[i] = classify_signal(model, analyze_signal(load_wav(inputs[i]), config.extraction));
        } catch (const DataError& e) {
          throw DataError(inputs[i].string() + ": " + e.what());
        }
      },
      threads);

  const auto& labels = model.labels;
  const auto label_of = [&](const SignalDecision& d) { return d.label ? labels.name(*d.label) : "unclassifiable"; };
  bool all_ok = true;
  switch (format) {
    case ReportFormat::text:
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        out << inputs[i].string() << '\t' << label_of(decisions[i]);
        for (ClassId c = 0; c < labels.size(); ++c)
          out << '\t' << labels.name(c) << '=' << format_fixed(decisions[i].fractions[c], 4);
        out << '\n';
      }
      break;
    case ReportFormat::csv:
      out << "path,label";
      for (const auto& n : labels.names()) out << ',' << n;
      out << '\n';
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        out << inputs[i].string() << ',' << label_of(decisions[i]);
        for (double f : decisions[i].fractions) out << ',' << format_double(f);
        out << '\n';
      }
      break;
    case ReportFormat::json: {
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        nlohmann::json fr = nlohmann::json::object();
        for (ClassId c = 0; c < labels.size(); ++c) fr[labels.name(c)] = decisions[i].fractions[c];
        rows.push_back({{"path", inputs[i].string()},
                        {"label", label_of(decisions[i])},
                        {"fractions", fr},
                        {"frames", decisions[i].frames_used}});
      }
      out << rows.dump(2) << '\n';
      break;
    }
  }
  for (const auto& d : decisions) all_ok = all_ok && d.label.has_value();
  return all_ok ? kExitOk : kExitData;
}

inline int cmd_evaluate(const CliConfig& config, const std::filesystem::path& manifest, bool compare,
                        ReportFormat format, std::ostream& out, std::size_t threads = 0) {
  const auto dataset = load_manifest(manifest, config.labels);
  const auto plan = kfold_split(dataset, config.folds, config.seed);
  const auto features = extract_dataset(dataset, config.extraction, threads);
  if (!compare) {
    emit_report(out, run_cv(features, dataset, config.extraction, config.classifier, plan, threads), format);
    return kExitOk;
  }
  std::vector<EvaluationReport> rows;
  for (const auto& spec : comparison_specs(config.classifier))
    rows.push_back(run_cv(features, dataset, config.extraction, spec, plan, threads));
  emit_comparison(out, rows, format);
  return kExitOk;
}

inline int cmd_synth(const CliConfig& config, const std::filesystem::path& out_dir, std::ostream& out) {
  const auto spec = config.synth_spec();
  const auto dataset = write_synthetic_corpus(spec, config.labels, out_dir);
  out << "wrote " << dataset.size() << " signals and " << (out_dir / "manifest.csv").string() << '\n';
  return kExitOk;
}

}  // namespace vaclass
