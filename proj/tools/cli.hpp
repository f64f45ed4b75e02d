#pragma once

// Argument parsing for the vaclass tool. Kept in a header so the test suite
// can drive the same entry point in-process.

#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vaclass/commands.hpp"
#include "vaclass/version.hpp"

namespace vaclass::cli {

inline std::optional<ReportFormat> format_from(const std::string& s) { return parse_report_format(s); }

/// Runs the tool on `args` (without the program name); returns the exit code.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Vehicle audio classification from short-time energy, zero-cross rate and pitch.", "vaclass"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kVersion));
  const std::string footer =
      "\nPrecedence: built-in defaults < --config file < --set < dedicated flags.\n"
      "Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 numeric failure.\n\n" +
      config_keys_help();
  app.footer(footer);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string format_name = "text";
  std::vector<std::string> assignments;
  std::size_t threads = 0;
  app.add_option("--config", config_path, "config file of key = value lines")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "seed for folds and synthetic data (overrides the seed key)");
  app.add_option("--format", format_name, "report format")->check(CLI::IsMember({"text", "csv", "json"}));
  app.add_option("--set", assignments, "override one config key: key=value (repeatable)")
      ->allow_extra_args(false);
  app.add_option("--threads", threads, "worker threads (0 = all cores)");

  std::string manifest;
  std::string out_path;
  std::string model_path;
  std::vector<std::string> inputs;
  bool compare = false;
  std::string classifier_name;
  std::optional<std::size_t> folds;

  auto* extract = app.add_subcommand("extract", "per-frame feature CSV for a manifest");
  extract->add_option("manifest", manifest, "manifest CSV (path,label)")->required();
  extract->add_option("-o,--out", out_path, "output CSV (default: stdout)");

  auto* train = app.add_subcommand("train", "fit a classifier on every signal of a manifest");
  train->add_option("manifest", manifest, "manifest CSV (path,label)")->required();
  train->add_option("-m,--model", model_path, "model file to write")->required();
  train->add_option("--classifier", classifier_name, "qda | lda | knn | least_squares");

  auto* classify = app.add_subcommand("classify", "label WAV files with a trained model");
  classify->add_option("-m,--model", model_path, "model file")->required()->check(CLI::ExistingFile);
  classify->add_option("inputs", inputs, "WAV files")->required();

  auto* evaluate = app.add_subcommand("evaluate", "k-fold cross-validation over a manifest");
  evaluate->add_option("manifest", manifest, "manifest CSV (path,label)")->required();
  evaluate->add_flag("--compare", compare, "run all seven comparison classifiers");
  evaluate->add_option("--classifier", classifier_name, "qda | lda | knn | least_squares");
  evaluate->add_option("--folds", folds, "number of folds");
  evaluate->add_option("-o,--out", out_path, "output file (default: stdout)");

  auto* synth = app.add_subcommand("synth", "write a synthetic labeled corpus");
  synth->add_option("-o,--out-dir", out_path, "output directory")->required();

  for (auto* sub : {extract, train, classify, evaluate, synth}) sub->footer(footer);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // help requested on a subcommand is reported as CallForHelp above; every
    // other parse failure is a usage error
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitConfig;
  }

  try {
    CliConfig config;
    if (!config_path.empty()) config = load_config(config_path, config);
    for (const auto& a : assignments) apply_assignment(config, a);
    if (seed) config.seed = *seed;
    if (!classifier_name.empty()) set_config_value(config, "classifier", classifier_name);
    if (folds) config.folds = *folds;
    config.extraction.validate();
    const auto format = *format_from(format_name);

    std::ofstream file;
    std::ostream* sink = &out;
    if (!out_path.empty() && (extract->parsed() || evaluate->parsed())) {
      file.open(out_path, std::ios::binary);
      if (!file) throw DataError("cannot write '" + out_path + "'");
      sink = &file;
    }

    if (extract->parsed()) return cmd_extract(config, manifest, *sink, threads);
    if (train->parsed()) return cmd_train(config, manifest, model_path, out, threads);
    if (classify->parsed()) {
      std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
      return cmd_classify(config, model_path, paths, format, out, threads);
    }
    if (evaluate->parsed()) return cmd_evaluate(config, manifest, compare, format, *sink, threads);
    if (synth->parsed()) return cmd_synth(config, out_path, out);
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace vaclass::cli
