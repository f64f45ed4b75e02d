#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "cli.hpp"
#include "test_helpers.hpp"

using namespace vaclass;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

/// Small corpus shared by the CLI tests.
const std::filesystem::path& corpus() {
  static const auto dir = [] {
    auto d = testing::scratch_dir("cli_corpus");
    const auto r = run({"synth", "-o", d.string(), "--set", "synth_count=10", "--set", "synth_duration_s=1"});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("help lists every config key with its default", "[cli]") {
  for (const char* sub : {"extract", "train", "classify", "evaluate", "synth"}) {
    const auto r = run({sub, "--help"});
    CHECK(r.code == 0);
    for (const auto& k : config_keys()) CHECK(r.out.find(k.name + " = " + k.get(CliConfig{})) != std::string::npos);
  }
  CHECK(run({"--help"}).code == 0);
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
}

TEST_CASE("extract writes grouped, deterministic rows", "[cli]") {
  const auto dir = testing::scratch_dir("cli_extract");
  CliConfig c;
  c.synth_count = {1};
  c.synth_duration_s = 0.5;
  auto d = write_synthetic_corpus(c.synth_spec(), c.labels, dir);
  d.entries.resize(3);
  write_wav16(dir / "silence.wav", {std::vector<double>(5000, 0.0), 11025});
  d.entries.push_back({dir / "silence.wav", 0});
  write_manifest(d, dir / "m.csv");

  const auto a = run({"extract", (dir / "m.csv").string()});
  REQUIRE(a.code == 0);
  const auto b = run({"extract", (dir / "m.csv").string()});
  CHECK(a.out == b.out);
  std::istringstream lines(a.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == kFeatureCsvHeader);
  std::vector<std::string> order;
  while (std::getline(lines, line)) {
    const auto name = line.substr(0, line.find(','));
    if (order.empty() || order.back() != name) order.push_back(name);
    if (name.find("silence") != std::string::npos) CHECK(line.substr(line.size() - 4) == ",0,0");
  }
  REQUIRE(order.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(order[i] == d.entries[i].path.generic_string());

  const auto out_file = dir / "features.csv";
  CHECK(run({"extract", (dir / "m.csv").string(), "-o", out_file.string()}).code == 0);
  CHECK(testing::read_text(out_file) == a.out);
}

TEST_CASE("train, classify and the fingerprint check", "[cli]") {
  const auto dir = testing::scratch_dir("cli_train");
  const auto manifest = (corpus() / "manifest.csv").string();
  const auto model = (dir / "qda.json").string();
  auto r = run({"train", manifest, "-m", model});
  REQUIRE(r.code == 0);
  const auto first = testing::read_text(model);
  CHECK(nlohmann::json::parse(first)["classes"].size() == 4);
  REQUIRE(run({"train", manifest, "-m", model}).code == 0);
  CHECK(testing::read_text(model) == first);

  const auto high_energy = (dir / "qda_high_energy.json").string();
  REQUIRE(run({"train", manifest, "-m", high_energy, "--set", "high_energy_only=true"}).code == 0);
  const auto ja = nlohmann::json::parse(first);
  const auto jb = nlohmann::json::parse(testing::read_text(high_energy));
  CHECK(ja["training_frames"] == jb["training_frames"]);
  CHECK(ja["training_vectors"] == ja["training_frames"]["periodic"]);
  CHECK(jb["training_vectors"] == jb["training_frames"]["high_energy"]);
  CHECK(jb["training_vectors"] < ja["training_vectors"]);

  const auto bus = (corpus() / "bus_000.wav").string();
  const auto truck = (corpus() / "truck_003.wav").string();
  r = run({"classify", "-m", model, truck, bus});
  REQUIRE(r.code == 0);
  REQUIRE(count_lines(r.out) == 2);
  CHECK(r.out.find(truck + "\ttruck\t") == 0);
  CHECK(r.out.find("\n" + bus + "\tbus\t") != std::string::npos);

  r = run({"classify", "-m", model, "--set", "alpha=2", bus});
  CHECK(r.code == 1);
  CHECK(r.err.find("fingerprint") != std::string::npos);

  write_wav16(dir / "quiet.wav", {std::vector<double>(11025, 0.0), 11025});
  r = run({"classify", "-m", model, (dir / "quiet.wav").string(), bus});
  CHECK(r.code != 0);
  CHECK(r.out.find("unclassifiable") != std::string::npos);
  CHECK(count_lines(r.out) == 2);

  r = run({"--format", "json", "classify", "-m", model, bus});
  CHECK(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)[0]["label"] == "bus");
}

TEST_CASE("evaluate and compare", "[cli]") {
  const auto manifest = (corpus() / "manifest.csv").string();
  auto a = run({"evaluate", manifest, "--folds", "5", "--seed", "3", "--format", "json"});
  REQUIRE(a.code == 0);
  const auto b = run({"evaluate", manifest, "--folds", "5", "--seed", "3", "--format", "json"});
  CHECK(a.out == b.out);
  const auto j = nlohmann::json::parse(a.out);
  CHECK(j["fold_accuracies"].size() == 5);
  CHECK(j["seed"] == 3);

  const auto csv = run({"evaluate", manifest, "--folds", "5", "--format", "csv"});
  CHECK(count_lines(csv.out) == 6);

  const auto cmp = run({"evaluate", manifest, "--compare", "--folds", "5", "--set", "knn_k=5"});
  REQUIRE(cmp.code == 0);
  std::istringstream lines(cmp.out);
  std::string line;
  std::vector<std::string> rows;
  std::getline(lines, line);
  while (std::getline(lines, line)) rows.push_back(line.substr(0, line.find("  ")));
  CHECK(rows == std::vector<std::string>{"Least Square", "kNN, k=5, Cosine", "kNN, k=5, Euclidian", "LDA", "LDA**",
                                         "QDA", "QDA**"});

  const auto too_many = run({"evaluate", manifest, "--folds", "11"});
  CHECK(too_many.code == 2);
  CHECK(too_many.err.find("bus") != std::string::npos);
}

TEST_CASE("config file and exit codes", "[cli]") {
  const auto dir = testing::scratch_dir("cli_cfg");
  testing::write_text(dir / "bad.cfg", "no_such_key = 3\n");
  CHECK(run({"--config", (dir / "bad.cfg").string(), "synth", "-o", (dir / "x").string()}).code == 1);
  testing::write_text(dir / "ok.cfg", "synth_count = 2\nsynth_duration_s = 0.5\n");
  auto r = run({"--config", (dir / "ok.cfg").string(), "synth", "-o", (dir / "y").string()});
  CHECK(r.code == 0);
  CHECK(load_manifest(dir / "y" / "manifest.csv", LabelSet()).size() == 8);
  // --set overrides the file
  r = run({"--config", (dir / "ok.cfg").string(), "--set", "synth_count=3", "synth", "-o", (dir / "z").string()});
  CHECK(load_manifest(dir / "z" / "manifest.csv", LabelSet()).size() == 12);

  CHECK(run({"evaluate", (dir / "missing.csv").string()}).code == 2);

  // a model whose covariance is not positive definite is a numeric failure
  const auto model = dir / "m.json";
  REQUIRE(run({"train", (corpus() / "manifest.csv").string(), "-m", model.string()}).code == 0);
  auto j = nlohmann::json::parse(testing::read_text(model));
  j["classes"][1]["covariance"] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  testing::write_text(model, j.dump());
  r = run({"classify", "-m", model.string(), (corpus() / "bus_000.wav").string()});
  CHECK(r.code == 3);
}
