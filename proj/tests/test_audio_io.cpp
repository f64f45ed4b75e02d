#include <catch2/catch_amalgamated.hpp>

#include <cstring>

#include "test_helpers.hpp"
#include "vaclass/audio_io.hpp"

using namespace vaclass;
using Catch::Approx;

TEST_CASE("16-bit PCM scales by full scale", "[audio_io]") {
  const auto dir = testing::scratch_dir("wav16");
  const std::vector<unsigned char> data{0x00, 0x00, 0x00, 0x40, 0x00, 0x80};  // 0, 16384, -32768
  testing::write_raw_wav(dir / "a.wav", 1, 1, 11025, 16, data);
  const auto s = load_wav(dir / "a.wav");
  REQUIRE(s.sample_rate_hz == 11025.0);
  REQUIRE(s.samples == std::vector<double>{0.0, 0.5, -1.0});
}

TEST_CASE("8, 24 and 32-bit PCM and float32 decode", "[audio_io]") {
  const auto dir = testing::scratch_dir("wavfmt");
  testing::write_raw_wav(dir / "u8.wav", 1, 1, 8000, 8, {128, 192, 0});
  CHECK(load_wav(dir / "u8.wav").samples == std::vector<double>{0.0, 0.5, -1.0});

  testing::write_raw_wav(dir / "s24.wav", 1, 1, 8000, 24, {0x00, 0x00, 0x40, 0x00, 0x00, 0x80});
  CHECK(load_wav(dir / "s24.wav").samples == std::vector<double>{0.5, -1.0});

  testing::write_raw_wav(dir / "s32.wav", 1, 1, 8000, 32, {0, 0, 0, 0xC0});
  CHECK(load_wav(dir / "s32.wav").samples == std::vector<double>{-0.5});

  std::vector<unsigned char> f(8);
  const float vals[2] = {0.25f, -0.75f};
  std::memcpy(f.data(), vals, 8);
  testing::write_raw_wav(dir / "f32.wav", 3, 1, 8000, 32, f);
  CHECK(load_wav(dir / "f32.wav").samples == std::vector<double>{0.25, -0.75});
}

TEST_CASE("length equals the data chunk sample count", "[audio_io]") {
  const auto dir = testing::scratch_dir("wavlen");
  std::vector<unsigned char> data(2 * 1234, 0);
  testing::write_raw_wav(dir / "a.wav", 1, 1, 22050, 16, data);
  CHECK(load_wav(dir / "a.wav").size() == 1234);
}

TEST_CASE("stereo, missing, non-WAV and unsupported encodings are rejected", "[audio_io]") {
  const auto dir = testing::scratch_dir("wavbad");
  testing::write_raw_wav(dir / "stereo.wav", 1, 2, 8000, 16, {0, 0, 0, 0});
  CHECK_THROWS_AS(load_wav(dir / "stereo.wav"), DataError);
  CHECK_THROWS_AS(load_wav(dir / "missing.wav"), DataError);
  testing::write_text(dir / "text.wav", "hello, this is not a RIFF file at all");
  CHECK_THROWS_AS(load_wav(dir / "text.wav"), DataError);
  testing::write_raw_wav(dir / "alaw.wav", 6, 1, 8000, 8, {1, 2});
  CHECK_THROWS_AS(load_wav(dir / "alaw.wav"), DataError);
  testing::write_raw_wav(dir / "pcm12.wav", 1, 1, 8000, 12, {1, 2});
  CHECK_THROWS_AS(load_wav(dir / "pcm12.wav"), DataError);
}

TEST_CASE("write then read is within one 16-bit step", "[audio_io]") {
  const auto dir = testing::scratch_dir("wavrt");
  Rng rng(3);
  AudioSignal s{testing::uniform_noise(rng, 500), 11025.0};
  write_wav16(dir / "rt.wav", s);
  const auto back = load_wav(dir / "rt.wav");
  REQUIRE(back.size() == s.size());
  CHECK(back.sample_rate_hz == 11025.0);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(back.samples[i] - s.samples[i]) <= 1.0 / 32768.0);
}

TEST_CASE("normalize", "[audio_io]") {
  CHECK(normalize({{0.2, -0.4}, 8000}).samples == std::vector<double>{0.5, -1.0});
  CHECK(normalize({{0.0, 0.0, 0.0}, 8000}).samples == std::vector<double>{0.0, 0.0, 0.0});
  CHECK_THROWS_AS(normalize({{}, 8000}), DataError);

  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    AudioSignal s{testing::uniform_noise(rng, 97, -3.0, 2.0), 8000};
    s.samples[5] = 0.0;
    const auto n = normalize(s);
    double peak = 0.0;
    for (double v : n.samples) peak = std::max(peak, std::abs(v));
    CHECK(peak == 1.0);
    CHECK(normalize(n) == n);
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK((s.samples[i] > 0) == (n.samples[i] > 0));
      CHECK((s.samples[i] == 0) == (n.samples[i] == 0));
    }
  }
}

TEST_CASE("label sets reject duplicates and empties", "[audio_io]") {
  CHECK(LabelSet().names() == std::vector<std::string>{"bus", "car", "motor", "truck"});
  CHECK_THROWS_AS(LabelSet(std::vector<std::string>{}), ConfigError);
  CHECK_THROWS_AS(LabelSet({"a", "a"}), ConfigError);
  CHECK_THROWS_AS(LabelSet({"a,b"}), ConfigError);
  CHECK(LabelSet({"x", "y"}).find("y") == ClassId{1});
  CHECK_FALSE(LabelSet({"x", "y"}).find("z"));
}

TEST_CASE("manifest with the 50/70/80/40 profile", "[audio_io]") {
  const auto dir = testing::scratch_dir("manifest");
  std::string text = "path,label\n# comment\n\n";
  const char* names[] = {"bus", "car", "motor", "truck"};
  const int counts[] = {50, 70, 80, 40};
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < counts[c]; ++i) text += std::string("sub/") + names[c] + std::to_string(i) + ".wav," + names[c] + "\n";
  testing::write_text(dir / "m.csv", text);
  const auto d = load_manifest(dir / "m.csv", LabelSet());
  CHECK(d.size() == 240);
  CHECK(d.class_counts() == std::vector<std::size_t>{50, 70, 80, 40});
  CHECK(d.entries[0].path == (dir / "sub" / "bus0.wav").lexically_normal());
}

TEST_CASE("manifest errors", "[audio_io]") {
  const auto dir = testing::scratch_dir("manifest_err");
  testing::write_text(dir / "van.csv", "path,label\na.wav,bus\nb.wav,van\n");
  try {
    load_manifest(dir / "van.csv", LabelSet());
    FAIL("expected an error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":3") != std::string::npos);
    CHECK(msg.find("van") != std::string::npos);
    CHECK(msg.find("bus, car, motor, truck") != std::string::npos);
  }
  testing::write_text(dir / "empty.csv", "");
  CHECK_THROWS_AS(load_manifest(dir / "empty.csv", LabelSet()), DataError);
  testing::write_text(dir / "header_only.csv", "path,label\n");
  CHECK_THROWS_AS(load_manifest(dir / "header_only.csv", LabelSet()), DataError);
  testing::write_text(dir / "dup.csv", "path,label\na.wav,bus\n./a.wav,car\n");
  CHECK_THROWS_AS(load_manifest(dir / "dup.csv", LabelSet()), DataError);
  testing::write_text(dir / "noheader.csv", "a.wav,bus\n");
  CHECK_THROWS_AS(load_manifest(dir / "noheader.csv", LabelSet()), DataError);
}

TEST_CASE("manifest round trip", "[audio_io]") {
  const auto dir = testing::scratch_dir("manifest_rt");
  LabeledDataset d{LabelSet({"a", "b", "c"}), {}};
  d.entries.push_back({dir / "x" / "one.wav", 2});
  d.entries.push_back({dir / "two, with comma.wav", 0});
  d.entries.push_back({dir / "three.wav", 1});
  write_manifest(d, dir / "m.csv");
  CHECK(load_manifest(dir / "m.csv", d.labels) == d);
}
