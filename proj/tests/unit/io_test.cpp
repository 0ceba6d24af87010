#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "noisectx/io.hpp"
#include "test_support.hpp"

namespace noisectx {
namespace {

namespace fs = std::filesystem;
using testing::scratch_dir;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}
void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::string wav_header(std::uint16_t channels, std::uint16_t bits, std::uint32_t data_bytes) {
  std::string s = "RIFF";
  put_u32(s, 36 + data_bytes);
  s += "WAVEfmt ";
  put_u32(s, 16);
  put_u16(s, 1);
  put_u16(s, channels);
  put_u32(s, 16000);
  put_u32(s, 16000 * channels * bits / 8);
  put_u16(s, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(s, bits);
  s += "data";
  put_u32(s, data_bytes);
  return s;
}

TEST(Wav, RoundTripWithin16BitQuantization) {
  auto dir = scratch_dir("wav");
  Waveform w;
  for (int i = 0; i < 1000; ++i) w.samples.push_back(std::sin(0.01 * i) * 0.9);
  write_wav(dir / "a.wav", w);
  auto r = read_wav(dir / "a.wav");
  ASSERT_EQ(r.samples.size(), w.samples.size());
  EXPECT_EQ(r.sample_rate, 16000);
  for (std::size_t i = 0; i < w.samples.size(); ++i) EXPECT_NEAR(r.samples[i], w.samples[i], 1.0 / 32767);
}

TEST(Wav, HeaderIsCanonicalPcm) {
  auto dir = scratch_dir("wav_header");
  Waveform w;
  w.samples = {0.0, 1.0, -1.0, 2.0};
  write_wav(dir / "h.wav", w);
  const std::string bytes = slurp(dir / "h.wav");
  EXPECT_EQ(bytes.substr(0, 36), wav_header(1, 16, 8).substr(0, 36));
  // clamped extremes
  std::int16_t last;
  std::memcpy(&last, bytes.data() + 44 + 6, 2);
  EXPECT_EQ(last, 32767);
}

TEST(Wav, RejectsStereoAnd8Bit) {
  auto dir = scratch_dir("wav_bad");
  for (auto [ch, bits] : {std::pair<std::uint16_t, std::uint16_t>{2, 16}, {1, 8}}) {
    std::string bytes = wav_header(ch, bits, 4) + std::string(4, '\0');
    std::ofstream(dir / "bad.wav", std::ios::binary) << bytes;
    EXPECT_THROW(read_wav(dir / "bad.wav"), IoError);
  }
  std::ofstream(dir / "junk.wav", std::ios::binary) << "not audio";
  EXPECT_THROW(read_wav(dir / "junk.wav"), IoError);
  EXPECT_THROW(read_wav(dir / "missing.wav"), IoError);
}

TEST(FeatureDump, LayoutAndRoundTrip) {
  auto dir = scratch_dir("dump");
  FeatureSequence seq{testing::random_tensor({3, 128}, 1), 0.010, 0.032};
  for (auto& v : seq.frames.values()) v = static_cast<float>(v);
  write_feature_dump(dir / "f.ncfd", seq);
  const std::string bytes = slurp(dir / "f.ncfd");
  ASSERT_EQ(bytes.size(), 4 + 4 + 4 + 4 + 4 + 3 * 128 * 4u);
  EXPECT_EQ(bytes.substr(0, 4), "NCFD");
  std::uint32_t t, f;
  float hop, win, first;
  std::memcpy(&t, bytes.data() + 4, 4);
  std::memcpy(&f, bytes.data() + 8, 4);
  std::memcpy(&hop, bytes.data() + 12, 4);
  std::memcpy(&win, bytes.data() + 16, 4);
  std::memcpy(&first, bytes.data() + 20, 4);
  EXPECT_EQ(t, 3u);
  EXPECT_EQ(f, 128u);
  EXPECT_EQ(hop, 0.010f);
  EXPECT_EQ(win, 0.032f);
  EXPECT_EQ(first, static_cast<float>(seq.frames[0]));

  auto back = read_feature_dump(dir / "f.ncfd");
  EXPECT_EQ(back.frames, seq.frames);
  EXPECT_NEAR(back.hop_seconds, 0.010, 1e-9);
}

TEST(FeatureDump, RejectsTruncatedFile) {
  auto dir = scratch_dir("dump_bad");
  FeatureSequence seq{TensorD({2, 4}, 1.0), 0.01, 0.032};
  write_feature_dump(dir / "f.ncfd", seq);
  std::string bytes = slurp(dir / "f.ncfd");
  std::ofstream(dir / "t.ncfd", std::ios::binary) << bytes.substr(0, bytes.size() - 2);
  EXPECT_THROW(read_feature_dump(dir / "t.ncfd"), IoError);
}

TEST(Manifest, RoundTripResolvesRelativePaths) {
  auto dir = scratch_dir("manifest");
  ManifestRecord with{"a", "snr_0/a_context.wav", "snr_0/a_noisy.wav", "snr_0/a_clean.ncfd", "snr_0/a_noise.ncfd", -5};
  ManifestRecord without{"b", {}, "b_noisy.wav", "b_clean.ncfd", "b_noise.ncfd", 2.5};
  write_manifest(dir / "m.tsv", {with, without});
  const std::string text = slurp(dir / "m.tsv");
  EXPECT_EQ(text[0], '#');
  EXPECT_NE(text.find("b\t-\tb_noisy.wav"), std::string::npos);

  auto recs = read_manifest(dir / "m.tsv");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].context_wav, dir / "snr_0/a_context.wav");
  EXPECT_EQ(recs[0].snr_db, -5.0);
  EXPECT_FALSE(recs[1].has_context());
  EXPECT_EQ(recs[1].snr_db, 2.5);
}

TEST(Manifest, MalformedLineIsAnIoError) {
  auto dir = scratch_dir("manifest_bad");
  std::ofstream(dir / "m.tsv") << "# header\nid\tonly\n";
  EXPECT_THROW(read_manifest(dir / "m.tsv"), IoError);
}

}  // namespace
}  // namespace noisectx
