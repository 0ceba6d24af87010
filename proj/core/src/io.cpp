#include "noisectx/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace noisectx {
namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::string where = "'" + path.string() + "'";
  if (bytes.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0) {
    throw IoError(where + " is not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  bool have_fmt = false;
  int sample_rate = 0;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = get_u32(p + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw IoError(where + ": truncated chunk");
    if (std::memcmp(p + pos, "fmt ", 4) == 0) {
      if (size < 16) throw IoError(where + ": short fmt chunk");
      const std::uint16_t format = get_u16(p + body);
      const std::uint16_t channels = get_u16(p + body + 2);
      sample_rate = static_cast<int>(get_u32(p + body + 4));
      const std::uint16_t bits = get_u16(p + body + 14);
      if (format != 1 || channels != 1 || bits != 16) {
        throw IoError(where + ": only mono 16-bit PCM is supported (format " + std::to_string(format) + ", " +
                      std::to_string(channels) + " channels, " + std::to_string(bits) + " bits)");
      }
      have_fmt = true;
    } else if (std::memcmp(p + pos, "data", 4) == 0) {
      if (!have_fmt) throw IoError(where + ": data chunk before fmt chunk");
      Waveform wave;
      wave.sample_rate = sample_rate;
      wave.samples.resize(size / 2);
      for (std::size_t i = 0; i < wave.samples.size(); ++i) {
        const auto s = static_cast<std::int16_t>(get_u16(p + body + 2 * i));
        wave.samples[i] = static_cast<double>(s) / 32767.0;
      }
      return wave;
    }
    pos = body + size + (size & 1u);
  }
  throw IoError(where + ": no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate * 2));
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : wave.samples) {
    const double clamped = std::clamp(s, -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  write_file(path, out);
}

void write_feature_dump(const std::filesystem::path& path, const FeatureSequence& features) {
  const TensorD& f = features.frames;
  if (f.rank() != 2) throw DimensionError("feature dump needs a [T x F] matrix, got " + shape_str(f.shape()));
  std::string out(kFeatureDumpMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(f.rows()));
  put_u32(out, static_cast<std::uint32_t>(f.cols()));
  put_f32(out, static_cast<float>(features.hop_seconds));
  put_f32(out, static_cast<float>(features.window_seconds));
  for (double v : f.values()) put_f32(out, static_cast<float>(v));
  write_file(path, out);
}

FeatureSequence read_feature_dump(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 20 || std::memcmp(p, kFeatureDumpMagic, 4) != 0) {
    throw IoError("'" + path.string() + "' is not a feature dump");
  }
  const std::size_t frames = get_u32(p + 4);
  const std::size_t dims = get_u32(p + 8);
  if (frames == 0 || dims == 0 || bytes.size() != 20 + 4 * frames * dims) {
    throw IoError("'" + path.string() + "': size does not match header");
  }
  FeatureSequence seq;
  seq.hop_seconds = std::bit_cast<float>(get_u32(p + 12));
  seq.window_seconds = std::bit_cast<float>(get_u32(p + 16));
  seq.frames = TensorD({frames, dims});
  for (std::size_t i = 0; i < frames * dims; ++i) seq.frames[i] = std::bit_cast<float>(get_u32(p + 20 + 4 * i));
  return seq;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records) {
  std::ostringstream out;
  out << "# id\tcontext_wav\tnoisy_wav\tclean_mel\tnoise_mel\tsnr_db\n";
  for (const auto& r : records) {
    out << r.id << '\t' << (r.has_context() ? r.context_wav.generic_string() : "-") << '\t'
        << r.noisy_wav.generic_string() << '\t' << r.clean_mel.generic_string() << '\t'
        << r.noise_mel.generic_string() << '\t' << std::setprecision(17) << r.snr_db << '\n';
  }
  write_file(path, out.str());
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& rel) { return rel == "-" ? std::filesystem::path{} : base / rel; };
  std::vector<ManifestRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 6) {
      throw IoError("'" + path.string() + "' line " + std::to_string(line_no) + ": expected 6 fields");
    }
    ManifestRecord r;
    r.id = fields[0];
    r.context_wav = resolve(fields[1]);
    r.noisy_wav = resolve(fields[2]);
    r.clean_mel = resolve(fields[3]);
    r.noise_mel = resolve(fields[4]);
    try {
      r.snr_db = std::stod(fields[5]);
    } catch (const std::exception&) {
      throw IoError("'" + path.string() + "' line " + std::to_string(line_no) + ": bad snr_db '" + fields[5] + "'");
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace noisectx
