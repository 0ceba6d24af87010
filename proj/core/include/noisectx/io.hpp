#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "noisectx/features.hpp"

namespace noisectx {

/// Mono 16-bit PCM WAV. Other encodings are rejected with IoError.
Waveform read_wav(const std::filesystem::path& path);
/// Samples are clamped to [-1, 1] and rounded to 16-bit PCM.
void write_wav(const std::filesystem::path& path, const Waveform& wave);

/// Feature dump layout, all little-endian:
///   bytes 0-3   magic "NCFD"
///   u32         frame count T
///   u32         feature count F
///   f32         hop seconds
///   f32         window seconds
///   f32 x T*F   row-major values
inline constexpr char kFeatureDumpMagic[4] = {'N', 'C', 'F', 'D'};

void write_feature_dump(const std::filesystem::path& path, const FeatureSequence& features);
FeatureSequence read_feature_dump(const std::filesystem::path& path);

/// One dataset record. Paths are stored relative to the manifest's
/// directory; an absent context is written as "-".
struct ManifestRecord {
  std::string id;
  std::filesystem::path context_wav;
  std::filesystem::path noisy_wav;
  std::filesystem::path clean_mel;
  std::filesystem::path noise_mel;
  double snr_db = 0.0;

  bool has_context() const { return !context_wav.empty(); }
};

/// Tab-separated, one record per line, preceded by a '#' header line:
///   id  context_wav  noisy_wav  clean_mel  noise_mel  snr_db
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);
/// Returned paths are resolved against the manifest's directory.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

}  // namespace noisectx
