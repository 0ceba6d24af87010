#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "noisectx/adam.hpp"
#include "noisectx/frontend.hpp"

namespace noisectx {

enum class DType : std::uint8_t { F32 = 0, F64 = 1, I64 = 2, U8 = 3 };

/// Named-tensor archive. Binary layout, all integers little-endian:
///
///   magic "NCTXCKPT" (8 bytes), u32 format version, u64 entry count, then
///   per entry: u32 name length, UTF-8 name, u32 rank, u64 x rank extents,
///   u8 dtype tag, raw little-endian values (product(extents) elements).
///
/// Values are stored bit-for-bit, so save/load round-trips exactly.
class CheckpointArchive {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  struct Entry {
    std::string name;
    Shape shape;
    DType dtype;
    std::string raw;
  };

  void put(const std::string& name, const TensorF& t);
  void put(const std::string& name, const TensorD& t);
  void put_int(const std::string& name, std::int64_t value);
  void put_text(const std::string& name, std::string_view text);

  bool contains(const std::string& name) const { return find(name) != nullptr; }
  TensorF get_f32(const std::string& name) const;
  TensorD get_f64(const std::string& name) const;
  std::int64_t get_int(const std::string& name) const;
  std::string get_text(const std::string& name) const;

  const std::vector<Entry>& entries() const noexcept { return entries_; }

  std::string serialize() const;
  static CheckpointArchive deserialize(std::string_view bytes, std::string_view origin = "<memory>");
  void save(const std::filesystem::path& path) const;
  static CheckpointArchive load(const std::filesystem::path& path);

 private:
  const Entry* find(const std::string& name) const;
  const Entry& require(const std::string& name, DType dtype) const;
  void add(Entry entry);

  std::vector<Entry> entries_;
};

/// Model configuration, parameters and (optionally) optimizer state.
struct ModelCheckpoint {
  FrontendConfig config;
  NamedTensors<float> params;
  std::optional<AdamState<float>> adam;
  /// Training epochs behind these parameters.
  std::size_t epochs_completed = 0;
};

CheckpointArchive to_archive(const ModelCheckpoint& checkpoint);
/// Validates that every parameter of the configured layout is present with
/// the declared shape.
ModelCheckpoint from_archive(const CheckpointArchive& archive);

}  // namespace noisectx
