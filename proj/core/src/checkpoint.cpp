#include "noisectx/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace noisectx {
namespace {

constexpr char kMagic[8] = {'N', 'C', 'T', 'X', 'C', 'K', 'P', 'T'};

std::size_t dtype_bytes(DType t) {
  switch (t) {
    case DType::F32:
      return 4;
    case DType::F64:
    case DType::I64:
      return 8;
    case DType::U8:
      return 1;
  }
  return 0;
}

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

template <typename Bits, typename T>
std::string encode(const Tensor<T>& t) {
  std::string raw;
  raw.reserve(t.size() * sizeof(Bits));
  for (T v : t.values()) put_le(raw, std::bit_cast<Bits>(v));
  return raw;
}

template <typename Bits, typename T>
Tensor<T> decode(const CheckpointArchive::Entry& e) {
  Tensor<T> t(e.shape);
  const auto* p = reinterpret_cast<const unsigned char*>(e.raw.data());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::bit_cast<T>(get_le<Bits>(p + i * sizeof(Bits)));
  return t;
}

class Reader {
 public:
  Reader(std::string_view bytes, std::string_view origin) : bytes_(bytes), origin_(origin) {}

  const unsigned char* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw IoError("'" + origin_ + "': truncated checkpoint");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data()) + pos_;
    pos_ += n;
    return p;
  }
  template <typename U>
  U read() {
    return get_le<U>(take(sizeof(U)));
  }
  bool done() const { return pos_ == bytes_.size(); }
  const std::string& origin() const { return origin_; }

 private:
  std::string_view bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

void CheckpointArchive::add(Entry entry) {
  if (find(entry.name)) throw ContractError("checkpoint entry '" + entry.name + "' written twice");
  entries_.push_back(std::move(entry));
}

void CheckpointArchive::put(const std::string& name, const TensorF& t) {
  add({name, t.shape(), DType::F32, encode<std::uint32_t>(t)});
}

void CheckpointArchive::put(const std::string& name, const TensorD& t) {
  add({name, t.shape(), DType::F64, encode<std::uint64_t>(t)});
}

void CheckpointArchive::put_int(const std::string& name, std::int64_t value) {
  std::string raw;
  put_le(raw, static_cast<std::uint64_t>(value));
  add({name, {1}, DType::I64, std::move(raw)});
}

void CheckpointArchive::put_text(const std::string& name, std::string_view text) {
  if (text.empty()) throw ContractError("checkpoint text entry '" + name + "' is empty");
  add({name, {text.size()}, DType::U8, std::string(text)});
}

const CheckpointArchive::Entry* CheckpointArchive::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

const CheckpointArchive::Entry& CheckpointArchive::require(const std::string& name, DType dtype) const {
  const Entry* e = find(name);
  if (!e) throw IoError("checkpoint has no entry '" + name + "'");
  if (e->dtype != dtype) throw IoError("checkpoint entry '" + name + "' has unexpected dtype");
  return *e;
}

TensorF CheckpointArchive::get_f32(const std::string& name) const {
  return decode<std::uint32_t, float>(require(name, DType::F32));
}

TensorD CheckpointArchive::get_f64(const std::string& name) const {
  return decode<std::uint64_t, double>(require(name, DType::F64));
}

std::int64_t CheckpointArchive::get_int(const std::string& name) const {
  const Entry& e = require(name, DType::I64);
  return static_cast<std::int64_t>(get_le<std::uint64_t>(reinterpret_cast<const unsigned char*>(e.raw.data())));
}

std::string CheckpointArchive::get_text(const std::string& name) const { return require(name, DType::U8).raw; }

std::string CheckpointArchive::serialize() const {
  std::string out(kMagic, sizeof kMagic);
  put_le(out, kFormatVersion);
  put_le(out, static_cast<std::uint64_t>(entries_.size()));
  for (const auto& e : entries_) {
    put_le(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put_le(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto extent : e.shape) put_le(out, static_cast<std::uint64_t>(extent));
    out.push_back(static_cast<char>(e.dtype));
    out += e.raw;
  }
  return out;
}

CheckpointArchive CheckpointArchive::deserialize(std::string_view bytes, std::string_view origin) {
  Reader in(bytes, origin);
  if (std::memcmp(in.take(sizeof kMagic), kMagic, sizeof kMagic) != 0) {
    throw IoError("'" + in.origin() + "' is not a checkpoint archive");
  }
  const auto version = in.read<std::uint32_t>();
  if (version != kFormatVersion) {
    throw IoError("'" + in.origin() + "': unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = in.read<std::uint64_t>();
  CheckpointArchive archive;
  for (std::uint64_t i = 0; i < count; ++i) {
    Entry e;
    const auto name_len = in.read<std::uint32_t>();
    e.name.assign(reinterpret_cast<const char*>(in.take(name_len)), name_len);
    const auto rank = in.read<std::uint32_t>();
    for (std::uint32_t r = 0; r < rank; ++r) e.shape.push_back(static_cast<std::size_t>(in.read<std::uint64_t>()));
    const auto tag = in.read<std::uint8_t>();
    if (tag > static_cast<std::uint8_t>(DType::U8)) {
      throw IoError("'" + in.origin() + "': entry '" + e.name + "' has unknown dtype tag " + std::to_string(tag));
    }
    e.dtype = static_cast<DType>(tag);
    std::size_t n = 0;
    try {
      n = checked_shape_size(e.shape) * dtype_bytes(e.dtype);
    } catch (const DimensionError&) {
      throw IoError("'" + in.origin() + "': entry '" + e.name + "' has a zero extent");
    }
    e.raw.assign(reinterpret_cast<const char*>(in.take(n)), n);
    archive.add(std::move(e));
  }
  if (!in.done()) throw IoError("'" + in.origin() + "': trailing bytes after last entry");
  return archive;
}

void CheckpointArchive::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

CheckpointArchive CheckpointArchive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str(), path.string());
}

CheckpointArchive to_archive(const ModelCheckpoint& checkpoint) {
  CheckpointArchive a;
  a.put_text("meta/config", checkpoint.config.to_config().to_text());
  for (const auto& [name, t] : checkpoint.params) a.put("param/" + name, t);
  a.put_int("train/epochs", static_cast<std::int64_t>(checkpoint.epochs_completed));
  if (checkpoint.adam) {
    const auto& s = *checkpoint.adam;
    a.put_int("adam/step", s.step);
    a.put("adam/hyper", TensorD({4}, {s.options.lr, s.options.beta1, s.options.beta2, s.options.eps}));
    for (const auto& [name, t] : s.m) a.put("adam/m/" + name, t);
    for (const auto& [name, t] : s.v) a.put("adam/v/" + name, t);
  }
  return a;
}

ModelCheckpoint from_archive(const CheckpointArchive& archive) {
  ModelCheckpoint ck;
  const auto cfg = KeyValueConfig::parse(archive.get_text("meta/config"), "checkpoint config");
  ck.config = FrontendConfig::from_config(cfg, FrontendConfig{});
  const Frontend model(ck.config);
  for (const auto& spec : model.layout().specs()) {
    TensorF t = archive.get_f32("param/" + spec.name);
    if (t.shape() != spec.shape) {
      throw IoError("checkpoint parameter '" + spec.name + "' has shape " + shape_str(t.shape()) + ", expected " +
                    shape_str(spec.shape));
    }
    ck.params.insert(spec.name, std::move(t));
  }
  if (archive.contains("train/epochs")) {
    const std::int64_t epochs = archive.get_int("train/epochs");
    if (epochs < 0) throw IoError("checkpoint has a negative epoch count");
    ck.epochs_completed = static_cast<std::size_t>(epochs);
  }
  if (archive.contains("adam/step")) {
    AdamState<float> s;
    s.step = archive.get_int("adam/step");
    const TensorD hyper = archive.get_f64("adam/hyper");
    s.options = {hyper[0], hyper[1], hyper[2], hyper[3]};
    for (const auto& [name, p] : ck.params) {
      s.m.insert(name, archive.get_f32("adam/m/" + name));
      s.v.insert(name, archive.get_f32("adam/v/" + name));
    }
    ck.adam = std::move(s);
  }
  return ck;
}

}  // namespace noisectx
