#include "noisectx/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "noisectx/errors.hpp"

namespace noisectx {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double to_double(std::string_view text, const std::string& what) {
  const std::string s = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError(what + ": '" + s + "' is not a number");
  }
  return v;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text, std::string_view origin) {
  KeyValueConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": expected key=value");
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": empty key");
    cfg.set(std::move(key), trim(std::string_view(body).substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void KeyValueConfig::set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }

void KeyValueConfig::merge(const KeyValueConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

long KeyValueConfig::get_int(const std::string& key, long fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  long out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (v->empty() || ec != std::errc{} || ptr != v->data() + v->size()) {
    throw ConfigError("key '" + key + "': '" + *v + "' is not an integer");
  }
  return out;
}

std::size_t KeyValueConfig::get_size(const std::string& key, std::size_t fallback) const {
  const long v = get_int(key, static_cast<long>(fallback));
  if (v < 0) throw ConfigError("key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  return v ? to_double(*v, "key '" + key + "'") : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "1" || *v == "true" || *v == "yes") return true;
  if (*v == "0" || *v == "false" || *v == "no") return false;
  throw ConfigError("key '" + key + "': '" + *v + "' is not a boolean");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    return parse_double_list(*v);
  } catch (const ConfigError& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

std::string KeyValueConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::vector<double> parse_double_list(std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    out.push_back(to_double(piece, "list entry"));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace noisectx
