#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "debias/errors.hpp"

namespace debias {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// `key = value` lines; `#` starts a comment; blank lines ignored.
inline KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno);
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ParseError("expected 'key = value'", lineno);
    kv.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

inline KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  return parse_key_values(in);
}

namespace detail {

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ConfigError("bad value '" + std::string(text) + "' for key '" + std::string(key) + "'");
  return v;
}

}  // namespace detail

struct TrainConfig {
  std::size_t d_e = 128;  // embedding dimension
  std::size_t d_h = 128;  // hidden units per direction
  double lr = 1.0;
  std::size_t stage1_epochs = 20;
  std::size_t stage2_epochs = 20;
  std::size_t patience = 5;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::size_t proj_per_gold = 1;
  std::size_t min_count = 1;

  // Throws ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value) {
    using detail::parse_number;
    if (key == "d_e") d_e = parse_number<std::size_t>(key, value);
    else if (key == "d_h") d_h = parse_number<std::size_t>(key, value);
    else if (key == "lr") lr = parse_number<double>(key, value);
    else if (key == "stage1_epochs") stage1_epochs = parse_number<std::size_t>(key, value);
    else if (key == "stage2_epochs") stage2_epochs = parse_number<std::size_t>(key, value);
    else if (key == "patience") patience = parse_number<std::size_t>(key, value);
    else if (key == "clip_norm") clip_norm = parse_number<double>(key, value);
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else if (key == "proj_per_gold") proj_per_gold = parse_number<std::size_t>(key, value);
    else if (key == "min_count") min_count = parse_number<std::size_t>(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
  }

  void apply(const KeyValues& kv) {
    for (const auto& [k, v] : kv) set(k, v);
  }

  void validate() const {
    if (d_e == 0 || d_h == 0) throw ConfigError("d_e and d_h must be positive");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
    if (min_count == 0) throw ConfigError("min_count must be at least 1");
  }

  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    os << "d_e = " << d_e << "\nd_h = " << d_h << "\nlr = " << lr << "\nstage1_epochs = " << stage1_epochs
       << "\nstage2_epochs = " << stage2_epochs << "\npatience = " << patience << "\nclip_norm = " << clip_norm
       << "\nseed = " << seed << "\nproj_per_gold = " << proj_per_gold << "\nmin_count = " << min_count << '\n';
    return os.str();
  }
};

}  // namespace debias
