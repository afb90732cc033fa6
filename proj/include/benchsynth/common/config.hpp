#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace benchsynth {

// Flat key-value configuration grouped in [sections]:
//
//   [evolve]
//   total_problems = 1000   # trailing comments allowed
//
// Every key must be read by some consumer; check_all_consumed() rejects the
// rest so typos fail fast.
class Config {
 public:
  static Config parse(std::string_view text, std::string source = "<string>");
  static Config load(const std::filesystem::path& path);

  bool has(std::string_view section, std::string_view key) const;
  std::optional<std::string> get(std::string_view section, std::string_view key) const;

  std::string get_string(std::string_view section, std::string_view key,
                         std::string fallback) const;
  std::int64_t get_int(std::string_view section, std::string_view key,
                       std::int64_t fallback) const;
  double get_double(std::string_view section, std::string_view key, double fallback) const;
  bool get_bool(std::string_view section, std::string_view key, bool fallback) const;
  std::vector<std::string> get_list(std::string_view section, std::string_view key,
                                    std::vector<std::string> fallback) const;

  void set(const std::string& section, const std::string& key, std::string value);

  // Throws ConfigError naming every key nobody asked for.
  void check_all_consumed() const;
  // Same, limited to keys in `sections` (empty = all).
  void check_consumed(const std::vector<std::string>& sections) const;

  // Sorted "section.key=value" lines; stable input for fingerprints.
  std::string canonical() const;

  const std::string& source() const { return source_; }

 private:
  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::string, std::less<>> values_;
  mutable std::set<Key> consumed_;
  std::string source_;
};

}  // namespace benchsynth
