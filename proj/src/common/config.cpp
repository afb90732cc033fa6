#include "benchsynth/common/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "benchsynth/common/errors.hpp"

namespace benchsynth {
namespace {

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Config Config::parse(std::string_view text, std::string source) {
  Config cfg;
  cfg.source_ = std::move(source);
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(cfg.source_ + ":" + std::to_string(lineno) + ": bad section header");
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(cfg.source_ + ":" + std::to_string(lineno) + ": expected key = value");
    }
    if (section.empty()) {
      throw ConfigError(cfg.source_ + ":" + std::to_string(lineno) + ": key outside a section");
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    auto [it, inserted] = cfg.values_.emplace(Key{section, key}, value);
    if (!inserted) {
      throw ConfigError(cfg.source_ + ":" + std::to_string(lineno) + ": duplicate key " +
                        section + "." + key);
    }
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

bool Config::has(std::string_view section, std::string_view key) const {
  return values_.find(Key{std::string(section), std::string(key)}) != values_.end();
}

std::optional<std::string> Config::get(std::string_view section, std::string_view key) const {
  Key k{std::string(section), std::string(key)};
  auto it = values_.find(k);
  if (it == values_.end()) return std::nullopt;
  consumed_.insert(k);
  return it->second;
}

std::string Config::get_string(std::string_view section, std::string_view key,
                               std::string fallback) const {
  auto v = get(section, key);
  return v ? *v : fallback;
}

std::int64_t Config::get_int(std::string_view section, std::string_view key,
                             std::int64_t fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    auto out = std::stoll(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(source_ + ": " + std::string(section) + "." + std::string(key) +
                      " is not an integer: " + *v);
  }
}

double Config::get_double(std::string_view section, std::string_view key,
                          double fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    auto out = std::stod(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(source_ + ": " + std::string(section) + "." + std::string(key) +
                      " is not a number: " + *v);
  }
}

bool Config::get_bool(std::string_view section, std::string_view key, bool fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  if (*v == "true" || *v == "yes" || *v == "on" || *v == "1") return true;
  if (*v == "false" || *v == "no" || *v == "off" || *v == "0") return false;
  throw ConfigError(source_ + ": " + std::string(section) + "." + std::string(key) +
                    " is not a boolean: " + *v);
}

std::vector<std::string> Config::get_list(std::string_view section, std::string_view key,
                                          std::vector<std::string> fallback) const {
  auto v = get(section, key);
  if (!v) return fallback;
  std::vector<std::string> out;
  std::stringstream ss(*v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

void Config::set(const std::string& section, const std::string& key, std::string value) {
  values_[Key{section, key}] = std::move(value);
}

void Config::check_all_consumed() const { check_consumed({}); }

void Config::check_consumed(const std::vector<std::string>& sections) const {
  std::string unknown;
  for (const auto& [k, v] : values_) {
    const bool owned =
        sections.empty() || std::find(sections.begin(), sections.end(), k.first) != sections.end();
    if (owned && !consumed_.count(k)) {
      if (!unknown.empty()) unknown += ", ";
      unknown += k.first + "." + k.second;
    }
  }
  if (!unknown.empty()) throw ConfigError(source_ + ": unknown keys: " + unknown);
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k.first + "." + k.second + "=" + v + "\n";
  return out;
}

}  // namespace benchsynth
