#include "benchsynth/corpus.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "benchsynth/assets.hpp"
#include "benchsynth/common/errors.hpp"
#include "benchsynth/verify.hpp"

namespace benchsynth {

using nlohmann::ordered_json;

namespace {

constexpr std::pair<Provenance, std::string_view> kProvenanceNames[] = {
    {Provenance::kSeed, "seed"},
    {Provenance::kMutationEasy, "mutation-easy"},
    {Provenance::kMutationMedium, "mutation-medium"},
    {Provenance::kMutationHard, "mutation-hard"},
    {Provenance::kCrossover, "crossover"},
    {Provenance::kPostprocessed, "postprocessed"},
};

constexpr std::pair<Status, std::string_view> kStatusNames[] = {
    {Status::kUnverified, "unverified"}, {Status::kPassing, "passing"},
    {Status::kFailing, "failing"},       {Status::kErroring, "erroring"},
    {Status::kUnparsable, "unparsable"},
};

const std::set<std::string, std::less<>> kKnownFields = {
    "id",     "statement", "solution", "tests",      "provenance", "parents", "colony",
    "iteration", "status", "topics",   "test_count", "coverage",
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

std::filesystem::path meta_path(const std::filesystem::path& path) {
  return path.string() + ".meta.json";
}

template <typename F>
void for_each_json_line(std::string_view text, F&& f) {
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    if (!j.is_object()) throw ParseError("expected a JSON object", lineno);
    try {
      f(j, lineno);
    } catch (const ParseError&) {
      throw;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), lineno);
    } catch (const IntegrityError& e) {
      const std::string what = e.what();
      if (what.rfind("line ", 0) == 0) throw;
      throw IntegrityError("line " + std::to_string(lineno) + ": " + what);
    }
  }
}

std::optional<std::string> string_field(const ordered_json& j,
                                        std::initializer_list<const char*> names) {
  for (const char* n : names) {
    auto it = j.find(n);
    if (it != j.end() && it->is_string()) return it->get<std::string>();
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Provenance p) {
  for (auto [k, v] : kProvenanceNames) {
    if (k == p) return v;
  }
  return "seed";
}

std::string_view to_string(Status s) {
  for (auto [k, v] : kStatusNames) {
    if (k == s) return v;
  }
  return "unverified";
}

Provenance parse_provenance(std::string_view s) {
  for (auto [k, v] : kProvenanceNames) {
    if (v == s) return k;
  }
  throw IntegrityError("unknown provenance: " + std::string(s));
}

Status parse_status(std::string_view s) {
  for (auto [k, v] : kStatusNames) {
    if (v == s) return k;
  }
  throw IntegrityError("unknown status: " + std::string(s));
}

bool is_mutation(Provenance p) {
  return p == Provenance::kMutationEasy || p == Provenance::kMutationMedium ||
         p == Provenance::kMutationHard;
}

const ProblemRecord* DatasetManifest::find(std::string_view id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

const std::vector<std::string>& topic_bank() {
  static const std::vector<std::string> bank = [] {
    std::vector<std::string> out;
    std::istringstream in{std::string(asset("topic_bank.txt"))};
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) out.push_back(line);
    }
    return out;
  }();
  return bank;
}

bool is_bank_topic(std::string_view topic) {
  static const std::set<std::string, std::less<>> bank(topic_bank().begin(),
                                                       topic_bank().end());
  return bank.count(topic) > 0;
}

void validate_record(const ProblemRecord& r) {
  if (r.id.empty()) throw IntegrityError("record with empty id");
  if (r.provenance == Provenance::kCrossover && r.parents.size() < 2) {
    throw IntegrityError(r.id + ": crossover record needs at least 2 parents");
  }
  if (is_mutation(r.provenance) && r.parents.size() != 1) {
    throw IntegrityError(r.id + ": mutation record needs exactly 1 parent");
  }
  if (r.provenance == Provenance::kPostprocessed && r.parents.size() != 1) {
    throw IntegrityError(r.id + ": postprocessed record needs exactly 1 parent");
  }
  if (r.provenance == Provenance::kSeed && !r.parents.empty()) {
    throw IntegrityError(r.id + ": seed record cannot have parents");
  }
  if (r.status == Status::kPassing && (!r.solution || !r.tests)) {
    throw IntegrityError(r.id + ": passing record without solution and tests");
  }
  if (r.iteration < 0 || r.test_count < 0) {
    throw IntegrityError(r.id + ": negative iteration or test count");
  }
  if (r.topics.size() > 3) throw IntegrityError(r.id + ": more than 3 topics");
  for (const auto& t : r.topics) {
    if (!is_bank_topic(t)) throw IntegrityError(r.id + ": topic not in bank: " + t);
  }
  if (r.coverage && (*r.coverage < 0.0 || *r.coverage > 1.0)) {
    throw IntegrityError(r.id + ": coverage outside [0,1]");
  }
}

void validate_manifest(const DatasetManifest& m) {
  std::unordered_set<std::string> ids;
  for (const auto& r : m.records) {
    validate_record(r);
    if (!ids.insert(r.id).second) throw IntegrityError("duplicate id: " + r.id);
  }
}

void check_lineage(const DatasetManifest& m, std::span<const ProblemRecord> seeds) {
  std::unordered_map<std::string, const ProblemRecord*> by_id;
  for (const auto& r : seeds) by_id.emplace(r.id, &r);
  for (const auto& r : m.records) by_id.emplace(r.id, &r);
  for (const auto& r : m.records) {
    std::vector<const ProblemRecord*> stack{&r};
    std::unordered_set<std::string> seen;
    while (!stack.empty()) {
      const auto* cur = stack.back();
      stack.pop_back();
      if (!seen.insert(cur->id).second) continue;
      if (cur->provenance == Provenance::kSeed) continue;
      if (cur->parents.empty()) {
        throw IntegrityError(r.id + ": lineage ends at non-seed " + cur->id);
      }
      for (const auto& p : cur->parents) {
        auto it = by_id.find(p);
        if (it == by_id.end()) {
          throw IntegrityError(r.id + ": unknown ancestor " + p);
        }
        stack.push_back(it->second);
      }
    }
  }
}

ordered_json to_json(const ProblemRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["statement"] = r.statement;
  if (r.solution) j["solution"] = *r.solution;
  if (r.tests) j["tests"] = *r.tests;
  j["provenance"] = to_string(r.provenance);
  j["parents"] = r.parents;
  if (r.colony) j["colony"] = *r.colony;
  j["iteration"] = r.iteration;
  j["status"] = to_string(r.status);
  j["topics"] = r.topics;
  j["test_count"] = r.test_count;
  if (r.coverage) j["coverage"] = *r.coverage;
  // extra keys are written in sorted order so output is canonical
  std::map<std::string, ordered_json> sorted;
  for (auto it = r.extra.begin(); it != r.extra.end(); ++it) sorted[it.key()] = it.value();
  for (auto& [k, v] : sorted) j[k] = v;
  return j;
}

ProblemRecord record_from_json(const ordered_json& j) {
  ProblemRecord r;
  r.id = j.at("id").get<std::string>();
  r.statement = j.at("statement").get<std::string>();
  if (j.contains("solution") && !j["solution"].is_null()) r.solution = j["solution"].get<std::string>();
  if (j.contains("tests") && !j["tests"].is_null()) r.tests = j["tests"].get<std::string>();
  r.provenance = parse_provenance(j.value("provenance", std::string("seed")));
  r.parents = j.value("parents", std::vector<std::string>{});
  if (j.contains("colony") && !j["colony"].is_null()) r.colony = j["colony"].get<int>();
  r.iteration = j.value("iteration", 0);
  r.status = parse_status(j.value("status", std::string("unverified")));
  r.topics = j.value("topics", std::vector<std::string>{});
  r.test_count = j.value("test_count", 0);
  if (j.contains("coverage") && !j["coverage"].is_null()) r.coverage = j["coverage"].get<double>();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!kKnownFields.count(it.key())) r.extra[it.key()] = it.value();
  }
  validate_record(r);
  return r;
}

std::string serialize_records(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& r : manifest.records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

DatasetManifest parse_records(std::string_view jsonl, std::string name) {
  DatasetManifest m;
  m.name = std::move(name);
  std::unordered_set<std::string> ids;
  for_each_json_line(jsonl, [&](const ordered_json& j, std::size_t lineno) {
    auto r = record_from_json(j);
    if (!ids.insert(r.id).second) {
      throw IntegrityError("line " + std::to_string(lineno) + ": duplicate id \"" + r.id + "\"");
    }
    m.records.push_back(std::move(r));
  });
  return m;
}

DatasetManifest load_dataset(const std::filesystem::path& path) {
  auto m = parse_records(read_file(path), path.stem().string());
  auto meta = meta_path(path);
  if (std::filesystem::exists(meta)) {
    auto j = ordered_json::parse(read_file(meta));
    m.name = j.value("name", m.name);
    if (j.contains("config_fingerprint") && j["config_fingerprint"].is_string()) {
      m.config_fingerprint = j["config_fingerprint"].get<std::string>();
    }
    m.lineage = j.value("lineage", std::vector<std::string>{});
  }
  return m;
}

void save_dataset(const DatasetManifest& manifest, const std::filesystem::path& path) {
  validate_manifest(manifest);
  write_file(path, serialize_records(manifest));
  ordered_json meta;
  meta["name"] = manifest.name;
  if (manifest.config_fingerprint) meta["config_fingerprint"] = *manifest.config_fingerprint;
  meta["lineage"] = manifest.lineage;
  meta["records"] = manifest.records.size();
  write_file(meta_path(path), meta.dump(2) + "\n");
}

DatasetManifest merge_datasets(std::span<const DatasetManifest> manifests) {
  DatasetManifest out;
  std::unordered_set<std::string> ids;
  std::set<std::string> fingerprints;
  bool missing_fingerprint = false;
  for (std::size_t k = 0; k < manifests.size(); ++k) {
    const auto& m = manifests[k];
    if (!out.name.empty()) out.name += "+";
    out.name += m.name;
    for (const auto& l : m.lineage) {
      if (std::find(out.lineage.begin(), out.lineage.end(), l) == out.lineage.end()) {
        out.lineage.push_back(l);
      }
    }
    if (m.config_fingerprint) {
      fingerprints.insert(*m.config_fingerprint);
    } else {
      missing_fingerprint = true;
    }
    for (auto r : m.records) {
      if (ids.count(r.id)) {
        std::string base = r.id + "~" + std::to_string(k);
        std::string candidate = base;
        for (int n = 2; ids.count(candidate); ++n) candidate = base + "." + std::to_string(n);
        r.id = candidate;
      }
      ids.insert(r.id);
      out.records.push_back(std::move(r));
    }
  }
  if (fingerprints.size() == 1 && !missing_fingerprint) out.config_fingerprint = *fingerprints.begin();
  return out;
}

SeedFormat parse_seed_format(std::string_view s) {
  if (s == "native" || s == "jsonl") return SeedFormat::kNative;
  if (s == "mbpp") return SeedFormat::kMbpp;
  if (s == "leetcode") return SeedFormat::kLeetcode;
  throw UsageError("unknown seed format: " + std::string(s));
}

DatasetManifest import_seed_dataset(const std::filesystem::path& path, SeedFormat format) {
  if (format == SeedFormat::kNative) return load_dataset(path);
  const std::string prefix = format == SeedFormat::kMbpp ? "mbpp-" : "lc-";
  DatasetManifest m;
  m.name = path.stem().string();
  std::unordered_set<std::string> ids;
  for_each_json_line(read_file(path), [&](const ordered_json& j, std::size_t lineno) {
    ProblemRecord r;
    std::optional<std::string> statement;
    std::set<std::string> used;
    if (format == SeedFormat::kMbpp) {
      statement = string_field(j, {"text", "prompt"});
      r.solution = string_field(j, {"code"});
      if (j.contains("test_list")) {
        std::string tests;
        for (const auto& t : j.at("test_list")) tests += t.get<std::string>() + "\n";
        r.tests = tests;
      }
      used = {"text", "prompt", "code", "test_list", "task_id"};
    } else {
      statement = string_field(j, {"problem_description", "content", "description", "question"});
      r.solution = string_field(j, {"completion", "solution"});
      r.tests = string_field(j, {"test", "tests"});
      used = {"problem_description", "content", "description", "question", "completion",
              "solution",            "test",    "tests",       "task_id",  "question_id"};
    }
    if (!statement) throw ParseError("record has no problem statement", lineno);
    r.statement = *statement;
    std::string key = std::to_string(lineno);
    for (const char* idf : {"task_id", "question_id"}) {
      if (j.contains(idf)) {
        key = j[idf].is_string() ? j[idf].get<std::string>() : j[idf].dump();
        break;
      }
    }
    r.id = prefix + key;
    if (!ids.insert(r.id).second) throw IntegrityError("duplicate id: " + r.id);
    if (r.tests) r.test_count = count_tests(*r.tests);
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!used.count(it.key())) r.extra[it.key()] = it.value();
    }
    if (j.contains("task_id")) r.extra["task_id"] = j["task_id"];
    m.records.push_back(std::move(r));
  });
  return m;
}

}  // namespace benchsynth
