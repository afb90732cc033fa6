#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace benchsynth {

enum class Provenance {
  kSeed,
  kMutationEasy,
  kMutationMedium,
  kMutationHard,
  kCrossover,
  kPostprocessed,
};

enum class Status { kUnverified, kPassing, kFailing, kErroring, kUnparsable };

std::string_view to_string(Provenance p);
std::string_view to_string(Status s);
Provenance parse_provenance(std::string_view s);
Status parse_status(std::string_view s);
bool is_mutation(Provenance p);

// One benchmark problem and its verification state.
struct ProblemRecord {
  std::string id;
  std::string statement;
  std::optional<std::string> solution;
  std::optional<std::string> tests;
  Provenance provenance = Provenance::kSeed;
  std::vector<std::string> parents;
  std::optional<int> colony;
  int iteration = 0;
  Status status = Status::kUnverified;
  std::vector<std::string> topics;
  int test_count = 0;
  std::optional<double> coverage;
  // Unknown fields from imported files, written back verbatim.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  bool operator==(const ProblemRecord&) const = default;
};

struct DatasetManifest {
  std::string name;
  std::vector<ProblemRecord> records;
  std::optional<std::string> config_fingerprint;
  std::vector<std::string> lineage;

  const ProblemRecord* find(std::string_view id) const;
  bool operator==(const DatasetManifest&) const = default;
};

// The fixed topic bank shipped in assets/topic_bank.txt.
const std::vector<std::string>& topic_bank();
bool is_bank_topic(std::string_view topic);

// Per-record invariants (provenance/parent cardinality, passing implies
// solution and tests, topic bank closure). Throws IntegrityError.
void validate_record(const ProblemRecord& r);
// Record invariants plus id uniqueness.
void validate_manifest(const DatasetManifest& m);
// Every parent chain must terminate at a seed record; `seeds` supplies ids
// that live outside the manifest (the seed dataset).
void check_lineage(const DatasetManifest& m, std::span<const ProblemRecord> seeds);

nlohmann::ordered_json to_json(const ProblemRecord& r);
ProblemRecord record_from_json(const nlohmann::ordered_json& j);

// One JSON object per line. Manifest metadata (name, fingerprint, lineage)
// lives in a sidecar `<path>.meta.json`; without it the name is the stem.
DatasetManifest load_dataset(const std::filesystem::path& path);
void save_dataset(const DatasetManifest& manifest, const std::filesystem::path& path);
std::string serialize_records(const DatasetManifest& manifest);
DatasetManifest parse_records(std::string_view jsonl, std::string name);

// Union in argument order. An id seen before is re-keyed as `<id>~<k>` with
// k the index of the contributing manifest (plus a counter if still taken).
DatasetManifest merge_datasets(std::span<const DatasetManifest> manifests);

enum class SeedFormat { kNative, kMbpp, kLeetcode };
SeedFormat parse_seed_format(std::string_view s);

// Normalizes external seed files into seed ProblemRecords. MBPP lines carry
// {text, code, test_list}; other fields are kept in `extra`.
DatasetManifest import_seed_dataset(const std::filesystem::path& path, SeedFormat format);

}  // namespace benchsynth
