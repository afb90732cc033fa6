#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "benchsynth/corpus.hpp"

namespace benchsynth::dedup {

inline constexpr std::size_t kDefaultPermutations = 250;
inline constexpr double kDefaultThreshold = 0.75;

// Sorted, unique token w-grams.
using ShingleSet = std::vector<std::string>;

// Lower-cases, drops ASCII punctuation, splits on whitespace and returns the
// w-grams joined by single spaces. Fewer than w tokens yields the whole
// normalized text as the only shingle.
ShingleSet shingle(std::string_view text, std::size_t w);

double jaccard(const ShingleSet& a, const ShingleSet& b);

struct MinHashSignature {
  std::string problem_id;
  std::vector<std::uint64_t> values;
  std::uint64_t permutation_seed = 0;
};

// values[i] = min over shingles of h_i(s), with h_i(x) = (a_i x + b_i) mod
// (2^61 - 1) applied to a 64-bit shingle hash and (a_i, b_i) drawn from seed.
MinHashSignature signature(const ShingleSet& shingles, std::size_t permutations,
                           std::uint64_t seed, std::string problem_id = {});

// Fraction of positions where two signatures agree.
double agreement(const MinHashSignature& a, const MinHashSignature& b);

struct DedupConfig {
  double threshold = kDefaultThreshold;
  std::size_t shingle_width = 3;
  std::size_t permutations = kDefaultPermutations;
  std::size_t bands = 25;  // rows per band = permutations / bands
  std::uint64_t seed = 0;

  std::size_t rows_per_band() const { return permutations / bands; }
  void validate() const;
};

struct RemovedPair {
  std::string kept;
  std::string dropped;
  double jaccard = 0.0;
  std::size_t band_hits = 0;

  bool operator==(const RemovedPair&) const = default;
};

// Incremental LSH index over accepted texts. Candidates come from shared
// band buckets; a text is a duplicate only if its exact shingle Jaccard with
// some accepted text reaches the threshold.
class NearDuplicateIndex {
 public:
  explicit NearDuplicateIndex(DedupConfig config = {});

  struct Match {
    std::size_t accepted_index;
    double jaccard;
    std::size_t band_hits;
  };

  // Earliest accepted entry that is a confirmed near-duplicate, if any.
  std::optional<Match> find_duplicate(const ShingleSet& shingles,
                                      const MinHashSignature& sig) const;
  std::optional<Match> find_duplicate(std::string_view text) const;

  void insert(std::string id, ShingleSet shingles, const MinHashSignature& sig);
  // Inserts unless a duplicate exists; returns the duplicate match if rejected.
  std::optional<Match> insert_if_novel(std::string id, std::string_view text);

  const std::string& id(std::size_t accepted_index) const { return ids_[accepted_index]; }
  std::size_t size() const { return ids_.size(); }
  const DedupConfig& config() const { return config_; }

  // Candidate accepted indices sharing at least one band, with hit counts.
  std::vector<std::pair<std::size_t, std::size_t>> candidates(const MinHashSignature& sig) const;

 private:
  std::uint64_t band_key(const MinHashSignature& sig, std::size_t band) const;

  DedupConfig config_;
  std::vector<std::string> ids_;
  std::vector<ShingleSet> shingles_;
  std::vector<std::unordered_map<std::uint64_t, std::vector<std::size_t>>> buckets_;
};

struct DedupResult {
  DatasetManifest retained;
  std::vector<RemovedPair> removed;
};

// Keeps the earlier of every confirmed near-duplicate pair; retained records
// keep input order. Operates on statements only.
DedupResult deduplicate(const DatasetManifest& manifest, const DedupConfig& config = {});

// JSONL of {kept, dropped, jaccard, band_hits}.
void write_removal_log(std::span<const RemovedPair> removed, const std::filesystem::path& path);

}  // namespace benchsynth::dedup
