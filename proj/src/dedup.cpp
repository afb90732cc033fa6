#include "benchsynth/dedup.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "benchsynth/common/digest.hpp"
#include "benchsynth/common/errors.hpp"

namespace benchsynth::dedup {
namespace {

constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;

std::uint64_t mod_mersenne(unsigned __int128 x) {
  auto lo = static_cast<std::uint64_t>(x & kMersenne61);
  auto hi = static_cast<std::uint64_t>(x >> 61);
  std::uint64_t r = lo + hi;
  while (r >= kMersenne61) r -= kMersenne61;
  return r;
}

}  // namespace

ShingleSet shingle(std::string_view text, std::size_t w) {
  if (w == 0) throw UsageError("shingle width must be >= 1");
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!cur.empty()) tokens.push_back(std::exchange(cur, {}));
    } else if (c < 0x80 && std::ispunct(c)) {
      continue;
    } else {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
  }
  if (!cur.empty()) tokens.push_back(cur);

  ShingleSet out;
  if (tokens.size() < w) {
    std::string whole;
    for (const auto& t : tokens) {
      if (!whole.empty()) whole.push_back(' ');
      whole += t;
    }
    out.push_back(whole);
    return out;
  }
  for (std::size_t i = 0; i + w <= tokens.size(); ++i) {
    std::string g = tokens[i];
    for (std::size_t j = 1; j < w; ++j) g += " " + tokens[i + j];
    out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double jaccard(const ShingleSet& a, const ShingleSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

MinHashSignature signature(const ShingleSet& shingles, std::size_t permutations,
                           std::uint64_t seed, std::string problem_id) {
  if (shingles.empty()) throw DataError("cannot sign an empty shingle set");
  MinHashSignature sig;
  sig.problem_id = std::move(problem_id);
  sig.permutation_seed = seed;
  sig.values.assign(permutations, std::numeric_limits<std::uint64_t>::max());
  std::vector<std::uint64_t> a(permutations);
  std::vector<std::uint64_t> b(permutations);
  for (std::size_t i = 0; i < permutations; ++i) {
    a[i] = derive_seed(seed, 2 * i) % (kMersenne61 - 1) + 1;
    b[i] = derive_seed(seed, 2 * i + 1) % kMersenne61;
  }
  for (const auto& s : shingles) {
    const std::uint64_t x = fnv1a64(s) % kMersenne61;
    for (std::size_t i = 0; i < permutations; ++i) {
      const auto h = mod_mersenne(static_cast<unsigned __int128>(a[i]) * x + b[i]);
      sig.values[i] = std::min(sig.values[i], h);
    }
  }
  return sig;
}

double agreement(const MinHashSignature& a, const MinHashSignature& b) {
  if (a.values.size() != b.values.size() || a.values.empty()) {
    throw DimensionMismatch("signature lengths differ");
  }
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) same += a.values[i] == b.values[i];
  return static_cast<double>(same) / static_cast<double>(a.values.size());
}

void DedupConfig::validate() const {
  if (permutations == 0 || bands == 0 || permutations % bands != 0) {
    throw ConfigError("dedup permutations must be a positive multiple of bands");
  }
  if (threshold < 0.0 || threshold > 1.0) throw ConfigError("dedup threshold outside [0,1]");
  if (shingle_width == 0) throw ConfigError("shingle width must be >= 1");
}

NearDuplicateIndex::NearDuplicateIndex(DedupConfig config) : config_(config) {
  config_.validate();
  buckets_.resize(config_.bands);
}

std::uint64_t NearDuplicateIndex::band_key(const MinHashSignature& sig, std::size_t band) const {
  const std::size_t r = config_.rows_per_band();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = band * r; i < (band + 1) * r; ++i) h = splitmix64(h ^ sig.values[i]);
  return h;
}

std::vector<std::pair<std::size_t, std::size_t>> NearDuplicateIndex::candidates(
    const MinHashSignature& sig) const {
  std::map<std::size_t, std::size_t> hits;
  for (std::size_t band = 0; band < config_.bands; ++band) {
    auto it = buckets_[band].find(band_key(sig, band));
    if (it == buckets_[band].end()) continue;
    for (auto idx : it->second) ++hits[idx];
  }
  return {hits.begin(), hits.end()};
}

std::optional<NearDuplicateIndex::Match> NearDuplicateIndex::find_duplicate(
    const ShingleSet& shingles, const MinHashSignature& sig) const {
  for (auto [idx, band_hits] : candidates(sig)) {
    const double j = jaccard(shingles, shingles_[idx]);
    if (j >= config_.threshold) return Match{idx, j, band_hits};
  }
  return std::nullopt;
}

std::optional<NearDuplicateIndex::Match> NearDuplicateIndex::find_duplicate(
    std::string_view text) const {
  auto sh = shingle(text, config_.shingle_width);
  return find_duplicate(sh, signature(sh, config_.permutations, config_.seed));
}

void NearDuplicateIndex::insert(std::string id, ShingleSet shingles, const MinHashSignature& sig) {
  const std::size_t idx = ids_.size();
  for (std::size_t band = 0; band < config_.bands; ++band) {
    buckets_[band][band_key(sig, band)].push_back(idx);
  }
  ids_.push_back(std::move(id));
  shingles_.push_back(std::move(shingles));
}

std::optional<NearDuplicateIndex::Match> NearDuplicateIndex::insert_if_novel(
    std::string id, std::string_view text) {
  auto sh = shingle(text, config_.shingle_width);
  auto sig = signature(sh, config_.permutations, config_.seed);
  if (auto dup = find_duplicate(sh, sig)) return dup;
  insert(std::move(id), std::move(sh), sig);
  return std::nullopt;
}

DedupResult deduplicate(const DatasetManifest& manifest, const DedupConfig& config) {
  NearDuplicateIndex index(config);
  const std::size_t n = manifest.records.size();
  std::vector<ShingleSet> shingles(n);
  std::vector<MinHashSignature> sigs(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const auto u = static_cast<std::size_t>(i);
    shingles[u] = shingle(manifest.records[u].statement, config.shingle_width);
    sigs[u] = signature(shingles[u], config.permutations, config.seed, manifest.records[u].id);
  }

  DedupResult result;
  result.retained.name = manifest.name;
  result.retained.config_fingerprint = manifest.config_fingerprint;
  result.retained.lineage = manifest.lineage;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rec = manifest.records[i];
    if (auto dup = index.find_duplicate(shingles[i], sigs[i])) {
      result.removed.push_back(
          {index.id(dup->accepted_index), rec.id, dup->jaccard, dup->band_hits});
      continue;
    }
    index.insert(rec.id, std::move(shingles[i]), sigs[i]);
    result.retained.records.push_back(rec);
  }
  return result;
}

void write_removal_log(std::span<const RemovedPair> removed, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : removed) {
    nlohmann::ordered_json j;
    j["kept"] = r.kept;
    j["dropped"] = r.dropped;
    j["jaccard"] = r.jaccard;
    j["band_hits"] = r.band_hits;
    out << j.dump() << "\n";
  }
}

}  // namespace benchsynth::dedup
