#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "benchsynth/corpus.hpp"
#include "benchsynth/dedup.hpp"
#include "benchsynth/embedding.hpp"
#include "benchsynth/prompts.hpp"

namespace benchsynth {

class Config;
class Gateway;

struct GenerationConfig {
  std::string name = "generated";
  std::size_t total = 1000;             // N
  std::size_t colonies = 10;            // N_c
  std::size_t seed_sample = 30;         // B_s
  std::size_t crossover_outputs = 2;    // C
  std::size_t crossover_batch = 5;      // B_c
  int feedback_iterations = 5;          // N_it
  double p_mutation = 0.5;
  bool kfn_enabled = false;
  std::size_t kfn_keep_mutation = 2;
  std::size_t kfn_keep_crossover = 2;
  std::vector<prompts::Difficulty> difficulties = {
      prompts::Difficulty::kEasier, prompts::Difficulty::kEqual, prompts::Difficulty::kHarder};
  std::uint64_t seed = 0;
  std::string model_id = "gpt-4o";
  // Iterations in a row without an accepted problem before a colony gives up.
  std::size_t stall_limit = 200;

  std::size_t per_colony() const;  // N_s = ceil(N / N_c)
  void validate() const;
  std::string canonical() const;
  std::string fingerprint() const;  // sha256 of canonical()

  // mbpp-new, mbpp-hard, leetcode-new, mbpp-guided, mbpp-hard-guided,
  // leetcode-guided. Guided presets enable k-farthest-neighbor selection;
  // hard presets mutate towards harder only.
  static GenerationConfig preset(std::string_view name);
  static std::vector<std::string> preset_names();
  // [evolve] section: optional `preset`, then per-field overrides.
  static GenerationConfig from_config(const Config& config);
};

struct Variant {
  std::string statement;
  Provenance provenance = Provenance::kMutationMedium;
  std::vector<std::string> parents;
};

// Strips whitespace and a leading "New Question:" label. Empty means unusable.
std::string clean_generated_statement(std::string_view text);

// One generator call per difficulty. Empty completions are skipped and
// counted in *unusable.
std::vector<Variant> mutate(const ProblemRecord& problem,
                            std::span<const prompts::Difficulty> difficulties, Gateway& gateway,
                            const std::string& model_id, const std::string& context,
                            std::size_t* unusable = nullptr);

// `outputs` calls on the same crossover prompt; parents are the batch ids.
std::vector<Variant> crossover(std::span<const ProblemRecord> batch, std::size_t outputs,
                               Gateway& gateway, const std::string& model_id,
                               const std::string& context, std::size_t* unusable = nullptr);

// Indices (ascending) of the `keep` candidates whose maximum cosine
// similarity to `reference` is smallest; ties go to the earlier candidate.
// With an empty reference every score is equal.
std::vector<std::size_t> kfn_select(std::span<const std::vector<double>> candidates,
                                    std::span<const std::vector<double>> reference,
                                    std::size_t keep);
// The score kfn_select ranks by.
double max_cosine(std::span<const double> v, std::span<const std::vector<double>> reference);

struct ColonyState {
  std::size_t colony = 0;
  std::vector<ProblemRecord> seed_pool;
  std::vector<ProblemRecord> new_problems;
  std::mt19937_64 rng;
  std::size_t iteration = 0;
  std::size_t next_id = 0;
};

struct ColonyReport {
  std::size_t colony = 0;
  std::size_t iterations = 0;
  std::size_t mutation_ops = 0;
  std::size_t crossover_ops = 0;
  std::size_t generated = 0;      // usable variants returned by the generator
  std::size_t unusable = 0;       // empty completions
  std::size_t kfn_dropped = 0;
  std::size_t dedup_dropped = 0;  // rejected from new problems as near-duplicates
  std::size_t accepted = 0;
  bool exhausted = false;  // gateway failure ended the colony early
  bool stalled = false;
  bool resumed = false;
  std::string error;
};

// Sets status (and solution/tests) on freshly accepted problems before they
// join the seed pool. Failing problems stay in the pool.
using Verifier = std::function<void(std::vector<ProblemRecord>&)>;

struct EvolveEnv {
  Gateway* gateway = nullptr;
  EmbeddingProvider* embedder = nullptr;  // required when k-FN is enabled
  EmbedOptions embed_options;
  Verifier verifier;
  std::optional<std::filesystem::path> checkpoint_dir;
  std::size_t colony_workers = 0;  // 0 = one thread per colony
  dedup::DedupConfig dedup;
};

// Runs the colony loop until it holds `target` new problems. A report loaded
// from a checkpoint carries its counters into the resumed run.
ColonyReport evolve_colony(ColonyState& state, std::size_t target, const GenerationConfig& config,
                           const EvolveEnv& env, std::optional<ColonyReport> resumed = {});

struct GenerationResult {
  DatasetManifest merged;     // colony outputs before the final dedup
  DatasetManifest manifest;   // after the final dedup, carries the fingerprint
  std::vector<dedup::RemovedPair> removed;
  std::vector<ColonyReport> colonies;
  bool partial = false;
};

// Samples B_s seeds per colony, evolves the colonies in parallel, merges and
// deduplicates. With a checkpoint directory, colonies resume from their last
// snapshot when the fingerprint matches.
GenerationResult run_generation(const GenerationConfig& config, const DatasetManifest& seeds,
                                const EvolveEnv& env);

// Checkpoint line for one colony snapshot, and its inverse.
std::string checkpoint_line(const ColonyState& state, const ColonyReport& report,
                            const std::string& fingerprint);
std::optional<std::pair<ColonyState, ColonyReport>> load_checkpoint(
    const std::filesystem::path& path, const std::string& fingerprint);

}  // namespace benchsynth
