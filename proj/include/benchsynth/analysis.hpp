#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "benchsynth/corpus.hpp"
#include "benchsynth/embedding.hpp"
#include "benchsynth/metrics/protocols.hpp"
#include "benchsynth/projection.hpp"
#include "benchsynth/verify.hpp"

namespace benchsynth::analysis {

struct EmbeddingSource {
  EmbeddingProvider* provider = nullptr;  // unused for precomputed-import
  EmbedOptions options;
};

struct MeasureSpec {
  ProjectionConfig projection;
  std::size_t k = metrics::kDefaultNoveltyK;
  std::size_t subsample = 150;  // N
  bool subsample_explicit = false;  // otherwise capped at the smallest dataset
  std::size_t trials = 250;     // T
  std::uint64_t seed = 0;
};

// runs[r][i] holds dataset i after joint projection run r.
using ProjectedRuns = std::vector<std::vector<knn::PointSet>>;

ProjectedRuns project_datasets(std::span<const DatasetManifest> datasets,
                               const EmbeddingSource& source, const ProjectionConfig& projection);

struct MetricReport {
  std::string metric;    // novelty | diversity
  std::string dataset;
  std::string baseline;  // novelty only
  double value = 0.0;
  double ci95 = 0.0;
  std::size_t k = 0;
  std::size_t d = 0;
  std::size_t subsample = 0;  // N
  std::size_t trials = 0;     // T
  std::size_t runs = 0;
  std::vector<std::uint64_t> seeds;  // one per projection run
  std::vector<double> values;        // per run (novelty) or per trial, run-major
  std::string fingerprint;

  nlohmann::ordered_json to_json() const;
};

// Every candidate against the baseline, all projected in one joint call per
// run. `runs` must come from project_datasets over {candidates..., baseline}.
std::vector<MetricReport> novelty_reports(const ProjectedRuns& runs,
                                          std::span<const std::string> names,
                                          const MeasureSpec& spec);
std::vector<MetricReport> diversity_reports(const ProjectedRuns& runs,
                                            std::span<const std::string> names,
                                            const MeasureSpec& spec);

std::vector<MetricReport> measure_novelty(std::span<const DatasetManifest> candidates,
                                          const DatasetManifest& baseline,
                                          const EmbeddingSource& source, const MeasureSpec& spec);
std::vector<MetricReport> measure_diversity(std::span<const DatasetManifest> datasets,
                                            const EmbeddingSource& source,
                                            const MeasureSpec& spec);

// Splits one dataset into two random halves (seeded) and measures the
// novelty of the first against the second.
MetricReport measure_split_half(const DatasetManifest& dataset, const EmbeddingSource& source,
                                const MeasureSpec& spec);

// CSV dataset,baseline,metric,run,trial,value.
void write_trials_csv(std::span<const MetricReport> reports, const std::filesystem::path& path);

enum class SweepParam { kK, kNeighbors, kMinDist };
SweepParam parse_sweep_param(std::string_view s);
std::string_view to_string(SweepParam p);

struct SweepRow {
  std::string param;
  double param_value = 0.0;
  std::string dataset;
  std::string metric;
  double value = 0.0;
  double ci95 = 0.0;
};

// Re-runs the metric for each grid value. For novelty the last dataset is the
// baseline. k reuses one projection; n-neighbors and min-dist re-project.
std::vector<SweepRow> sweep(SweepParam param, std::span<const double> grid,
                            const std::string& metric, std::span<const DatasetManifest> datasets,
                            const EmbeddingSource& source, const MeasureSpec& spec);

// CSV param,param_value,dataset,metric,value,ci95.
void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path);

// CSV model,dataset,pass,fail,err with percentages.
void write_evaluation_csv(std::span<const EvaluationResult> results,
                          const std::filesystem::path& path);
nlohmann::ordered_json evaluation_json(const EvaluationResult& r);

}  // namespace benchsynth::analysis
