#include "benchsynth/analysis.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "benchsynth/common/digest.hpp"
#include "benchsynth/common/errors.hpp"

namespace benchsynth::analysis {
namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(12);
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::string fingerprint_of(const std::string& metric, const MeasureSpec& spec,
                           std::span<const std::string> names, std::size_t subsample) {
  std::ostringstream s;
  s.precision(17);
  s << metric << "|k=" << spec.k << "|N=" << subsample << "|T=" << spec.trials
    << "|method=" << to_string(spec.projection.method) << "|dim=" << spec.projection.target_dim
    << "|runs=" << spec.projection.runs << "|nn=" << spec.projection.n_neighbors
    << "|md=" << spec.projection.min_dist << "|seed=" << spec.seed
    << "|pseed=" << spec.projection.seed;
  for (const auto& n : names) s << "|" << n;
  return sha256_hex(s.str());
}

std::vector<std::uint64_t> run_seeds(const MeasureSpec& spec, std::size_t runs) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t r = 0; r < runs; ++r) seeds.push_back(spec.projection.seed + r);
  return seeds;
}

std::vector<std::string> names_of(std::span<const DatasetManifest> datasets) {
  std::vector<std::string> names;
  for (const auto& d : datasets) names.push_back(d.name);
  return names;
}

}  // namespace

ProjectedRuns project_datasets(std::span<const DatasetManifest> datasets,
                               const EmbeddingSource& source, const ProjectionConfig& projection) {
  projection.validate();
  std::vector<std::vector<EmbeddingMatrix>> families;
  if (projection.method == ProjectionMethod::kPrecomputedImport) {
    std::vector<DatasetIds> ids;
    for (const auto& d : datasets) {
      DatasetIds di{d.name, {}};
      for (const auto& r : d.records) di.ids.push_back(r.id);
      ids.push_back(std::move(di));
    }
    families = import_coordinates(projection.coordinates_path, ids);
  } else {
    if (!source.provider) throw ConfigError("measuring needs an embedding provider");
    std::vector<EmbeddingMatrix> matrices;
    for (const auto& d : datasets) matrices.push_back(embed_dataset(d, *source.provider, source.options));
    families = project_jointly(matrices, projection);
  }
  ProjectedRuns runs;
  for (auto& fam : families) {
    std::vector<knn::PointSet> sets;
    for (auto& m : fam) sets.push_back(std::move(m.vectors));
    runs.push_back(std::move(sets));
  }
  return runs;
}

nlohmann::ordered_json MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["metric"] = metric;
  j["dataset"] = dataset;
  if (!baseline.empty()) j["baseline"] = baseline;
  j["value"] = value;
  j["ci95"] = ci95;
  j["k"] = k;
  j["d"] = d;
  j["N"] = subsample;
  j["T"] = trials;
  j["runs"] = runs;
  j["seeds"] = seeds;
  j["fingerprint"] = fingerprint;
  return j;
}

std::vector<MetricReport> novelty_reports(const ProjectedRuns& runs,
                                          std::span<const std::string> names,
                                          const MeasureSpec& spec) {
  if (runs.empty()) throw DataError("no projection runs");
  const std::size_t count = runs.front().size();
  if (count < 2 || names.size() != count) {
    throw UsageError("novelty needs at least one candidate and a baseline");
  }
  const auto fp = fingerprint_of("novelty", spec, names, 0);
  std::vector<MetricReport> out;
  for (std::size_t i = 0; i + 1 < count; ++i) {
    std::vector<knn::PointSet> cand, base;
    for (const auto& run : runs) {
      cand.push_back(run[i]);
      base.push_back(run[count - 1]);
    }
    auto est = metrics::novelty_protocol(cand, base, spec.k);
    MetricReport r;
    r.metric = "novelty";
    r.dataset = names[i];
    r.baseline = names[count - 1];
    r.value = est.value;
    r.ci95 = est.ci95;
    r.k = est.k;
    r.d = est.d;
    r.runs = runs.size();
    r.seeds = run_seeds(spec, runs.size());
    r.values = est.per_run;
    r.fingerprint = fp;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MetricReport> diversity_reports(const ProjectedRuns& runs,
                                            std::span<const std::string> names,
                                            const MeasureSpec& spec) {
  if (runs.empty()) throw DataError("no projection runs");
  const std::size_t count = runs.front().size();
  if (names.size() != count) throw UsageError("dataset names do not match projection output");
  std::size_t n = spec.subsample;
  if (!spec.subsample_explicit) {
    for (const auto& s : runs.front()) n = std::min(n, s.size());
  }
  const auto fp = fingerprint_of("diversity", spec, names, n);
  std::vector<MetricReport> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<knn::PointSet> sets;
    for (const auto& run : runs) sets.push_back(run[i]);
    auto est = metrics::diversity_protocol(sets, n, spec.trials, spec.k, spec.seed);
    MetricReport r;
    r.metric = "diversity";
    r.dataset = names[i];
    r.value = est.value;
    r.ci95 = est.ci95;
    r.k = est.k;
    r.d = est.d;
    r.subsample = est.subsample;
    r.trials = est.trials;
    r.runs = est.runs;
    r.seeds = run_seeds(spec, runs.size());
    r.values = est.per_trial;
    r.fingerprint = fp;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MetricReport> measure_novelty(std::span<const DatasetManifest> candidates,
                                          const DatasetManifest& baseline,
                                          const EmbeddingSource& source, const MeasureSpec& spec) {
  std::vector<DatasetManifest> all(candidates.begin(), candidates.end());
  all.push_back(baseline);
  auto runs = project_datasets(all, source, spec.projection);
  auto names = names_of(all);
  return novelty_reports(runs, names, spec);
}

std::vector<MetricReport> measure_diversity(std::span<const DatasetManifest> datasets,
                                            const EmbeddingSource& source,
                                            const MeasureSpec& spec) {
  auto runs = project_datasets(datasets, source, spec.projection);
  auto names = names_of(datasets);
  return diversity_reports(runs, names, spec);
}

MetricReport measure_split_half(const DatasetManifest& dataset, const EmbeddingSource& source,
                                const MeasureSpec& spec) {
  const auto n = dataset.records.size();
  if (n < 2) throw InsufficientPoints("split-half needs at least two records");
  const auto first = metrics::sample_without_replacement(n, n / 2, spec.seed);
  std::vector<char> in_first(n, 0);
  for (auto i : first) in_first[i] = 1;
  DatasetManifest a, b;
  a.name = dataset.name + "[half-a]";
  b.name = dataset.name + "[half-b]";
  for (std::size_t i = 0; i < n; ++i) {
    (in_first[i] ? a : b).records.push_back(dataset.records[i]);
  }
  std::vector<DatasetManifest> cand{a};
  return measure_novelty(cand, b, source, spec).front();
}

void write_trials_csv(std::span<const MetricReport> reports, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "dataset,baseline,metric,run,trial,value\n";
  for (const auto& r : reports) {
    const std::size_t per_run = r.metric == "diversity" && r.trials ? r.trials : 1;
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      out << csv_field(r.dataset) << "," << csv_field(r.baseline) << "," << r.metric << ","
          << i / per_run << "," << i % per_run << "," << r.values[i] << "\n";
    }
  }
}

SweepParam parse_sweep_param(std::string_view s) {
  if (s == "k") return SweepParam::kK;
  if (s == "n-neighbors") return SweepParam::kNeighbors;
  if (s == "min-dist") return SweepParam::kMinDist;
  throw UsageError("sweep parameter must be k, n-neighbors or min-dist");
}

std::string_view to_string(SweepParam p) {
  switch (p) {
    case SweepParam::kK:
      return "k";
    case SweepParam::kNeighbors:
      return "n-neighbors";
    case SweepParam::kMinDist:
      return "min-dist";
  }
  return "k";
}

std::vector<SweepRow> sweep(SweepParam param, std::span<const double> grid,
                            const std::string& metric, std::span<const DatasetManifest> datasets,
                            const EmbeddingSource& source, const MeasureSpec& spec) {
  if (grid.empty()) throw UsageError("sweep grid is empty");
  if (metric != "novelty" && metric != "diversity") {
    throw UsageError("sweep metric must be novelty or diversity");
  }
  const auto names = names_of(datasets);
  ProjectedRuns shared;
  if (param == SweepParam::kK) shared = project_datasets(datasets, source, spec.projection);
  std::vector<SweepRow> rows;
  for (double v : grid) {
    MeasureSpec s = spec;
    ProjectedRuns local;
    const ProjectedRuns* runs = &shared;
    switch (param) {
      case SweepParam::kK:
        if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v))) {
          throw UsageError("k grid values must be positive integers");
        }
        s.k = static_cast<std::size_t>(v);
        break;
      case SweepParam::kNeighbors:
        s.projection.n_neighbors = static_cast<std::size_t>(v);
        break;
      case SweepParam::kMinDist:
        s.projection.min_dist = v;
        break;
    }
    if (param != SweepParam::kK) {
      local = project_datasets(datasets, source, s.projection);
      runs = &local;
    }
    auto reports = metric == "novelty" ? novelty_reports(*runs, names, s)
                                       : diversity_reports(*runs, names, s);
    for (const auto& r : reports) {
      rows.push_back({std::string(to_string(param)), v, r.dataset, metric, r.value, r.ci95});
    }
  }
  return rows;
}

void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "param,param_value,dataset,metric,value,ci95\n";
  for (const auto& r : rows) {
    out << r.param << "," << r.param_value << "," << csv_field(r.dataset) << "," << r.metric << ","
        << r.value << "," << r.ci95 << "\n";
  }
}

void write_evaluation_csv(std::span<const EvaluationResult> results,
                          const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "model,dataset,pass,fail,err\n";
  for (const auto& r : results) {
    out << csv_field(r.model_id) << "," << csv_field(r.dataset) << "," << r.pass_rate() << ","
        << r.fail_rate() << "," << r.err_rate() << "\n";
  }
}

nlohmann::ordered_json evaluation_json(const EvaluationResult& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model_id;
  j["dataset"] = r.dataset;
  j["pass"] = r.pass_rate();
  j["fail"] = r.fail_rate();
  j["err"] = r.err_rate();
  j["counts"] = {{"pass", r.pass}, {"fail", r.fail}, {"err", r.err}};
  j["evaluated"] = r.evaluated();
  j["excluded"] = r.excluded;
  return j;
}

}  // namespace benchsynth::analysis
