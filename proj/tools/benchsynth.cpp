// benchsynth: generate, measure and evaluate coding benchmarks.

#include <omp.h>

#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "benchsynth/analysis.hpp"
#include "benchsynth/common/config.hpp"
#include "benchsynth/dedup.hpp"
#include "benchsynth/gateway.hpp"
#include "benchsynth/pipeline.hpp"
#include "benchsynth/postprocess.hpp"

namespace fs = std::filesystem;
using namespace benchsynth;

namespace {

struct Common {
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 0;
};

void apply_workers(const Common& c) {
  if (c.workers > 0) omp_set_num_threads(c.workers);
}

int worker_count(const Common& c) {
  if (c.workers > 0) return c.workers;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

std::vector<DatasetManifest> load_all(const std::vector<std::string>& paths) {
  std::vector<DatasetManifest> out;
  for (const auto& p : paths) out.push_back(load_dataset(p));
  return out;
}

// --- generate -------------------------------------------------------------

struct GenerateArgs {
  std::string config, seeds, out, seed_format = "native";
  bool include_failed = false;
  bool fresh = false;
};

int run_generate(const GenerateArgs& a, const Common& common) {
  auto config = Config::load(a.config);
  if (common.seed_set) config.set("evolve", "seed", std::to_string(common.seed));
  if (common.workers > 0) {
    config.set("verify", "workers", std::to_string(common.workers));
    config.set("postprocess", "workers", std::to_string(common.workers));
  }
  auto seeds = import_seed_dataset(a.seeds, parse_seed_format(a.seed_format));
  PipelineServices services;
  std::unique_ptr<EmbeddingCache> cache;
  auto settings = PipelineSettings::from_config(config, services, &cache);
  const fs::path out = a.out;
  settings.checkpoint_dir = sibling(out, "checkpoints");
  if (a.fresh) fs::remove_all(*settings.checkpoint_dir);
  auto result = run_pipeline(settings, seeds, services);
  write_pipeline_outputs(result, out, a.include_failed);
  const auto& r = result.report;
  std::cout << "generated " << r["generated"].get<std::size_t>() << ", passing "
            << r["passing"].get<std::size_t>() << ", filtered " << r["filtered"].get<std::size_t>()
            << ", avg tests " << r["avg_tests"].get<double>() << ", coverage "
            << r["coverage"].get<double>() << "\n";
  if (r["partial"].get<bool>()) {
    std::cerr << "warning: generation stopped early; rerun to resume from checkpoints\n";
    return static_cast<int>(ErrorClass::kExternal);
  }
  return 0;
}

// --- measure / sweep ------------------------------------------------------

struct MeasureArgs {
  std::string metric;
  std::vector<std::string> datasets;
  std::string baseline;
  std::size_t k = 4, dim = 10, runs = 10, n = 150, t = 250, neighbors = 80;
  double min_dist = 0.1;
  std::string method = "linear-pca";
  std::string coords, reducer, config, out, trials_csv;
  bool split_half = false;
  CLI::Option* n_opt = nullptr;
};

struct EmbeddingHolder {
  analysis::EmbeddingSource source;
  EmbeddingSetup setup;
};

EmbeddingHolder make_source(const std::string& config_path) {
  EmbeddingHolder h;
  Config cfg = config_path.empty() ? Config::parse("", "<defaults>") : Config::load(config_path);
  h.setup = embedding_setup(cfg);
  cfg.check_consumed({"embedding"});
  h.source.provider = h.setup.provider.get();
  h.source.options = h.setup.options;
  return h;
}

analysis::MeasureSpec make_spec(const MeasureArgs& a, const Common& c) {
  analysis::MeasureSpec s;
  s.projection.method = parse_projection_method(a.method);
  s.projection.target_dim = a.dim;
  s.projection.runs = a.runs;
  s.projection.n_neighbors = a.neighbors;
  s.projection.min_dist = a.min_dist;
  s.projection.seed = c.seed;
  s.projection.reducer_command = a.reducer;
  s.projection.coordinates_path = a.coords;
  if (s.projection.method == ProjectionMethod::kPrecomputedImport && a.coords.empty()) {
    throw UsageError("--method precomputed-import needs --coords");
  }
  if (s.projection.method == ProjectionMethod::kExternalReducer && a.reducer.empty()) {
    throw UsageError("--method external-reducer needs --reducer");
  }
  s.k = a.k;
  s.subsample = a.n;
  s.subsample_explicit = a.n_opt && a.n_opt->count() > 0;
  s.trials = a.t;
  s.seed = c.seed;
  return s;
}

int run_measure(const MeasureArgs& a, const Common& c) {
  apply_workers(c);
  auto holder = make_source(a.config);
  auto spec = make_spec(a, c);
  auto datasets = load_all(a.datasets);
  std::vector<analysis::MetricReport> reports;
  if (a.metric == "novelty") {
    if (a.split_half) {
      if (datasets.size() != 1) throw UsageError("--split-half takes exactly one dataset");
      reports.push_back(analysis::measure_split_half(datasets.front(), holder.source, spec));
    } else {
      if (a.baseline.empty()) throw UsageError("novelty needs --baseline");
      reports = analysis::measure_novelty(datasets, load_dataset(a.baseline), holder.source, spec);
    }
  } else {
    if (a.split_half) throw UsageError("--split-half applies to novelty only");
    reports = analysis::measure_diversity(datasets, holder.source, spec);
  }
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : reports) j.push_back(r.to_json());
  const auto& doc = reports.size() == 1 ? j.front() : j;
  std::cout << doc.dump(2) << "\n";
  if (!a.out.empty()) write_json(a.out, doc);
  analysis::write_trials_csv(reports,
                             a.trials_csv.empty() ? a.metric + "-trials.csv" : a.trials_csv);
  return 0;
}

struct SweepArgs {
  MeasureArgs m;
  std::string param;
  std::vector<double> grid;
  std::string out = "sweep.csv";
};

int run_sweep(SweepArgs& a, const Common& c) {
  apply_workers(c);
  if (a.grid.empty()) throw UsageError("sweep grid is empty");
  auto holder = make_source(a.m.config);
  auto spec = make_spec(a.m, c);
  auto datasets = load_all(a.m.datasets);
  if (a.m.metric == "novelty") {
    if (a.m.baseline.empty()) throw UsageError("novelty sweep needs --baseline");
    datasets.push_back(load_dataset(a.m.baseline));
  }
  auto rows = analysis::sweep(analysis::parse_sweep_param(a.param), a.grid, a.m.metric, datasets,
                              holder.source, spec);
  analysis::write_sweep_csv(rows, a.out);
  std::cout << "wrote " << rows.size() << " rows to " << a.out << "\n";
  return 0;
}

// --- evaluate -------------------------------------------------------------

struct EvaluateArgs {
  std::string model, dataset, out = "evaluation", config, prompt;
};

int run_evaluate(const EvaluateArgs& a, const Common& c) {
  auto config = Config::load(a.config);
  if (c.seed_set) config.set("llm", "seed", std::to_string(c.seed));
  auto provider = make_completion_provider(config);
  auto gopts = gateway_options(config);
  if (auto log = config.get("llm", "usage_log"); log && !log->empty()) gopts.usage_log = *log;
  auto sandbox = sandbox::make_client(config);
  VerifyOptions vopts;
  vopts.timeout_s = config.get_double("verify", "timeout_s", 10.0);
  vopts.workers = static_cast<int>(config.get_int("verify", "workers", worker_count(c)));
  // A full pipeline config is fine here; only the sections read above are checked.
  config.check_consumed({"llm", "sandbox", "verify"});
  std::string tmpl;
  if (!a.prompt.empty()) {
    std::ifstream in(a.prompt);
    if (!in) throw UsageError("cannot read prompt template " + a.prompt);
    tmpl.assign(std::istreambuf_iterator<char>(in), {});
  }
  Gateway gateway(std::move(provider), gopts);
  auto manifest = load_dataset(a.dataset);
  auto res = evaluate_testtaker(a.model, manifest, gateway, *sandbox, vopts, tmpl);
  auto j = analysis::evaluation_json(res);
  write_json(a.out + ".json", j);
  std::vector<EvaluationResult> one{res};
  analysis::write_evaluation_csv(one, a.out + ".csv");
  std::cout << j.dump(2) << "\n";
  if (res.excluded) std::cerr << res.excluded << " problems excluded after gateway failures\n";
  return 0;
}

// --- utilities ------------------------------------------------------------

int run_import(const std::string& in, const std::string& format, const std::string& out) {
  auto m = import_seed_dataset(in, parse_seed_format(format));
  save_dataset(m, out);
  std::cout << "imported " << m.records.size() << " records\n";
  return 0;
}

int run_dedup(const std::string& in, const std::string& out, const std::string& log,
              const dedup::DedupConfig& cfg) {
  auto m = load_dataset(in);
  auto res = dedup::deduplicate(m, cfg);
  save_dataset(res.retained, out);
  if (!log.empty()) dedup::write_removal_log(res.removed, log);
  std::cout << "kept " << res.retained.records.size() << ", removed " << res.removed.size() << "\n";
  return 0;
}

int run_topics(const std::vector<std::string>& datasets, const std::string& out) {
  auto manifests = load_all(datasets);
  write_topic_csv(manifests, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark synthesis and information-theoretic dataset analysis"};
  app.require_subcommand(1);
  Common common;
  auto* seed_opt = app.add_option("--seed", common.seed, "Master seed")->default_val(0);
  app.add_option("--workers", common.workers, "Worker pool size (default: available cores)");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Evolve, verify, deduplicate and postprocess");
  g->add_option("--config", gen.config, "Pipeline config file")->required()->check(CLI::ExistingFile);
  g->add_option("--seeds", gen.seeds, "Seed dataset")->required()->check(CLI::ExistingFile);
  g->add_option("--seed-format", gen.seed_format, "native, mbpp or leetcode");
  g->add_option("--out", gen.out, "Output manifest path")->required();
  g->add_flag("--include-failed", gen.include_failed, "Also export non-passing problems");
  g->add_flag("--fresh", gen.fresh, "Ignore existing checkpoints");

  MeasureArgs meas;
  auto* m = app.add_subcommand("measure", "Novelty or diversity of datasets");
  auto add_measure_opts = [](CLI::App* cmd, MeasureArgs& a) {
    cmd->add_option("--baseline", a.baseline, "Baseline dataset for novelty");
    cmd->add_option("--k", a.k, "k-NN parameter")->default_val(4);
    cmd->add_option("--dim", a.dim, "Projection dimension")->default_val(10);
    cmd->add_option("--runs", a.runs, "Projection runs")->default_val(10);
    a.n_opt = cmd->add_option("--N", a.n, "Diversity subsample size")->default_val(150);
    cmd->add_option("--T", a.t, "Diversity trials")->default_val(250);
    cmd->add_option("--method", a.method, "precomputed-import, linear-pca or external-reducer")
        ->default_val("linear-pca");
    cmd->add_option("--n-neighbors", a.neighbors, "Reducer neighbours")->default_val(80);
    cmd->add_option("--min-dist", a.min_dist, "Reducer minimum distance")->default_val(0.1);
    cmd->add_option("--coords", a.coords, "Coordinates file for precomputed-import");
    cmd->add_option("--reducer", a.reducer, "Reducer command for external-reducer");
    cmd->add_option("--config", a.config, "Config file with an [embedding] section");
  };
  m->add_option("metric", meas.metric, "novelty or diversity")
      ->required()
      ->check(CLI::IsMember({"novelty", "diversity"}));
  m->add_option("datasets", meas.datasets, "Dataset files")->required();
  add_measure_opts(m, meas);
  m->add_flag("--split-half", meas.split_half, "Novelty of one random half against the other");
  m->add_option("--out", meas.out, "Write the JSON report here too");
  m->add_option("--trials-csv", meas.trials_csv, "Per-run/per-trial values");

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "Metric sensitivity over a parameter grid");
  s->add_option("--param", sw.param, "k, n-neighbors or min-dist")->required();
  s->add_option("--grid", sw.grid, "Comma-separated values")->delimiter(',');
  s->add_option("--metric", sw.m.metric, "novelty or diversity")
      ->default_val("novelty")
      ->check(CLI::IsMember({"novelty", "diversity"}));
  s->add_option("datasets", sw.m.datasets, "Dataset files")->required();
  add_measure_opts(s, sw.m);
  s->add_option("--out", sw.out, "CSV output")->default_val("sweep.csv");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score a test-taker model on a passing dataset");
  e->add_option("--model", ev.model, "Model id")->required();
  e->add_option("--dataset", ev.dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  e->add_option("--config", ev.config, "Config with [llm], [sandbox], [verify]")
      ->required()
      ->check(CLI::ExistingFile);
  e->add_option("--prompt", ev.prompt, "Prompt template with a {problem} placeholder");
  e->add_option("--out", ev.out, "Output prefix for .json and .csv")->default_val("evaluation");

  std::string imp_in, imp_format = "mbpp", imp_out;
  auto* im = app.add_subcommand("import", "Normalize an external seed dataset");
  im->add_option("--in", imp_in, "Source file")->required()->check(CLI::ExistingFile);
  im->add_option("--format", imp_format, "native, mbpp or leetcode");
  im->add_option("--out", imp_out, "Output manifest")->required();

  std::string dd_in, dd_out, dd_log;
  dedup::DedupConfig dd_cfg;
  auto* dd = app.add_subcommand("dedup", "Remove near-duplicate statements");
  dd->add_option("--in", dd_in, "Input manifest")->required()->check(CLI::ExistingFile);
  dd->add_option("--out", dd_out, "Output manifest")->required();
  dd->add_option("--log", dd_log, "Removal log (JSONL)");
  dd->add_option("--threshold", dd_cfg.threshold, "Jaccard threshold")->default_val(0.75);
  dd->add_option("--shingle-width", dd_cfg.shingle_width, "Tokens per shingle")->default_val(3);
  dd->add_option("--permutations", dd_cfg.permutations, "MinHash permutations")->default_val(250);
  dd->add_option("--bands", dd_cfg.bands, "LSH bands")->default_val(25);

  std::vector<std::string> tp_datasets;
  std::string tp_out = "topics.csv";
  auto* tp = app.add_subcommand("topics", "Topic histogram of labeled datasets");
  tp->add_option("datasets", tp_datasets, "Dataset files")->required();
  tp->add_option("--out", tp_out, "CSV output")->default_val("topics.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : static_cast<int>(ErrorClass::kUsage);
  }
  common.seed_set = seed_opt->count() > 0;

  try {
    if (*g) return run_generate(gen, common);
    if (*m) return run_measure(meas, common);
    if (*s) return run_sweep(sw, common);
    if (*e) return run_evaluate(ev, common);
    if (*im) return run_import(imp_in, imp_format, imp_out);
    if (*dd) {
      dd_cfg.seed = common.seed;
      dd_cfg.validate();
      return run_dedup(dd_in, dd_out, dd_log, dd_cfg);
    }
    if (*tp) return run_topics(tp_datasets, tp_out);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return static_cast<int>(err.error_class());
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return static_cast<int>(ErrorClass::kData);
  }
  return 0;
}
