#include "benchsynth/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>

#include "benchsynth/common/config.hpp"
#include "benchsynth/common/digest.hpp"
#include "benchsynth/gateway.hpp"

namespace benchsynth {
namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::filesystem::path sibling(const std::filesystem::path& out, const std::string& suffix) {
  auto p = out;
  p.replace_extension();
  return p.string() + "." + suffix;
}

PipelineSettings PipelineSettings::from_config(const Config& config, PipelineServices& services,
                                               std::unique_ptr<EmbeddingCache>* cache_holder) {
  PipelineSettings s;
  s.generation = GenerationConfig::from_config(config);
  s.colony_workers = static_cast<std::size_t>(config.get_int("evolve", "colony_workers", 0));

  s.verify.max_iterations = s.generation.feedback_iterations;
  s.verify.timeout_s = config.get_double("verify", "timeout_s", 10.0);
  s.verify.collect_coverage = config.get_bool("verify", "coverage", true);
  s.verify.model_id = config.get_string("verify", "model", s.generation.model_id);
  s.verify.workers = static_cast<int>(config.get_int("verify", "workers", 8));
  s.verify.requeue_limit = static_cast<int>(config.get_int("verify", "requeue_limit", 1));
  if (s.verify.timeout_s <= 0) throw ConfigError("verify.timeout_s must be positive");

  s.dedup.threshold = config.get_double("dedup", "threshold", s.dedup.threshold);
  s.dedup.shingle_width = static_cast<std::size_t>(
      config.get_int("dedup", "shingle_width", static_cast<std::int64_t>(s.dedup.shingle_width)));
  s.dedup.permutations = static_cast<std::size_t>(
      config.get_int("dedup", "permutations", static_cast<std::int64_t>(s.dedup.permutations)));
  s.dedup.bands = static_cast<std::size_t>(
      config.get_int("dedup", "bands", static_cast<std::int64_t>(s.dedup.bands)));
  s.dedup.seed = static_cast<std::uint64_t>(config.get_int("dedup", "seed", 0));
  s.dedup.validate();

  s.postprocess.rephrase = config.get_bool("postprocess", "rephrase", true);
  s.postprocess.label = config.get_bool("postprocess", "label_topics", true);
  s.postprocess.rephrase_model =
      config.get_string("postprocess", "rephrase_model", s.generation.model_id);
  s.postprocess.topic_model = config.get_string("postprocess", "topic_model", "gpt-4o-mini");
  s.postprocess.workers = static_cast<int>(config.get_int("postprocess", "workers", 8));
  s.postprocess.timeout_s = s.verify.timeout_s;

  s.gateway = gateway_options(config);
  if (auto log = config.get("llm", "usage_log"); log && !log->empty()) s.gateway.usage_log = *log;
  if (!services.llm) services.llm = make_completion_provider(config);
  if (!services.sandbox) services.sandbox = sandbox::make_client(config);
  auto setup = embedding_setup(config);
  s.embed_options = setup.options;
  if (!services.embedder) services.embedder = std::shared_ptr<EmbeddingProvider>(std::move(setup.provider));
  if (cache_holder) {
    *cache_holder = std::move(setup.cache);
  } else {
    s.embed_options.cache = nullptr;
  }
  s.config_fingerprint = sha256_hex(config.canonical());
  config.check_all_consumed();
  return s;
}

PipelineResult run_pipeline(const PipelineSettings& settings, const DatasetManifest& seeds,
                            const PipelineServices& services) {
  if (!services.llm || !services.sandbox) throw ConfigError("pipeline services are incomplete");
  Gateway gateway(services.llm, settings.gateway);
  auto& sandbox = *services.sandbox;

  std::mutex log_mu;
  std::map<std::string, std::string> outcome_lines;
  auto record_outcome = [&](const VerificationOutcome& o) {
    std::lock_guard lock(log_mu);
    outcome_lines[o.problem_id] = outcome_log_line(o);
  };

  EvolveEnv env;
  env.gateway = &gateway;
  env.embedder = services.embedder.get();
  env.embed_options = settings.embed_options;
  env.checkpoint_dir = settings.checkpoint_dir;
  env.colony_workers = settings.colony_workers;
  env.dedup = settings.dedup;
  env.verifier = [&](std::vector<ProblemRecord>& fresh) {
    for (auto& rec : fresh) {
      try {
        auto o = feedback_loop(rec, gateway, sandbox, settings.verify);
        apply_outcome(rec, o);
        record_outcome(o);
      } catch (const GatewayError&) {
        // Left unverified; picked up again after generation.
      }
    }
  };

  auto gen = run_generation(settings.generation, seeds, env);

  // Problems whose verification was interrupted get another pass.
  std::vector<ProblemRecord> pending;
  for (const auto& r : gen.merged.records) {
    if (r.status == Status::kUnverified) pending.push_back(r);
  }
  std::vector<std::string> deferred;
  if (!pending.empty()) {
    auto batch = verify_all(pending, gateway, sandbox, settings.verify);
    std::map<std::string, const VerificationOutcome*> by_id;
    for (const auto& o : batch.outcomes) {
      by_id[o.problem_id] = &o;
      record_outcome(o);
    }
    for (auto* m : {&gen.merged, &gen.manifest}) {
      for (auto& r : m->records) {
        if (auto it = by_id.find(r.id); it != by_id.end()) apply_outcome(r, *it->second);
      }
    }
    deferred = batch.deferred;
  }

  PipelineResult res;
  res.prefilter = gen.merged;
  res.prefilter.name = gen.merged.name + "-prefilter";
  res.removed = gen.removed;

  res.pre_postprocess.name = gen.manifest.name + "-prepost";
  res.pre_postprocess.lineage = gen.manifest.lineage;
  res.pre_postprocess.config_fingerprint = gen.manifest.config_fingerprint;
  res.failed = res.pre_postprocess;
  res.failed.name = gen.manifest.name + "-failed";
  for (const auto& r : gen.manifest.records) {
    (r.status == Status::kPassing ? res.pre_postprocess : res.failed).records.push_back(r);
  }

  auto post = postprocess_dataset(res.pre_postprocess, gateway, sandbox, settings.postprocess);
  res.final_manifest = std::move(post.manifest);
  res.final_manifest.name = gen.manifest.name;

  for (auto& [id, line] : outcome_lines) res.outcome_log.push_back(line);

  std::map<std::string, std::size_t> categories;
  for (auto s : {Status::kPassing, Status::kFailing, Status::kErroring, Status::kUnparsable,
                 Status::kUnverified}) {
    categories[std::string(to_string(s))] = 0;
  }
  for (const auto& r : res.prefilter.records) ++categories[std::string(to_string(r.status))];

  std::vector<double> tests, coverage;
  for (const auto& r : res.final_manifest.records) {
    tests.push_back(r.test_count);
    if (r.coverage) coverage.push_back(*r.coverage);
  }

  auto& rep = res.report;
  rep["dataset"] = res.final_manifest.name;
  rep["config_fingerprint"] = settings.config_fingerprint;
  rep["generation_fingerprint"] = settings.generation.fingerprint();
  rep["generated"] = res.prefilter.records.size();
  rep["after_dedup"] = gen.manifest.records.size();
  rep["passing"] = res.final_manifest.records.size();
  rep["filtered"] = res.prefilter.records.size() - res.final_manifest.records.size();
  rep["avg_tests"] = mean_of(tests);
  rep["coverage"] = mean_of(coverage);
  rep["categories"] = categories;
  rep["deferred"] = deferred;
  rep["partial"] = gen.partial;
  nlohmann::ordered_json ops;
  ColonyReport total;
  auto& cols = rep["colonies"] = nlohmann::ordered_json::array();
  for (const auto& c : gen.colonies) {
    total.mutation_ops += c.mutation_ops;
    total.crossover_ops += c.crossover_ops;
    total.generated += c.generated;
    total.unusable += c.unusable;
    total.kfn_dropped += c.kfn_dropped;
    total.dedup_dropped += c.dedup_dropped;
    total.accepted += c.accepted;
    nlohmann::ordered_json cj;
    cj["colony"] = c.colony;
    cj["iterations"] = c.iterations;
    cj["accepted"] = c.accepted;
    cj["exhausted"] = c.exhausted;
    cj["stalled"] = c.stalled;
    cj["resumed"] = c.resumed;
    if (!c.error.empty()) cj["error"] = c.error;
    cols.push_back(std::move(cj));
  }
  ops["mutation"] = total.mutation_ops;
  ops["crossover"] = total.crossover_ops;
  ops["variants"] = total.generated;
  ops["unusable"] = total.unusable;
  ops["kfn_dropped"] = total.kfn_dropped;
  ops["colony_dedup_dropped"] = total.dedup_dropped;
  ops["accepted"] = total.accepted;
  ops["final_dedup_removed"] = gen.removed.size();
  rep["operations"] = ops;
  rep["postprocess"] = {{"rephrased", post.rephrased},
                        {"rephrase_flagged", post.rephrase_flagged},
                        {"topic_flagged", post.topic_flagged},
                        {"gateway_failures", post.gateway_failures}};
  const auto usage = gateway.totals();
  rep["usage"] = {{"calls", usage.calls},
                  {"failures", usage.failures},
                  {"prompt_tokens", usage.prompt_tokens},
                  {"completion_tokens", usage.completion_tokens}};
  return res;
}

void write_pipeline_outputs(const PipelineResult& result, const std::filesystem::path& out,
                            bool include_failed) {
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  save_dataset(result.final_manifest, out);
  save_dataset(result.prefilter, sibling(out, "prefilter.jsonl"));
  save_dataset(result.pre_postprocess, sibling(out, "prepost.jsonl"));
  if (include_failed) save_dataset(result.failed, sibling(out, "failed.jsonl"));
  dedup::write_removal_log(result.removed, sibling(out, "removed.jsonl"));
  std::string outcomes;
  for (const auto& l : result.outcome_log) outcomes += l + "\n";
  write_text(sibling(out, "outcomes.jsonl"), outcomes);
  std::vector<DatasetManifest> one{result.final_manifest};
  write_topic_csv(one, sibling(out, "topics.csv"));
  write_text(sibling(out, "report.json"), result.report.dump(2) + "\n");
}

}  // namespace benchsynth
