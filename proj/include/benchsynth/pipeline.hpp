#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "benchsynth/corpus.hpp"
#include "benchsynth/dedup.hpp"
#include "benchsynth/evolve.hpp"
#include "benchsynth/gateway.hpp"
#include "benchsynth/postprocess.hpp"
#include "benchsynth/verify.hpp"

namespace benchsynth {

class Config;
// Everything `generate` needs, with services either built from the config
// or injected (tests swap in scripted providers and sandbox doubles).
struct PipelineServices {
  std::shared_ptr<CompletionProvider> llm;
  std::shared_ptr<sandbox::Client> sandbox;
  std::shared_ptr<EmbeddingProvider> embedder;
};

struct PipelineSettings {
  GenerationConfig generation;
  VerifyOptions verify;
  dedup::DedupConfig dedup;
  PostprocessOptions postprocess;
  std::size_t colony_workers = 0;
  EmbedOptions embed_options;
  GatewayOptions gateway;
  std::optional<std::filesystem::path> checkpoint_dir;
  std::string config_fingerprint;  // sha256 of the canonical config text

  // Reads [evolve], [verify], [dedup], [postprocess] and the service sections,
  // filling `services` for any slot left empty. Rejects unknown keys.
  static PipelineSettings from_config(const Config& config, PipelineServices& services,
                                      std::unique_ptr<EmbeddingCache>* cache_holder = nullptr);
};

struct PipelineResult {
  DatasetManifest final_manifest;   // passing problems after postprocessing
  DatasetManifest pre_postprocess;  // passing problems before postprocessing
  DatasetManifest prefilter;        // every generated problem with its verdict
  DatasetManifest failed;           // non-passing problems that survived dedup
  std::vector<dedup::RemovedPair> removed;
  std::vector<std::string> outcome_log;  // sorted by problem id
  nlohmann::ordered_json report;
};

PipelineResult run_pipeline(const PipelineSettings& settings, const DatasetManifest& seeds,
                            const PipelineServices& services);

// <out>, <out>.meta.json, <stem>.prefilter.jsonl, <stem>.prepost.jsonl,
// <stem>.report.json, <stem>.removed.jsonl, <stem>.outcomes.jsonl,
// <stem>.topics.csv and, with include_failed, <stem>.failed.jsonl.
void write_pipeline_outputs(const PipelineResult& result, const std::filesystem::path& out,
                            bool include_failed);

// Sibling path: out.jsonl + "report.json" -> out.report.json.
std::filesystem::path sibling(const std::filesystem::path& out, const std::string& suffix);

}  // namespace benchsynth
