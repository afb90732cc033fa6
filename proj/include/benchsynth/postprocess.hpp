#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "benchsynth/corpus.hpp"
#include "benchsynth/sandbox.hpp"

namespace benchsynth {

class Gateway;

struct RephraseOutcome {
  ProblemRecord record;     // the postprocessed record, or the original when flagged
  bool rephrased = false;
  bool flagged = false;     // empty completion or failed re-verification
  std::string reason;
};

// Edge-case rephrasing against the stored tests. The new record has
// provenance postprocessed, the original as its only parent, and the same
// solution and tests, which are re-run in the sandbox before it is accepted.
RephraseOutcome rephrase_edge_cases(const ProblemRecord& problem, Gateway& gateway,
                                    sandbox::Client& sandbox, const std::string& model_id,
                                    double timeout_s = 10.0);

struct TopicLabels {
  std::vector<std::string> topics;
  bool flagged = false;  // no parsable JSON after one retry
};

// Extracts {"topics": [...]} from a completion, keeps bank members in order
// and truncates to three. nullopt when no JSON object can be parsed.
std::optional<std::vector<std::string>> parse_topics(std::string_view text);

TopicLabels label_topics(const ProblemRecord& problem, Gateway& gateway,
                         const std::string& model_id);

struct PostprocessOptions {
  bool rephrase = true;
  bool label = true;
  std::string rephrase_model = "gpt-4o";
  std::string topic_model = "gpt-4o-mini";
  double timeout_s = 10.0;
  int workers = 8;
};

struct PostprocessResult {
  DatasetManifest manifest;
  std::size_t rephrased = 0;
  std::size_t rephrase_flagged = 0;
  std::size_t topic_flagged = 0;
  std::size_t gateway_failures = 0;
};

PostprocessResult postprocess_dataset(const DatasetManifest& manifest, Gateway& gateway,
                                      sandbox::Client& sandbox, const PostprocessOptions& options);

struct TopicShare {
  std::string topic;
  double fraction = 0.0;  // records carrying the topic / dataset size
};

// One entry per bank topic, in bank order.
std::vector<TopicShare> topic_histogram(const DatasetManifest& manifest);

// CSV with header topic,fraction,dataset.
void write_topic_csv(std::span<const DatasetManifest> manifests, const std::filesystem::path& path);

}  // namespace benchsynth
