#include "benchsynth/postprocess.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "benchsynth/common/parallel.hpp"
#include "benchsynth/gateway.hpp"
#include "benchsynth/prompts.hpp"
#include "benchsynth/verify.hpp"

namespace benchsynth {
namespace {

std::string trimmed(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string_view::npos) return {};
  return std::string(s.substr(a, s.find_last_not_of(" \t\r\n") - a + 1));
}

}  // namespace

RephraseOutcome rephrase_edge_cases(const ProblemRecord& problem, Gateway& gateway,
                                    sandbox::Client& sandbox, const std::string& model_id,
                                    double timeout_s) {
  if (!problem.solution || !problem.tests) {
    throw DataError("rephrasing needs a solution and tests: " + problem.id);
  }
  RephraseOutcome out;
  out.record = problem;
  CompletionRequest req;
  req.prompt = prompts::postprocess(problem.statement, *problem.tests);
  req.model_id = model_id;
  req.tag = Purpose::kPostprocess;
  req.temperature = default_temperature(req.tag);
  req.context = problem.id;
  req.subject = problem.statement;
  auto statement = trimmed(gateway.complete(req));
  if (statement.empty()) {
    out.flagged = true;
    out.reason = "empty completion";
    return out;
  }
  auto report = sandbox.execute(
      {problem.id + "#post", *problem.solution, *problem.tests, timeout_s, true});
  const auto status = categorize(report, ParseStatus::kParsed);
  if (status != Status::kPassing) {
    out.flagged = true;
    out.reason = "re-verification was " + std::string(to_string(status));
    return out;
  }
  ProblemRecord r = problem;
  r.id = problem.id + ".pp";
  r.statement = std::move(statement);
  r.provenance = Provenance::kPostprocessed;
  r.parents = {problem.id};
  r.status = status;
  r.coverage = sandbox::coverage(report);
  out.record = std::move(r);
  out.rephrased = true;
  return out;
}

std::optional<std::vector<std::string>> parse_topics(std::string_view text) {
  const auto a = text.find('{');
  const auto b = text.rfind('}');
  if (a == std::string_view::npos || b == std::string_view::npos || b < a) return std::nullopt;
  auto j = nlohmann::json::parse(text.substr(a, b - a + 1), nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("topics") || !j["topics"].is_array()) {
    return std::nullopt;
  }
  std::vector<std::string> topics;
  for (const auto& t : j["topics"]) {
    if (topics.size() == 3) break;
    if (!t.is_string()) continue;
    auto s = t.get<std::string>();
    if (is_bank_topic(s) && std::find(topics.begin(), topics.end(), s) == topics.end()) {
      topics.push_back(std::move(s));
    }
  }
  return topics;
}

TopicLabels label_topics(const ProblemRecord& problem, Gateway& gateway,
                         const std::string& model_id) {
  if (!problem.solution) throw DataError("topic labeling needs a solution: " + problem.id);
  CompletionRequest req;
  req.prompt = prompts::topic_labeling(problem.statement, *problem.solution);
  req.model_id = model_id;
  req.tag = Purpose::kTopic;
  req.temperature = default_temperature(req.tag);
  req.context = problem.id;
  req.subject = problem.statement;
  TopicLabels out;
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (auto topics = parse_topics(gateway.complete(req))) {
      out.topics = std::move(*topics);
      return out;
    }
  }
  out.flagged = true;
  return out;
}

PostprocessResult postprocess_dataset(const DatasetManifest& manifest, Gateway& gateway,
                                      sandbox::Client& sandbox, const PostprocessOptions& options) {
  PostprocessResult result;
  result.manifest = manifest;
  auto& records = result.manifest.records;
  std::vector<char> rephrased(records.size(), 0), flagged(records.size(), 0),
      topic_flagged(records.size(), 0), gateway_failed(records.size(), 0);
  parallel_for(records.size(), static_cast<std::size_t>(std::max(options.workers, 1)),
               [&](std::size_t i) {
                 auto& rec = records[i];
                 try {
                   if (options.rephrase && rec.status == Status::kPassing) {
                     auto o = rephrase_edge_cases(rec, gateway, sandbox, options.rephrase_model,
                                                  options.timeout_s);
                     rephrased[i] = o.rephrased;
                     flagged[i] = o.flagged;
                     rec = std::move(o.record);
                   }
                   if (options.label && rec.solution) {
                     auto labels = label_topics(rec, gateway, options.topic_model);
                     rec.topics = std::move(labels.topics);
                     topic_flagged[i] = labels.flagged;
                   }
                 } catch (const GatewayError&) {
                   gateway_failed[i] = 1;
                 }
               });
  for (std::size_t i = 0; i < records.size(); ++i) {
    result.rephrased += rephrased[i];
    result.rephrase_flagged += flagged[i];
    result.topic_flagged += topic_flagged[i];
    result.gateway_failures += gateway_failed[i];
  }
  return result;
}

std::vector<TopicShare> topic_histogram(const DatasetManifest& manifest) {
  std::vector<TopicShare> out;
  const double n = static_cast<double>(manifest.records.size());
  for (const auto& topic : topic_bank()) {
    std::size_t count = 0;
    for (const auto& r : manifest.records) {
      count += std::find(r.topics.begin(), r.topics.end(), topic) != r.topics.end();
    }
    out.push_back({topic, n > 0 ? static_cast<double>(count) / n : 0.0});
  }
  return out;
}

void write_topic_csv(std::span<const DatasetManifest> manifests, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(10);
  out << "topic,fraction,dataset\n";
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  for (const auto& m : manifests) {
    for (const auto& share : topic_histogram(m)) {
      out << quote(share.topic) << "," << share.fraction << "," << quote(m.name) << "\n";
    }
  }
}

}  // namespace benchsynth
