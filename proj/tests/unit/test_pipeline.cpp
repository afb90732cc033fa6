#include <doctest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "benchsynth/common/config.hpp"
#include "benchsynth/common/errors.hpp"
#include "benchsynth/pipeline.hpp"
#include "support/sampling.hpp"
#include "support/seeds.hpp"

using namespace benchsynth;

namespace {

const char* kMock = R"(
[evolve]
name = mock
total = 40
colonies = 2
seed_sample = 10
feedback_iterations = 3
seed = 7

[llm]
provider = synthetic
backoff_ms = 0

[sandbox]
kind = stub

[embedding]
provider = hash
dim = 64
)";

struct Run {
  PipelineSettings settings;
  PipelineResult result;
};

Run run(const std::string& text, std::optional<std::filesystem::path> checkpoints = {}) {
  auto cfg = Config::parse(text);
  PipelineServices services;
  Run r;
  r.settings = PipelineSettings::from_config(cfg, services);
  r.settings.checkpoint_dir = checkpoints;
  r.result = run_pipeline(r.settings, testsupport::seed_dataset(12), services);
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("settings come from the config") {
  auto cfg = Config::parse(kMock);
  PipelineServices services;
  auto s = PipelineSettings::from_config(cfg, services);
  CHECK(s.generation.total == 40);
  CHECK(s.generation.colonies == 2);
  CHECK(s.generation.seed_sample == 10);
  CHECK(s.verify.max_iterations == 3);
  CHECK(s.config_fingerprint.size() == 64);
  CHECK(services.llm);
  CHECK(services.sandbox);
  CHECK(services.embedder);
}

TEST_CASE("unknown keys are rejected") {
  PipelineServices services;
  auto cfg = Config::parse(std::string(kMock) + "\n[dedup]\nthreshhold = 0.7\n");
  CHECK_THROWS_AS(PipelineSettings::from_config(cfg, services), ConfigError);
}

TEST_CASE("a mock run produces a consistent report") {
  auto r = run(kMock);
  const auto& res = r.result;
  const auto& rep = res.report;

  CHECK(res.prefilter.records.size() >= 40);
  CHECK(rep["generated"] == res.prefilter.records.size());
  CHECK(rep["passing"] == res.final_manifest.records.size());
  CHECK(rep["filtered"].get<std::size_t>() ==
        res.prefilter.records.size() - res.final_manifest.records.size());
  CHECK(res.final_manifest.records.size() == res.pre_postprocess.records.size());
  CHECK(res.pre_postprocess.records.size() + res.failed.records.size() ==
        rep["after_dedup"].get<std::size_t>());
  CHECK(rep["after_dedup"].get<std::size_t>() + res.removed.size() == res.prefilter.records.size());

  std::size_t category_sum = 0;
  for (const auto& [k, v] : rep["categories"].items()) category_sum += v.get<std::size_t>();
  CHECK(category_sum == res.prefilter.records.size());
  CHECK(rep["categories"]["unverified"] == 0);
  CHECK(rep["categories"]["passing"].get<std::size_t>() >= res.final_manifest.records.size());
  // The synthetic provider fails a share of problems for good.
  CHECK(rep["categories"]["failing"].get<std::size_t>() > 0);

  double tests = 0.0;
  for (const auto& p : res.final_manifest.records) {
    CHECK(p.status == Status::kPassing);
    CHECK(p.tests.has_value());
    CHECK(p.test_count > 0);
    CHECK_FALSE(p.topics.empty());
    tests += p.test_count;
  }
  REQUIRE_FALSE(res.final_manifest.records.empty());
  CHECK(rep["avg_tests"].get<double>() ==
        doctest::Approx(tests / static_cast<double>(res.final_manifest.records.size())));
  CHECK(res.outcome_log.size() == res.prefilter.records.size());
  CHECK(rep["operations"]["accepted"].get<std::size_t>() == res.prefilter.records.size());
}

TEST_CASE("failing problems keep seeding later iterations") {
  auto r = run(kMock);
  std::map<std::string, Status> status;
  for (const auto& p : r.result.prefilter.records) status[p.id] = p.status;
  std::size_t children_of_failures = 0;
  for (const auto& p : r.result.prefilter.records) {
    for (const auto& parent : p.parents) {
      auto it = status.find(parent);
      if (it != status.end() && it->second != Status::kPassing) ++children_of_failures;
    }
  }
  CHECK(children_of_failures > 0);
}

TEST_CASE("runs are reproducible") {
  auto a = run(kMock);
  auto b = run(kMock);
  CHECK(serialize_records(a.result.final_manifest) == serialize_records(b.result.final_manifest));
  CHECK(serialize_records(a.result.prefilter) == serialize_records(b.result.prefilter));
  CHECK(a.result.outcome_log == b.result.outcome_log);
  CHECK(a.result.report.dump() == b.result.report.dump());

  auto c = run(std::string(kMock) + "\n[dedup]\nseed = 0\n");
  CHECK(serialize_records(a.result.final_manifest) == serialize_records(c.result.final_manifest));
  CHECK(a.result.report["config_fingerprint"] != c.result.report["config_fingerprint"]);
}

TEST_CASE("checkpointed runs match uncheckpointed ones") {
  testsupport::TempDir dir("pipeline-ckpt");
  auto a = run(kMock);
  auto b = run(kMock, dir.path());
  CHECK(serialize_records(a.result.final_manifest) == serialize_records(b.result.final_manifest));
  auto c = run(kMock, dir.path());
  CHECK(serialize_records(a.result.final_manifest) == serialize_records(c.result.final_manifest));
}

TEST_CASE("outputs land next to the dataset") {
  testsupport::TempDir dir("pipeline-out");
  auto r = run(kMock);
  const auto out = dir / "mock.jsonl";
  write_pipeline_outputs(r.result, out, true);
  for (const char* suffix : {"prefilter.jsonl", "prepost.jsonl", "failed.jsonl", "removed.jsonl",
                             "outcomes.jsonl", "topics.csv", "report.json"}) {
    CAPTURE(suffix);
    CHECK(std::filesystem::exists(sibling(out, suffix)));
  }
  CHECK(sibling(out, "report.json") == dir / "mock.report.json");
  auto back = load_dataset(out);
  CHECK(back.records == r.result.final_manifest.records);
  CHECK(back.config_fingerprint == r.result.final_manifest.config_fingerprint);
  auto rep = nlohmann::json::parse(slurp(sibling(out, "report.json")));
  CHECK(rep["generated"] == r.result.prefilter.records.size());
  auto failed = load_dataset(sibling(out, "failed.jsonl"));
  for (const auto& p : failed.records) CHECK(p.status != Status::kPassing);
}

TEST_CASE("incomplete services are a config error") {
  PipelineSettings s;
  PipelineServices none;
  CHECK_THROWS_AS(run_pipeline(s, testsupport::seed_dataset(3), none), ConfigError);
}
