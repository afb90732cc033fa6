#include <doctest.h>

#include <fstream>
#include <sstream>

#include "benchsynth/gateway.hpp"
#include "benchsynth/postprocess.hpp"
#include "support/responses.hpp"
#include "support/sampling.hpp"

using namespace benchsynth;

namespace {

ProblemRecord passing(std::string id, std::string extra = {}) {
  ProblemRecord r;
  r.id = std::move(id);
  r.statement = "Add two numbers.";
  r.provenance = Provenance::kMutationEasy;
  r.parents = {"s0"};
  r.status = Status::kPassing;
  r.solution = testsupport::kAddSolution + extra;
  r.tests = testsupport::kAddTests;
  r.test_count = 5;
  return r;
}

}  // namespace

TEST_CASE("topic parsing keeps bank members, in order, at most three") {
  CHECK(*parse_topics(R"({"topics": ["Array", "Sorting"]})") == std::vector<std::string>{"Array", "Sorting"});
  CHECK(*parse_topics("Sure!\n```json\n{\"topics\": [\"Math\"]}\n```") == std::vector<std::string>{"Math"});
  CHECK(*parse_topics(R"({"topics": ["Quantum Sorting", "Array", "Array", "String", "Math", "Sorting"]})") ==
        std::vector<std::string>{"Array", "String", "Math"});
  CHECK_FALSE(parse_topics("Topics: Array, Sorting"));
  CHECK_FALSE(parse_topics(R"({"labels": ["Array"]})"));
}

TEST_CASE("topic labeling retries once on unparsable output") {
  int n = 0;
  Gateway g(std::make_shared<CallbackProvider>([&](const CompletionRequest& r) {
    CHECK(r.temperature == 0.0);
    return ++n == 1 ? std::string("no json") : std::string(R"({"topics": ["Math"]})");
  }));
  auto l = label_topics(passing("p"), g, "gpt-4o-mini");
  CHECK(l.topics == std::vector<std::string>{"Math"});
  CHECK_FALSE(l.flagged);
  Gateway never(std::make_shared<CallbackProvider>([](const CompletionRequest&) { return std::string("nope"); }));
  auto f = label_topics(passing("p"), never, "m");
  CHECK(f.flagged);
  CHECK(f.topics.empty());
  CHECK(never.calls(Purpose::kTopic) == 2);
}

TEST_CASE("rephrasing re-verifies against the stored tests") {
  Gateway g(std::make_shared<CallbackProvider>([](const CompletionRequest& r) {
    return r.subject + " Return 0 for empty input.";
  }));
  sandbox::StubSandbox sb;
  auto ok = rephrase_edge_cases(passing("c0-1"), g, sb, "m");
  CHECK(ok.rephrased);
  CHECK(ok.record.id == "c0-1.pp");
  CHECK(ok.record.provenance == Provenance::kPostprocessed);
  CHECK(ok.record.parents == std::vector<std::string>{"c0-1"});
  CHECK(ok.record.statement == "Add two numbers. Return 0 for empty input.");
  CHECK(ok.record.tests == passing("x").tests);
  CHECK_NOTHROW(validate_record(ok.record));

  auto bad = rephrase_edge_cases(passing("c0-2", std::string(sandbox::kFailMarker)), g, sb, "m");
  CHECK(bad.flagged);
  CHECK(bad.record.id == "c0-2");
  CHECK(bad.record.statement == "Add two numbers.");

  Gateway empty(std::make_shared<CallbackProvider>([](const CompletionRequest&) { return std::string("  "); }));
  auto e = rephrase_edge_cases(passing("c0-3"), empty, sb, "m");
  CHECK(e.flagged);
  CHECK(e.reason == "empty completion");
}

TEST_CASE("postprocess a dataset") {
  DatasetManifest m;
  m.name = "gen";
  m.records = {passing("a"), passing("b", std::string(sandbox::kFailMarker)), passing("c")};
  Gateway g(std::make_shared<CallbackProvider>([](const CompletionRequest& r) -> std::string {
    if (r.tag == Purpose::kPostprocess) return r.subject + " Edge case.";
    if (r.context.starts_with("c")) throw ExternalError("down");
    return R"({"topics": ["Math"]})";
  }), GatewayOptions{8, 0, 0, 0.0, std::nullopt});
  sandbox::StubSandbox sb;
  auto res = postprocess_dataset(m, g, sb, PostprocessOptions{});
  CHECK(res.rephrased == 2);
  CHECK(res.rephrase_flagged == 1);
  CHECK(res.gateway_failures == 1);
  CHECK(res.manifest.records[0].id == "a.pp");
  CHECK(res.manifest.records[0].topics == std::vector<std::string>{"Math"});
  CHECK(res.manifest.records[1].id == "b");
}

TEST_CASE("topic histogram and CSV") {
  DatasetManifest m;
  m.name = "d";
  m.records = {passing("a"), passing("b"), passing("c"), passing("d")};
  m.records[0].topics = {"Array", "Math"};
  m.records[1].topics = {"Array"};
  auto h = topic_histogram(m);
  CHECK(h.size() == topic_bank().size());
  CHECK(h[0].topic == topic_bank()[0]);
  for (const auto& s : h) {
    if (s.topic == "Array") CHECK(s.fraction == 0.5);
    if (s.topic == "Math") CHECK(s.fraction == 0.25);
    if (s.topic == "String") CHECK(s.fraction == 0.0);
  }
  testsupport::TempDir dir("pp");
  std::vector<DatasetManifest> ms{m};
  write_topic_csv(ms, dir / "t.csv");
  std::ifstream in(dir / "t.csv");
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "topic,fraction,dataset");
  CHECK(first == "Array,0.5,d");
}
