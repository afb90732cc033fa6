#include <doctest.h>

#include <atomic>
#include <mutex>

#include <json.hpp>

#include "benchsynth/gateway.hpp"
#include "benchsynth/verify.hpp"
#include "support/responses.hpp"

using namespace benchsynth;
using testsupport::tagged;

namespace {

ProblemRecord problem(std::string id, std::string statement = "Add two numbers.") {
  ProblemRecord r;
  r.id = std::move(id);
  r.statement = std::move(statement);
  r.provenance = Provenance::kSeed;
  return r;
}

std::shared_ptr<ScriptedProvider> script(const std::string& json) {
  return ScriptedProvider::parse(json);
}

std::string rules_json(std::initializer_list<std::pair<std::string, std::string>> tag_response) {
  nlohmann::json j;
  j["on_unmatched"] = "error";
  j["rules"] = nlohmann::json::array();
  std::map<std::string, int> ordinals;
  for (const auto& [tag, response] : tag_response) {
    j["rules"].push_back({{"tag", tag}, {"ordinal", ++ordinals[tag]}, {"response", response}});
  }
  return j.dump();
}

class CountingSandbox : public sandbox::Client {
 public:
  sandbox::Report execute(const sandbox::Request& r) override {
    ++runs;
    return stub.execute(r);
  }
  sandbox::StubSandbox stub;
  std::atomic<int> runs{0};
};

}  // namespace

TEST_CASE("counting asserts in the example output") {
  bool lexed = false;
  CHECK(count_tests(testsupport::kAddTests, &lexed) == 5);
  CHECK(lexed);
  CHECK(sandbox::test_functions(testsupport::kAddTests).size() == 4);
}

TEST_CASE("asserts inside strings and comments are not counted") {
  const std::string src =
      "def test_a():\n"
      "    # assert nothing here\n"
      "    msg = 'assert x'\n"
      "    doc = \"\"\"\n    assert inside triple\n    \"\"\"\n"
      "    raw = rb'assert \\' still string'\n"
      "    assert_equal = 3\n"
      "    assert msg != doc\n"
      "    assert(raw)\n";
  CHECK(count_tests(src) == 2);
  bool lexed = true;
  CHECK(count_tests("def test_a():\n    s = 'open\n    assert s\n", &lexed) == 0);
  CHECK_FALSE(lexed);
  lexed = true;
  CHECK(count_tests("def test_a():\n    s = '''never closed\n    assert s\n", &lexed) == 0);
  CHECK_FALSE(lexed);
}

TEST_CASE("tagged response parsing") {
  auto p = parse_tagged_response(tagged());
  CHECK(p.parse_status == ParseStatus::kParsed);
  CHECK(p.solution == testsupport::kAddSolution);
  CHECK(p.tests == testsupport::kAddTests);
  CHECK(parse_tagged_response("<|Solution Begin|>x<|Solution End|>").parse_status == ParseStatus::kUnparsable);
  CHECK(parse_tagged_response("<|Solution Begin|>\n```\n```\n<|Solution End|><|Test Begin|>t<|Test End|>").parse_status ==
        ParseStatus::kUnparsable);
  CHECK(parse_tagged_response("<|Test Begin|>t<|Test End|><|Solution Begin|>s<|Solution End|>").parse_status ==
        ParseStatus::kUnparsable);
  CHECK(parse_solution_block("<|Solution Begin|>\ndef solution(): pass\n<|Solution End|>") == "def solution(): pass\n");
  CHECK(strip_code_fences("```py\nx = 1\n```") == "x = 1\n");
}

TEST_CASE("categories") {
  sandbox::Report r;
  CHECK(categorize(r, ParseStatus::kParsed) == Status::kFailing);
  r.per_test = {{"t", sandbox::TestResult::kPass, ""}};
  CHECK(categorize(r, ParseStatus::kParsed) == Status::kPassing);
  CHECK(categorize(r, ParseStatus::kUnparsable) == Status::kUnparsable);
  r.per_test.push_back({"u", sandbox::TestResult::kFail, ""});
  CHECK(categorize(r, ParseStatus::kParsed) == Status::kFailing);
  r.per_test.push_back({"v", sandbox::TestResult::kError, ""});
  CHECK(categorize(r, ParseStatus::kParsed) == Status::kErroring);
  r.per_test.resize(1);
  r.status = sandbox::RunStatus::kTimeout;
  CHECK(categorize(r, ParseStatus::kParsed) == Status::kErroring);
}

TEST_CASE("fail then fix takes two calls") {
  Gateway g(script(rules_json({{"solution", tagged(std::string(sandbox::kFailMarker))},
                               {"feedback", tagged()}})));
  CountingSandbox sb;
  VerifyOptions o;
  auto out = feedback_loop(problem("p1"), g, sb, o);
  CHECK(out.category == Status::kPassing);
  CHECK(out.attempts_used == 2);
  CHECK(g.totals().calls == 2);
  CHECK(g.calls(Purpose::kSolution) == 1);
  CHECK(g.calls(Purpose::kFeedback) == 1);
  CHECK(out.test_count == 5);
  CHECK(out.coverage == 1.0);
}

TEST_CASE("all-pass first attempt takes one call") {
  Gateway g(script(rules_json({{"solution", tagged()}})));
  CountingSandbox sb;
  auto out = feedback_loop(problem("p1"), g, sb, VerifyOptions{});
  CHECK(out.category == Status::kPassing);
  CHECK(out.attempts_used == 1);
  CHECK(g.totals().calls == 1);
  CHECK(sb.runs == 1);
}

TEST_CASE("feedback prompt carries every previous attempt") {
  std::vector<std::string> prompts;
  std::mutex mu;
  int n = 0;
  Gateway g(std::make_shared<CallbackProvider>([&](const CompletionRequest& r) {
    std::lock_guard lock(mu);
    prompts.push_back(r.prompt);
    ++n;
    if (n == 1) return std::string("no tags at all");
    return tagged(std::string(sandbox::kFailMarker));
  }));
  sandbox::StubSandbox sb;
  VerifyOptions o;
  o.max_iterations = 3;
  auto out = feedback_loop(problem("p1"), g, sb, o);
  CHECK(out.category == Status::kFailing);
  CHECK(out.attempts_used == 3);
  REQUIRE(prompts.size() == 3);
  CHECK(prompts[2].find("Attempt 1 Solution:\nno tags at all\n") != std::string::npos);
  CHECK(prompts[2].find("Attempt 1 Code Execution Output:\nThe response could not be parsed") != std::string::npos);
  CHECK(prompts[2].find("Attempt 2 Code Execution Output:\ntest_add_positive_numbers: fail") != std::string::npos);
  CHECK(prompts[2].find("Attempt 3") == std::string::npos);
}

TEST_CASE("unparsable after every attempt") {
  Gateway g(std::make_shared<CallbackProvider>([](const CompletionRequest&) { return std::string("nothing"); }));
  sandbox::StubSandbox sb;
  VerifyOptions o;
  o.max_iterations = 2;
  auto out = feedback_loop(problem("p"), g, sb, o);
  CHECK(out.category == Status::kUnparsable);
  CHECK(out.attempts_used == 2);
}

TEST_CASE("sandbox outage is an infrastructure error") {
  struct Down : sandbox::Client {
    sandbox::Report execute(const sandbox::Request&) override { throw sandbox::SandboxUnavailable("down"); }
  } down;
  Gateway g(script(rules_json({{"solution", tagged()}})));
  auto out = feedback_loop(problem("p"), g, down, VerifyOptions{});
  CHECK(out.category == Status::kErroring);
  CHECK(out.infrastructure);
  CHECK(out.sub_reason == "sandbox-unavailable");
  CHECK(outcome_log_line(out).find("\"infrastructure\":true") != std::string::npos);
}

TEST_CASE("verify_all re-queues gateway failures once") {
  std::atomic<int> calls_b{0};
  Gateway g(std::make_shared<CallbackProvider>([&](const CompletionRequest& r) -> std::string {
    if (r.context == "b" && ++calls_b == 1) throw ExternalError("boom");
    if (r.context == "c") throw ExternalError("always");
    return tagged();
  }), GatewayOptions{4, 0, 0, 0.0, std::nullopt});
  sandbox::StubSandbox sb;
  VerifyOptions o;
  o.workers = 3;
  auto batch = verify_all({problem("a"), problem("b"), problem("c")}, g, sb, o);
  REQUIRE(batch.outcomes.size() == 2);
  CHECK(batch.outcomes[0].problem_id == "a");
  CHECK(batch.outcomes[1].problem_id == "b");
  CHECK(batch.deferred == std::vector<std::string>{"c"});
}

TEST_CASE("apply_outcome writes the verdict back") {
  auto rec = problem("p");
  VerificationOutcome o;
  o.category = Status::kPassing;
  o.solution = "s\n";
  o.tests = "t\n";
  o.test_count = 3;
  o.coverage = 0.5;
  apply_outcome(rec, o);
  CHECK(rec.status == Status::kPassing);
  CHECK(*rec.tests == "t\n");
  CHECK(rec.test_count == 3);
  CHECK(*rec.coverage == 0.5);
}

TEST_CASE("test-taker evaluation") {
  DatasetManifest m;
  m.name = "ds";
  for (int i = 0; i < 4; ++i) {
    auto r = problem("p" + std::to_string(i));
    r.status = Status::kPassing;
    r.solution = testsupport::kAddSolution;
    r.tests = testsupport::kAddTests;
    m.records.push_back(r);
  }
  Gateway g(std::make_shared<CallbackProvider>([](const CompletionRequest& r) -> std::string {
    if (r.context == "p0") return "<|Solution Begin|>\ndef add(a, b): return a + b\n<|Solution End|>";
    if (r.context == "p1") return "<|Solution Begin|>\ndef add(a, b): return a\n# stub: fail\n<|Solution End|>";
    if (r.context == "p2") return "I do not know.";
    throw ExternalError("quota");
  }), GatewayOptions{4, 0, 0, 0.0, std::nullopt});
  sandbox::StubSandbox sb;
  auto res = evaluate_testtaker("model-x", m, g, sb, VerifyOptions{});
  CHECK(res.pass == 1);
  CHECK(res.fail == 1);
  CHECK(res.err == 1);
  CHECK(res.excluded == 1);
  CHECK(res.pass_rate() == doctest::Approx(100.0 / 3));
  CHECK(res.pass_rate() + res.fail_rate() + res.err_rate() == doctest::Approx(100.0));
  m.records[0].status = Status::kFailing;
  CHECK_THROWS_AS(evaluate_testtaker("model-x", m, g, sb, VerifyOptions{}), DataError);
}
