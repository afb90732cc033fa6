#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "benchsynth/corpus.hpp"
#include "benchsynth/sandbox.hpp"

namespace benchsynth {

class Gateway;

enum class ParseStatus { kParsed, kUnparsable };

struct SolutionTestPair {
  std::string problem_id;
  int attempt = 1;
  std::string solution;
  std::string tests;
  ParseStatus parse_status = ParseStatus::kUnparsable;
};

// Pulls the bodies out of the Solution and Test tag blocks, dropping code
// fences. Any missing tag or empty body yields kUnparsable.
SolutionTestPair parse_tagged_response(std::string_view text);

// Solution block only, for test-taker answers. Empty when absent.
std::string parse_solution_block(std::string_view text);

// Removes a surrounding ``` fence (with optional language tag) and trims.
std::string strip_code_fences(std::string_view body);

// Number of `assert` keyword tokens, ignoring strings and comments. Returns 0
// and sets *lexed=false for source with an unterminated string.
int count_tests(std::string_view tests_source, bool* lexed = nullptr);

// Passing, failing, erroring or unparsable. A run with no collected tests is
// failing: nothing was verified.
Status categorize(const sandbox::Report& report, ParseStatus parse);

struct VerificationOutcome {
  std::string problem_id;
  Status category = Status::kUnparsable;
  int attempts_used = 0;
  std::vector<sandbox::TestOutcome> per_test;
  double coverage = 0.0;
  int test_count = 0;
  std::string solution;
  std::string tests;
  // Set when the sandbox itself could not run; the category is erroring.
  bool infrastructure = false;
  // compile-error, timeout, crashed, test-error, sandbox-unavailable.
  std::string sub_reason;
};

struct VerifyOptions {
  int max_iterations = 5;
  double timeout_s = 10.0;
  bool collect_coverage = true;
  std::string model_id = "gpt-4o";
  int workers = 8;
  // How often a problem whose gateway call failed is put back in the queue.
  int requeue_limit = 1;
};

// Solution and test generation with full-history feedback. Stops after the
// first all-pass attempt. Gateway failures propagate as GatewayError.
VerificationOutcome feedback_loop(const ProblemRecord& problem, Gateway& gateway,
                                  sandbox::Client& sandbox, const VerifyOptions& options);

struct VerificationBatch {
  std::vector<VerificationOutcome> outcomes;  // same order as input, minus deferred
  std::vector<std::string> deferred;          // ids whose gateway calls kept failing
};

VerificationBatch verify_all(const std::vector<ProblemRecord>& problems, Gateway& gateway,
                             sandbox::Client& sandbox, const VerifyOptions& options);

// Writes the verdict back into the record.
void apply_outcome(ProblemRecord& record, const VerificationOutcome& outcome);

// JSONL line {problem_id, category, attempts, coverage, test_count, ...}.
std::string outcome_log_line(const VerificationOutcome& outcome);

struct EvaluationResult {
  std::string model_id;
  std::string dataset;
  std::size_t pass = 0;
  std::size_t fail = 0;
  std::size_t err = 0;
  std::size_t excluded = 0;  // gateway failures, not in the denominators
  std::size_t evaluated() const { return pass + fail + err; }
  double pass_rate() const;  // percentages
  double fail_rate() const;
  double err_rate() const;
};

// One solution attempt per problem, scored against the stored tests.
// Unparsable answers count as errors. `prompt_template` needs a {problem}
// placeholder; empty selects the built-in test-taker prompt.
EvaluationResult evaluate_testtaker(const std::string& model_id, const DatasetManifest& manifest,
                                    Gateway& gateway, sandbox::Client& sandbox,
                                    const VerifyOptions& options,
                                    std::string_view prompt_template = {});

}  // namespace benchsynth
