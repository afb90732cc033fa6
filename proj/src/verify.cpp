#include "benchsynth/verify.hpp"

#include <cctype>
#include <iostream>
#include <map>

#include <json.hpp>

#include "benchsynth/common/parallel.hpp"
#include "benchsynth/gateway.hpp"
#include "benchsynth/prompts.hpp"

namespace benchsynth {
namespace {

constexpr std::string_view kSolutionBegin = "<|Solution Begin|>";
constexpr std::string_view kSolutionEnd = "<|Solution End|>";
constexpr std::string_view kTestBegin = "<|Test Begin|>";
constexpr std::string_view kTestEnd = "<|Test End|>";

constexpr std::string_view kUnparsableOutput =
    "The response could not be parsed: it must contain non-empty code between the "
    "<|Solution Begin|>/<|Solution End|> and <|Test Begin|>/<|Test End|> tags.";

std::string_view trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// Body between `open` and `close`, searching from `from`; npos on failure.
std::string_view between(std::string_view text, std::string_view open, std::string_view close,
                         std::size_t& from) {
  const auto a = text.find(open, from);
  if (a == std::string_view::npos) {
    from = std::string_view::npos;
    return {};
  }
  const auto body = a + open.size();
  const auto b = text.find(close, body);
  if (b == std::string_view::npos) {
    from = std::string_view::npos;
    return {};
  }
  from = b + close.size();
  return text.substr(body, b - body);
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool is_string_prefix(std::string_view p) {
  if (p.size() > 2) return false;
  for (char c : p) {
    switch (std::tolower(static_cast<unsigned char>(c))) {
      case 'r':
      case 'b':
      case 'u':
      case 'f':
        break;
      default:
        return false;
    }
  }
  return true;
}

std::string sub_reason_for(const sandbox::Report& r) {
  switch (r.status) {
    case sandbox::RunStatus::kCompileError:
      return "compile-error";
    case sandbox::RunStatus::kTimeout:
      return "timeout";
    case sandbox::RunStatus::kCrashed:
      return "crashed";
    case sandbox::RunStatus::kOk:
      break;
  }
  for (const auto& t : r.per_test) {
    if (t.result == sandbox::TestResult::kError) return "test-error";
  }
  return {};
}

}  // namespace

std::string strip_code_fences(std::string_view body) {
  body = trim(body);
  if (body.starts_with("```")) {
    const auto nl = body.find('\n');
    body = nl == std::string_view::npos ? std::string_view{} : body.substr(nl + 1);
    const auto close = body.rfind("```");
    if (close != std::string_view::npos) body = body.substr(0, close);
  }
  body = trim(body);
  if (body.empty()) return {};
  return std::string(body) + "\n";
}

SolutionTestPair parse_tagged_response(std::string_view text) {
  SolutionTestPair pair;
  std::size_t pos = 0;
  auto sol = between(text, kSolutionBegin, kSolutionEnd, pos);
  if (pos == std::string_view::npos) return pair;
  auto tests = between(text, kTestBegin, kTestEnd, pos);
  if (pos == std::string_view::npos) return pair;
  pair.solution = strip_code_fences(sol);
  pair.tests = strip_code_fences(tests);
  if (!pair.solution.empty() && !pair.tests.empty()) pair.parse_status = ParseStatus::kParsed;
  return pair;
}

std::string parse_solution_block(std::string_view text) {
  std::size_t pos = 0;
  auto sol = between(text, kSolutionBegin, kSolutionEnd, pos);
  if (pos == std::string_view::npos) return {};
  return strip_code_fences(sol);
}

int count_tests(std::string_view src, bool* lexed) {
  int count = 0;
  std::size_t i = 0;
  const std::size_t n = src.size();
  auto fail = [&] {
    if (lexed) *lexed = false;
    std::clog << "warning: unterminated string in test source; counting 0 tests\n";
    return 0;
  };
  while (i < n) {
    const char c = src[i];
    if (c == '#') {
      while (i < n && src[i] != '\n') ++i;
      continue;
    }
    std::size_t quote_at = std::string_view::npos;
    if (c == '\'' || c == '"') {
      quote_at = i;
    } else if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < n && is_ident(src[j])) ++j;
      const auto word = src.substr(i, j - i);
      if (j < n && (src[j] == '\'' || src[j] == '"') && is_string_prefix(word)) {
        quote_at = j;
      } else {
        if (word == "assert") ++count;
        i = j;
        continue;
      }
    } else {
      ++i;
      continue;
    }
    const char q = src[quote_at];
    const bool triple = quote_at + 2 < n && src[quote_at + 1] == q && src[quote_at + 2] == q;
    i = quote_at + (triple ? 3 : 1);
    bool closed = false;
    while (i < n) {
      if (src[i] == '\\') {
        i += 2;
        continue;
      }
      if (triple) {
        if (src[i] == q && i + 2 < n && src[i + 1] == q && src[i + 2] == q) {
          i += 3;
          closed = true;
          break;
        }
      } else {
        if (src[i] == '\n') break;
        if (src[i] == q) {
          ++i;
          closed = true;
          break;
        }
      }
      ++i;
    }
    if (!closed) return fail();
  }
  if (lexed) *lexed = true;
  return count;
}

Status categorize(const sandbox::Report& report, ParseStatus parse) {
  if (parse == ParseStatus::kUnparsable) return Status::kUnparsable;
  if (report.status != sandbox::RunStatus::kOk) return Status::kErroring;
  bool any_fail = false;
  for (const auto& t : report.per_test) {
    if (t.result == sandbox::TestResult::kError) return Status::kErroring;
    any_fail = any_fail || t.result == sandbox::TestResult::kFail;
  }
  if (any_fail || report.per_test.empty()) return Status::kFailing;
  return Status::kPassing;
}

VerificationOutcome feedback_loop(const ProblemRecord& problem, Gateway& gateway,
                                  sandbox::Client& sandbox, const VerifyOptions& options) {
  if (options.max_iterations < 1) throw ConfigError("verify.max_iterations must be >= 1");
  VerificationOutcome out;
  out.problem_id = problem.id;
  std::vector<prompts::Attempt> history;
  for (int attempt = 1; attempt <= options.max_iterations; ++attempt) {
    CompletionRequest req;
    req.tag = attempt == 1 ? Purpose::kSolution : Purpose::kFeedback;
    req.prompt = attempt == 1 ? prompts::solution(problem.statement)
                              : prompts::solution_feedback(problem.statement, history);
    req.model_id = options.model_id;
    req.temperature = default_temperature(req.tag);
    req.context = problem.id;
    req.subject = problem.statement;
    std::string text = gateway.complete(req);
    out.attempts_used = attempt;

    auto pair = parse_tagged_response(text);
    if (pair.parse_status == ParseStatus::kUnparsable) {
      out.category = Status::kUnparsable;
      out.per_test.clear();
      out.coverage = 0.0;
      out.test_count = 0;
      out.solution.clear();
      out.tests.clear();
      out.sub_reason.clear();
      history.push_back({std::move(text), std::string(kUnparsableOutput)});
      continue;
    }

    sandbox::Request run{problem.id + "#" + std::to_string(attempt), pair.solution, pair.tests,
                         options.timeout_s, options.collect_coverage};
    sandbox::Report report;
    try {
      report = sandbox.execute(run);
    } catch (const sandbox::SandboxUnavailable& e) {
      out.category = Status::kErroring;
      out.infrastructure = true;
      out.sub_reason = "sandbox-unavailable";
      out.solution = pair.solution;
      out.tests = pair.tests;
      out.test_count = count_tests(pair.tests);
      return out;
    }
    out.category = categorize(report, pair.parse_status);
    out.per_test = report.per_test;
    out.coverage = sandbox::coverage(report);
    out.test_count = count_tests(pair.tests);
    out.solution = std::move(pair.solution);
    out.tests = std::move(pair.tests);
    out.sub_reason = sub_reason_for(report);
    if (out.category == Status::kPassing) break;
    history.push_back({std::move(text), sandbox::render_output(report)});
  }
  return out;
}

VerificationBatch verify_all(const std::vector<ProblemRecord>& problems, Gateway& gateway,
                             sandbox::Client& sandbox, const VerifyOptions& options) {
  std::vector<std::optional<VerificationOutcome>> results(problems.size());
  std::vector<std::size_t> queue(problems.size());
  for (std::size_t i = 0; i < queue.size(); ++i) queue[i] = i;
  for (int round = 0; round <= options.requeue_limit && !queue.empty(); ++round) {
    std::vector<char> failed(queue.size(), 0);
    parallel_for(queue.size(), static_cast<std::size_t>(std::max(options.workers, 1)),
                 [&](std::size_t q) {
                   const auto idx = queue[q];
                   try {
                     results[idx] = feedback_loop(problems[idx], gateway, sandbox, options);
                   } catch (const GatewayError&) {
                     failed[q] = 1;
                   }
                 });
    std::vector<std::size_t> next;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      if (failed[q]) next.push_back(queue[q]);
    }
    queue = std::move(next);
  }
  VerificationBatch batch;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    if (results[i]) {
      batch.outcomes.push_back(std::move(*results[i]));
    } else {
      batch.deferred.push_back(problems[i].id);
    }
  }
  return batch;
}

void apply_outcome(ProblemRecord& record, const VerificationOutcome& outcome) {
  record.status = outcome.category;
  if (!outcome.solution.empty()) record.solution = outcome.solution;
  if (!outcome.tests.empty()) record.tests = outcome.tests;
  record.test_count = outcome.test_count;
  if (outcome.category == Status::kUnparsable) {
    record.coverage.reset();
  } else {
    record.coverage = outcome.coverage;
  }
}

std::string outcome_log_line(const VerificationOutcome& o) {
  nlohmann::ordered_json j;
  j["problem_id"] = o.problem_id;
  j["category"] = to_string(o.category);
  j["attempts"] = o.attempts_used;
  j["coverage"] = o.coverage;
  j["test_count"] = o.test_count;
  if (!o.sub_reason.empty()) j["sub_reason"] = o.sub_reason;
  if (o.infrastructure) j["infrastructure"] = true;
  return j.dump();
}

double EvaluationResult::pass_rate() const {
  return evaluated() ? 100.0 * static_cast<double>(pass) / evaluated() : 0.0;
}
double EvaluationResult::fail_rate() const {
  return evaluated() ? 100.0 * static_cast<double>(fail) / evaluated() : 0.0;
}
double EvaluationResult::err_rate() const {
  return evaluated() ? 100.0 * static_cast<double>(err) / evaluated() : 0.0;
}

EvaluationResult evaluate_testtaker(const std::string& model_id, const DatasetManifest& manifest,
                                    Gateway& gateway, sandbox::Client& sandbox,
                                    const VerifyOptions& options, std::string_view prompt_template) {
  for (const auto& r : manifest.records) {
    if (r.status != Status::kPassing || !r.tests) {
      throw DataError("evaluation needs a fully passing dataset; " + r.id + " is " +
                      std::string(to_string(r.status)));
    }
  }
  enum class Verdict { kPass, kFail, kErr, kExcluded };
  std::vector<Verdict> verdicts(manifest.records.size(), Verdict::kExcluded);
  parallel_for(manifest.records.size(), static_cast<std::size_t>(std::max(options.workers, 1)),
               [&](std::size_t i) {
                 const auto& rec = manifest.records[i];
                 CompletionRequest req;
                 req.tag = Purpose::kEvaluate;
                 req.prompt = prompt_template.empty()
                                  ? prompts::testtaker(rec.statement)
                                  : prompts::render(prompt_template, {{"problem", rec.statement}});
                 req.model_id = model_id;
                 req.temperature = default_temperature(req.tag);
                 req.context = rec.id;
                 req.subject = rec.statement;
                 std::string text;
                 try {
                   text = gateway.complete(req);
                 } catch (const GatewayError&) {
                   return;
                 }
                 auto solution = parse_solution_block(text);
                 if (solution.empty()) {
                   verdicts[i] = Verdict::kErr;
                   return;
                 }
                 auto report = sandbox.execute({rec.id + "#eval", solution, *rec.tests,
                                                options.timeout_s, false});
                 switch (categorize(report, ParseStatus::kParsed)) {
                   case Status::kPassing:
                     verdicts[i] = Verdict::kPass;
                     break;
                   case Status::kFailing:
                     verdicts[i] = Verdict::kFail;
                     break;
                   default:
                     verdicts[i] = Verdict::kErr;
                 }
               });
  EvaluationResult res;
  res.model_id = model_id;
  res.dataset = manifest.name;
  for (auto v : verdicts) {
    switch (v) {
      case Verdict::kPass:
        ++res.pass;
        break;
      case Verdict::kFail:
        ++res.fail;
        break;
      case Verdict::kErr:
        ++res.err;
        break;
      case Verdict::kExcluded:
        ++res.excluded;
        break;
    }
  }
  return res;
}

}  // namespace benchsynth
