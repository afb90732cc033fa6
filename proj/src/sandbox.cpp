#include "benchsynth/sandbox.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "benchsynth/common/config.hpp"

namespace benchsynth::sandbox {
namespace {

constexpr std::pair<RunStatus, std::string_view> kStatusNames[] = {
    {RunStatus::kOk, "ok"},
    {RunStatus::kCompileError, "compile-error"},
    {RunStatus::kTimeout, "timeout"},
    {RunStatus::kCrashed, "crashed"},
};

constexpr std::pair<TestResult, std::string_view> kResultNames[] = {
    {TestResult::kPass, "pass"},
    {TestResult::kFail, "fail"},
    {TestResult::kError, "error"},
};

bool contains(std::string_view hay, std::string_view needle) {
  return hay.find(needle) != std::string_view::npos;
}

}  // namespace

std::string_view to_string(RunStatus s) {
  for (auto [k, v] : kStatusNames) {
    if (k == s) return v;
  }
  return "crashed";
}

std::string_view to_string(TestResult r) {
  for (auto [k, v] : kResultNames) {
    if (k == r) return v;
  }
  return "error";
}

RunStatus parse_run_status(std::string_view s) {
  for (auto [k, v] : kStatusNames) {
    if (v == s) return k;
  }
  throw DataError("unknown sandbox status: " + std::string(s));
}

TestResult parse_test_result(std::string_view s) {
  for (auto [k, v] : kResultNames) {
    if (v == s) return k;
  }
  throw DataError("unknown test result: " + std::string(s));
}

double coverage(const Report& r) {
  if (r.executable_lines <= 0) return 0.0;
  return std::clamp(static_cast<double>(r.executed_lines) / r.executable_lines, 0.0, 1.0);
}

nlohmann::ordered_json to_json(const Request& r) {
  nlohmann::ordered_json j;
  j["request_id"] = r.request_id;
  j["solution_source"] = r.solution_source;
  j["tests_source"] = r.tests_source;
  j["timeout_s"] = r.timeout_s;
  j["collect_coverage"] = r.collect_coverage;
  return j;
}

nlohmann::ordered_json to_json(const Report& r) {
  nlohmann::ordered_json j;
  j["request_id"] = r.request_id;
  j["status"] = to_string(r.status);
  auto& tests = j["per_test"] = nlohmann::ordered_json::array();
  for (const auto& t : r.per_test) {
    tests.push_back({{"test_name", t.test_name},
                     {"result", to_string(t.result)},
                     {"message", t.message}});
  }
  j["executed_lines"] = r.executed_lines;
  j["executable_lines"] = r.executable_lines;
  j["wall_ms"] = r.wall_ms;
  if (!r.message.empty()) j["message"] = r.message;
  return j;
}

Request request_from_json(const nlohmann::json& j) {
  Request r;
  try {
    r.request_id = j.at("request_id").get<std::string>();
    r.solution_source = j.at("solution_source").get<std::string>();
    r.tests_source = j.at("tests_source").get<std::string>();
    r.timeout_s = j.value("timeout_s", 10.0);
    r.collect_coverage = j.value("collect_coverage", true);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed sandbox request: ") + e.what());
  }
  if (r.timeout_s <= 0) throw DataError("sandbox timeout must be positive");
  return r;
}

Report report_from_json(const nlohmann::json& j) {
  Report r;
  try {
    r.request_id = j.at("request_id").get<std::string>();
    r.status = parse_run_status(j.at("status").get<std::string>());
    for (const auto& t : j.value("per_test", nlohmann::json::array())) {
      r.per_test.push_back({t.at("test_name").get<std::string>(),
                            parse_test_result(t.at("result").get<std::string>()),
                            t.value("message", std::string())});
    }
    r.executed_lines = j.value("executed_lines", 0);
    r.executable_lines = j.value("executable_lines", 0);
    r.wall_ms = j.value("wall_ms", 0L);
    r.message = j.value("message", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed sandbox report: ") + e.what());
  }
  if (r.executed_lines > r.executable_lines) {
    throw DataError("sandbox report has more executed than executable lines");
  }
  return r;
}

std::string render_output(const Report& r) {
  std::ostringstream out;
  switch (r.status) {
    case RunStatus::kCompileError:
      out << "Error while importing the solution or tests:\n" << r.message << "\n";
      return out.str();
    case RunStatus::kTimeout:
      out << "Execution timed out.\n";
      break;
    case RunStatus::kCrashed:
      out << "Execution crashed: " << r.message << "\n";
      break;
    case RunStatus::kOk:
      break;
  }
  int pass = 0, fail = 0, err = 0;
  for (const auto& t : r.per_test) {
    out << t.test_name << ": " << to_string(t.result);
    if (!t.message.empty()) out << "\n  " << t.message;
    out << "\n";
    pass += t.result == TestResult::kPass;
    fail += t.result == TestResult::kFail;
    err += t.result == TestResult::kError;
  }
  out << pass << " passed, " << fail << " failed, " << err << " errors";
  return out.str();
}

std::vector<std::string> test_functions(std::string_view src) {
  std::vector<std::string> names;
  std::size_t pos = 0;
  while (pos < src.size()) {
    auto eol = src.find('\n', pos);
    if (eol == std::string_view::npos) eol = src.size();
    auto line = src.substr(pos, eol - pos);
    if (line.starts_with("def test_")) {
      auto rest = line.substr(4);
      auto end = rest.find_first_of("( :");
      names.emplace_back(rest.substr(0, end));
    }
    pos = eol + 1;
  }
  return names;
}

int executable_lines(std::string_view src) {
  int n = 0;
  std::size_t pos = 0;
  while (pos < src.size()) {
    auto eol = src.find('\n', pos);
    if (eol == std::string_view::npos) eol = src.size();
    auto line = src.substr(pos, eol - pos);
    auto first = line.find_first_not_of(" \t\r");
    if (first != std::string_view::npos && line[first] != '#') ++n;
    pos = eol + 1;
  }
  return n;
}

Report StubSandbox::execute(const Request& request) {
  Report r;
  r.request_id = request.request_id;
  const auto& sol = request.solution_source;
  r.executable_lines = executable_lines(sol);
  if (contains(sol, kCompileErrorMarker)) {
    r.status = RunStatus::kCompileError;
    r.message = "SyntaxError: invalid syntax";
    return r;
  }
  if (contains(sol, kTimeoutMarker)) {
    r.status = RunStatus::kTimeout;
    r.wall_ms = static_cast<long>(request.timeout_s * 1000);
    return r;
  }
  const bool fail = contains(sol, kFailMarker);
  const bool error = contains(sol, kErrorMarker);
  bool any_pass = false;
  for (const auto& name : test_functions(request.tests_source)) {
    TestOutcome t{name, TestResult::kPass, {}};
    if (r.per_test.empty() && error) {
      t.result = TestResult::kError;
      t.message = "TypeError: unsupported operand type(s)";
    } else if (r.per_test.empty() && fail) {
      t.result = TestResult::kFail;
      t.message = "AssertionError";
    }
    any_pass = any_pass || t.result == TestResult::kPass;
    r.per_test.push_back(std::move(t));
  }
  if (request.collect_coverage && any_pass) r.executed_lines = r.executable_lines;
  return r;
}

ProcessSandbox::ProcessSandbox(std::vector<std::string> command, std::size_t workers,
                               double grace_s)
    : command_(std::move(command)), grace_s_(grace_s) {
  if (command_.empty()) throw ConfigError("sandbox command is empty");
  for (std::size_t i = 0; i < std::max<std::size_t>(workers, 1); ++i) {
    runners_.push_back(std::make_unique<Runner>());
  }
}

ProcessSandbox::~ProcessSandbox() {
  for (auto& r : runners_) {
    if (r->process) {
      r->process->close_stdin();
      r->process->wait();
    }
  }
}

Report ProcessSandbox::exchange(Runner& runner, const Request& request) {
  const std::string line = to_json(request).dump() + "\n";
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (!runner.process) {
      try {
        runner.process.emplace(Subprocess::spawn(command_));
      } catch (const Error& e) {
        throw SandboxUnavailable(std::string("cannot start sandbox runner: ") + e.what());
      }
    }
    auto& proc = *runner.process;
    std::optional<std::string> reply;
    if (proc.write(line)) {
      const auto budget = std::chrono::milliseconds(
          static_cast<long>((request.timeout_s + grace_s_) * 1000));
      try {
        reply = proc.read_line(budget);
      } catch (const TimeoutError&) {
        proc.terminate();
        runner.process.reset();
        Report r;
        r.request_id = request.request_id;
        r.status = RunStatus::kTimeout;
        r.message = "runner did not answer within the timeout budget";
        r.wall_ms = budget.count();
        return r;
      }
    }
    if (!reply) {
      proc.terminate();
      runner.process.reset();
      continue;
    }
    auto j = nlohmann::json::parse(*reply, nullptr, false);
    if (j.is_discarded()) throw DataError("sandbox runner wrote a non-JSON line");
    auto report = report_from_json(j);
    if (report.request_id != request.request_id) {
      throw DataError("sandbox runner answered request " + report.request_id + " for " +
                      request.request_id);
    }
    return report;
  }
  throw SandboxUnavailable("sandbox runner exited while handling " + request.request_id);
}

Report ProcessSandbox::execute(const Request& request) {
  Runner* runner = nullptr;
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] {
      for (auto& r : runners_) {
        if (!r->busy) {
          runner = r.get();
          return true;
        }
      }
      return false;
    });
    runner->busy = true;
  }
  struct Release {
    ProcessSandbox* s;
    Runner* r;
    ~Release() {
      {
        std::lock_guard lock(s->mu_);
        r->busy = false;
      }
      s->cv_.notify_one();
    }
  } release{this, runner};
  return exchange(*runner, request);
}

std::shared_ptr<Client> make_client(const Config& config) {
  const auto kind = config.get_string("sandbox", "kind", "process");
  if (kind == "stub") return std::make_shared<StubSandbox>();
  if (kind == "process") {
    auto command = split_command(config.get_string("sandbox", "command", "python3 -m sandbox_runner"));
    auto workers = config.get_int("sandbox", "workers", 4);
    if (workers < 1) throw ConfigError("sandbox.workers must be >= 1");
    return std::make_shared<ProcessSandbox>(std::move(command), static_cast<std::size_t>(workers));
  }
  throw ConfigError("unknown sandbox kind: " + kind);
}

}  // namespace benchsynth::sandbox
