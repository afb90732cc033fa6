#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "benchsynth/common/errors.hpp"
#include "benchsynth/common/subprocess.hpp"

namespace benchsynth {
class Config;
}

namespace benchsynth::sandbox {

enum class RunStatus { kOk, kCompileError, kTimeout, kCrashed };
enum class TestResult { kPass, kFail, kError };

std::string_view to_string(RunStatus s);
std::string_view to_string(TestResult r);
RunStatus parse_run_status(std::string_view s);
TestResult parse_test_result(std::string_view s);

struct Request {
  std::string request_id;
  std::string solution_source;
  std::string tests_source;
  double timeout_s = 10.0;
  bool collect_coverage = true;
};

struct TestOutcome {
  std::string test_name;
  TestResult result = TestResult::kPass;
  std::string message;
};

struct Report {
  std::string request_id;
  RunStatus status = RunStatus::kOk;
  std::vector<TestOutcome> per_test;
  int executed_lines = 0;
  int executable_lines = 0;
  long wall_ms = 0;
  std::string message;  // import error text, crash reason
};

// Executed / executable solution lines; 0 when nothing is executable.
double coverage(const Report& r);

// Wire format, one object per line.
nlohmann::ordered_json to_json(const Request& r);
nlohmann::ordered_json to_json(const Report& r);
Request request_from_json(const nlohmann::json& j);
Report report_from_json(const nlohmann::json& j);

// Plain-text execution output as shown to the generator in feedback prompts.
std::string render_output(const Report& r);

// Solution-source comment markers understood by StubSandbox.
inline constexpr std::string_view kFailMarker = "# stub: fail";
inline constexpr std::string_view kErrorMarker = "# stub: error";
inline constexpr std::string_view kCompileErrorMarker = "# stub: compile-error";
inline constexpr std::string_view kTimeoutMarker = "# stub: timeout";

class SandboxUnavailable : public ExternalError {
 public:
  using ExternalError::ExternalError;
};

class Client {
 public:
  virtual ~Client() = default;
  virtual Report execute(const Request& request) = 0;
};

// Names of top-level `def test_*` functions in declaration order.
std::vector<std::string> test_functions(std::string_view tests_source);

// Non-blank, non-comment lines.
int executable_lines(std::string_view source);

// In-process double. Every collected test passes unless the solution carries
// a marker: fail / error mark the first test, compile-error and timeout
// replace the whole run. Coverage is full when any test passes.
class StubSandbox : public Client {
 public:
  Report execute(const Request& request) override;
};

// Pool of long-lived runner processes speaking the JSON-lines protocol. A
// runner that dies is restarted once per request; a runner that stays silent
// past timeout + grace is killed and the request reported as timed out.
class ProcessSandbox : public Client {
 public:
  ProcessSandbox(std::vector<std::string> command, std::size_t workers = 1,
                 double grace_s = 5.0);
  ~ProcessSandbox() override;
  Report execute(const Request& request) override;

 private:
  struct Runner {
    std::optional<Subprocess> process;
    bool busy = false;
  };
  Report exchange(Runner& runner, const Request& request);

  std::vector<std::string> command_;
  double grace_s_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<Runner>> runners_;
};

// [sandbox] kind = stub | process, command, workers
std::shared_ptr<Client> make_client(const Config& config);

}  // namespace benchsynth::sandbox
