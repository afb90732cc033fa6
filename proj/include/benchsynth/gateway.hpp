#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "benchsynth/common/errors.hpp"

namespace benchsynth {

class Config;

enum class Purpose { kMutation, kCrossover, kSolution, kFeedback, kPostprocess, kTopic, kEvaluate };

std::string_view to_string(Purpose p);
Purpose parse_purpose(std::string_view s);

// 0.7 for generation purposes, 0 for postprocess/topic/evaluate.
double default_temperature(Purpose p);

struct CompletionRequest {
  std::string prompt;
  std::string model_id;
  double temperature = 0.7;
  int max_output = 2048;
  Purpose tag = Purpose::kMutation;
  // Problem id or colony label; carried into logs and errors.
  std::string context;
  // The text the prompt is about (question under mutation, problem being
  // solved). Echo mocks answer with it.
  std::string subject;
};

struct Completion {
  std::string text;
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

// Retryable provider failure (rate limit, 5xx, dropped connection).
class TransientError : public ExternalError {
 public:
  using ExternalError::ExternalError;
};

class GatewayError : public ExternalError {
 public:
  GatewayError(const std::string& what, Purpose tag, std::string context)
      : ExternalError(what + " [tag=" + std::string(to_string(tag)) + ", context=" + context + "]"),
        tag_(tag),
        context_(std::move(context)) {}
  Purpose tag() const { return tag_; }
  const std::string& context() const { return context_; }

 private:
  Purpose tag_;
  std::string context_;
};

class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;
  virtual Completion complete(const CompletionRequest& request) = 0;
};

struct UsageRecord {
  std::uint64_t sequence = 0;
  Purpose tag = Purpose::kMutation;
  std::string model_id;
  std::string context;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  int attempts = 0;
  double latency_ms = 0.0;
  bool ok = false;
};

struct UsageTotals {
  std::size_t calls = 0;
  std::size_t failures = 0;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
};

struct GatewayOptions {
  std::size_t max_in_flight = 8;
  int max_retries = 3;
  int backoff_ms = 500;  // doubles per retry
  double max_requests_per_second = 0.0;  // 0 = unlimited
  std::optional<std::filesystem::path> usage_log;  // JSONL, one line per call
};

// Thread-safe front door for every completion. Callers block while
// max_in_flight requests are outstanding.
class Gateway {
 public:
  Gateway(std::shared_ptr<CompletionProvider> provider, GatewayOptions options = {});

  std::string complete(const CompletionRequest& request);

  std::vector<UsageRecord> usage() const;
  UsageTotals totals() const;
  std::size_t calls(Purpose tag) const;
  std::size_t peak_in_flight() const;

 private:
  void acquire();
  void release();
  void pace();
  void record(UsageRecord rec);

  std::shared_ptr<CompletionProvider> provider_;
  GatewayOptions options_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
  std::size_t peak_ = 0;
  std::chrono::steady_clock::time_point next_slot_{};
  std::vector<UsageRecord> usage_;
};

// Wraps a callable; handy for tests and one-off drivers.
class CallbackProvider : public CompletionProvider {
 public:
  using Fn = std::function<std::string(const CompletionRequest&)>;
  explicit CallbackProvider(Fn fn) : fn_(std::move(fn)) {}
  Completion complete(const CompletionRequest& request) override;

 private:
  Fn fn_;
};

// Deterministic provider driven by a script file:
//
//   {"on_unmatched": "error" | "echo",
//    "rules": [{"tag": "solution", "ordinal": 2, "response": "..."},
//              {"tag": "mutation", "pattern": "regex", "response": "..."},
//              {"prompt_sha256": "...", "once": true, "response": "..."}]}
//
// Rules are tried in order; all present conditions must hold. "ordinal" is
// the 1-based count of calls with that tag. "once" rules are consumed.
// Echo answers with the request subject (or the prompt if it has none).
class ScriptedProvider : public CompletionProvider {
 public:
  enum class Unmatched { kError, kEcho };

  struct Rule {
    std::optional<Purpose> tag;
    std::optional<std::size_t> ordinal;
    std::optional<std::string> pattern;
    std::optional<std::string> prompt_sha256;
    bool once = false;
    std::string response;
  };

  ScriptedProvider(std::vector<Rule> rules, Unmatched unmatched = Unmatched::kError);
  static std::shared_ptr<ScriptedProvider> load(const std::filesystem::path& path);
  static std::shared_ptr<ScriptedProvider> parse(std::string_view json);

  Completion complete(const CompletionRequest& request) override;

 private:
  struct Compiled {
    Rule rule;
    std::optional<std::regex> regex;
    bool used = false;
  };
  std::mutex mu_;
  std::vector<Compiled> rules_;
  Unmatched unmatched_;
  std::map<Purpose, std::size_t> ordinals_;
};

// Passes through to another provider and keeps every exchange so a session
// can be saved as a replay script (prompt_sha256 + once rules).
class RecordingProvider : public CompletionProvider {
 public:
  explicit RecordingProvider(std::shared_ptr<CompletionProvider> inner);
  Completion complete(const CompletionRequest& request) override;
  void save_script(const std::filesystem::path& path) const;
  std::string script_json() const;

 private:
  std::shared_ptr<CompletionProvider> inner_;
  mutable std::mutex mu_;
  std::vector<std::pair<CompletionRequest, std::string>> exchanges_;
};

// Offline stand-in for a generator model, for mock-mode runs. Answers are a
// pure function of (request context, prompt, how many times that pair was
// seen), so a run is reproducible as long as each context issues its calls
// sequentially.
class SyntheticProvider : public CompletionProvider {
 public:
  explicit SyntheticProvider(std::uint64_t seed = 0);
  Completion complete(const CompletionRequest& request) override;

 private:
  std::string problem(std::uint64_t h, const CompletionRequest& request) const;
  std::string solve(std::uint64_t h, const CompletionRequest& request) const;

  std::uint64_t seed_;
  std::mutex mu_;
  std::map<std::pair<std::string, std::string>, std::uint64_t> seen_;
};

struct OpenAiOptions {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string auth_env = "OPENAI_API_KEY";
  int timeout_s = 120;
};

// Chat-completions style HTTP provider.
class OpenAiProvider : public CompletionProvider {
 public:
  explicit OpenAiProvider(OpenAiOptions options);
  Completion complete(const CompletionRequest& request) override;

 private:
  OpenAiOptions options_;
};

// [llm] provider = openai | script | synthetic
std::shared_ptr<CompletionProvider> make_completion_provider(const Config& config);
GatewayOptions gateway_options(const Config& config);

}  // namespace benchsynth
