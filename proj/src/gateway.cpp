#include "benchsynth/gateway.hpp"

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "benchsynth/common/config.hpp"
#include "benchsynth/common/digest.hpp"

namespace benchsynth {
namespace {

constexpr std::pair<Purpose, std::string_view> kPurposeNames[] = {
    {Purpose::kMutation, "mutation"},   {Purpose::kCrossover, "crossover"},
    {Purpose::kSolution, "solution"},   {Purpose::kFeedback, "feedback"},
    {Purpose::kPostprocess, "postprocess"}, {Purpose::kTopic, "topic"},
    {Purpose::kEvaluate, "evaluate"},
};

// Rough token estimate for providers that report no usage.
int approx_tokens(std::string_view text) { return static_cast<int>((text.size() + 3) / 4); }

}  // namespace

std::string_view to_string(Purpose p) {
  for (auto [k, v] : kPurposeNames) {
    if (k == p) return v;
  }
  return "mutation";
}

Purpose parse_purpose(std::string_view s) {
  for (auto [k, v] : kPurposeNames) {
    if (v == s) return k;
  }
  throw UsageError("unknown request tag: " + std::string(s));
}

double default_temperature(Purpose p) {
  switch (p) {
    case Purpose::kPostprocess:
    case Purpose::kTopic:
    case Purpose::kEvaluate:
      return 0.0;
    default:
      return 0.7;
  }
}

Gateway::Gateway(std::shared_ptr<CompletionProvider> provider, GatewayOptions options)
    : provider_(std::move(provider)), options_(std::move(options)) {
  if (!provider_) throw ConfigError("gateway needs a provider");
  if (options_.max_in_flight == 0) options_.max_in_flight = 1;
  if (options_.usage_log) std::ofstream(*options_.usage_log, std::ios::trunc);
}

void Gateway::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return in_flight_ < options_.max_in_flight; });
  ++in_flight_;
  peak_ = std::max(peak_, in_flight_);
}

void Gateway::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

void Gateway::pace() {
  if (options_.max_requests_per_second <= 0.0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / options_.max_requests_per_second));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mu_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

void Gateway::record(UsageRecord rec) {
  std::lock_guard lock(mu_);
  rec.sequence = usage_.size();
  if (options_.usage_log) {
    nlohmann::ordered_json j;
    j["seq"] = rec.sequence;
    j["tag"] = to_string(rec.tag);
    j["model"] = rec.model_id;
    j["context"] = rec.context;
    j["prompt_tokens"] = rec.prompt_tokens;
    j["completion_tokens"] = rec.completion_tokens;
    j["attempts"] = rec.attempts;
    j["latency_ms"] = rec.latency_ms;
    j["ok"] = rec.ok;
    std::ofstream(*options_.usage_log, std::ios::app) << j.dump() << "\n";
  }
  usage_.push_back(std::move(rec));
}

std::string Gateway::complete(const CompletionRequest& request) {
  if (request.prompt.empty()) throw UsageError("completion prompt is empty");
  if (request.temperature < 0.0) throw UsageError("temperature must be >= 0");
  UsageRecord rec;
  rec.tag = request.tag;
  rec.model_id = request.model_id;
  rec.context = request.context;
  const auto start = std::chrono::steady_clock::now();
  std::string last_error;
  acquire();
  struct Release {
    Gateway* g;
    ~Release() { g->release(); }
  } guard{this};
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0 && options_.backoff_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(options_.backoff_ms << (attempt - 1)));
    }
    pace();
    rec.attempts = attempt + 1;
    try {
      auto c = provider_->complete(request);
      rec.ok = true;
      rec.prompt_tokens = c.prompt_tokens ? c.prompt_tokens : approx_tokens(request.prompt);
      rec.completion_tokens = c.completion_tokens ? c.completion_tokens : approx_tokens(c.text);
      rec.latency_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start).count();
      record(rec);
      return std::move(c.text);
    } catch (const TransientError& e) {
      last_error = e.what();
    } catch (const std::exception& e) {
      last_error = e.what();
      break;
    }
  }
  rec.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  record(rec);
  throw GatewayError("completion failed: " + last_error, request.tag, request.context);
}

std::vector<UsageRecord> Gateway::usage() const {
  std::lock_guard lock(mu_);
  return usage_;
}

UsageTotals Gateway::totals() const {
  std::lock_guard lock(mu_);
  UsageTotals t;
  for (const auto& r : usage_) {
    ++t.calls;
    if (!r.ok) ++t.failures;
    t.prompt_tokens += r.prompt_tokens;
    t.completion_tokens += r.completion_tokens;
  }
  return t;
}

std::size_t Gateway::calls(Purpose tag) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& r : usage_) n += r.tag == tag;
  return n;
}

std::size_t Gateway::peak_in_flight() const {
  std::lock_guard lock(mu_);
  return peak_;
}

Completion CallbackProvider::complete(const CompletionRequest& request) {
  return Completion{fn_(request)};
}

ScriptedProvider::ScriptedProvider(std::vector<Rule> rules, Unmatched unmatched)
    : unmatched_(unmatched) {
  for (auto& r : rules) {
    Compiled c;
    c.rule = std::move(r);
    if (c.rule.pattern) c.regex.emplace(*c.rule.pattern);
    rules_.push_back(std::move(c));
  }
}

std::shared_ptr<ScriptedProvider> ScriptedProvider::parse(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("mock script is not valid JSON: ") + e.what());
  }
  auto mode = j.value("on_unmatched", std::string("error"));
  if (mode != "error" && mode != "echo") throw ConfigError("on_unmatched must be error or echo");
  std::vector<Rule> rules;
  for (const auto& r : j.value("rules", nlohmann::json::array())) {
    Rule rule;
    if (r.contains("tag")) rule.tag = parse_purpose(r["tag"].get<std::string>());
    if (r.contains("ordinal")) rule.ordinal = r["ordinal"].get<std::size_t>();
    if (r.contains("pattern")) rule.pattern = r["pattern"].get<std::string>();
    if (r.contains("prompt_sha256")) rule.prompt_sha256 = r["prompt_sha256"].get<std::string>();
    rule.once = r.value("once", false);
    rule.response = r.at("response").get<std::string>();
    rules.push_back(std::move(rule));
  }
  return std::make_shared<ScriptedProvider>(std::move(rules),
                                            mode == "echo" ? Unmatched::kEcho : Unmatched::kError);
}

std::shared_ptr<ScriptedProvider> ScriptedProvider::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read mock script " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

Completion ScriptedProvider::complete(const CompletionRequest& request) {
  std::lock_guard lock(mu_);
  const std::size_t ordinal = ++ordinals_[request.tag];
  std::optional<std::string> sha;
  for (auto& c : rules_) {
    const auto& r = c.rule;
    if (c.used) continue;
    if (r.tag && *r.tag != request.tag) continue;
    if (r.ordinal && *r.ordinal != ordinal) continue;
    if (c.regex && !std::regex_search(request.prompt, *c.regex)) continue;
    if (r.prompt_sha256) {
      if (!sha) sha = sha256_hex(request.prompt);
      if (*sha != *r.prompt_sha256) continue;
    }
    if (r.once) c.used = true;
    return Completion{r.response};
  }
  if (unmatched_ == Unmatched::kEcho) {
    return Completion{request.subject.empty() ? request.prompt : request.subject};
  }
  throw ExternalError("mock script has no response for " + std::string(to_string(request.tag)) +
                      " call #" + std::to_string(ordinal));
}

RecordingProvider::RecordingProvider(std::shared_ptr<CompletionProvider> inner)
    : inner_(std::move(inner)) {}

Completion RecordingProvider::complete(const CompletionRequest& request) {
  auto c = inner_->complete(request);
  std::lock_guard lock(mu_);
  exchanges_.emplace_back(request, c.text);
  return c;
}

std::string RecordingProvider::script_json() const {
  std::lock_guard lock(mu_);
  nlohmann::ordered_json j;
  j["on_unmatched"] = "error";
  auto& rules = j["rules"] = nlohmann::ordered_json::array();
  for (const auto& [req, text] : exchanges_) {
    nlohmann::ordered_json r;
    r["tag"] = to_string(req.tag);
    r["prompt_sha256"] = sha256_hex(req.prompt);
    r["once"] = true;
    r["response"] = text;
    rules.push_back(std::move(r));
  }
  return j.dump(1);
}

void RecordingProvider::save_script(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << script_json() << "\n";
}

OpenAiProvider::OpenAiProvider(OpenAiOptions options) : options_(std::move(options)) {}

Completion OpenAiProvider::complete(const CompletionRequest& request) {
  const auto scheme = options_.endpoint.find("://");
  const auto slash = options_.endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  const std::string origin = options_.endpoint.substr(0, slash);
  const std::string path = slash == std::string::npos ? "/" : options_.endpoint.substr(slash);
  httplib::Client client(origin);
  client.set_read_timeout(options_.timeout_s, 0);
  httplib::Headers headers;
  if (!options_.auth_env.empty()) {
    const char* key = std::getenv(options_.auth_env.c_str());
    if (!key) throw ConfigError("environment variable " + options_.auth_env + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  nlohmann::json body;
  body["model"] = request.model_id;
  body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}});
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_output;
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) throw TransientError("request failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw TransientError("HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ExternalError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
    throw TransientError("malformed completion response");
  }
  Completion c;
  const auto& content = j["choices"][0]["message"]["content"];
  c.text = content.is_string() ? content.get<std::string>() : std::string();
  if (j.contains("usage")) {
    c.prompt_tokens = j["usage"].value("prompt_tokens", 0);
    c.completion_tokens = j["usage"].value("completion_tokens", 0);
  }
  return c;
}

std::shared_ptr<CompletionProvider> make_completion_provider(const Config& config) {
  auto kind = config.get_string("llm", "provider", "openai");
  if (kind == "openai") {
    OpenAiOptions o;
    o.endpoint = config.get_string("llm", "endpoint", o.endpoint);
    o.auth_env = config.get_string("llm", "auth_env", o.auth_env);
    o.timeout_s = static_cast<int>(config.get_int("llm", "timeout_s", o.timeout_s));
    return std::make_shared<OpenAiProvider>(o);
  }
  if (kind == "script") {
    auto path = config.get_string("llm", "script", "");
    if (path.empty()) throw ConfigError("llm.script is required for the script provider");
    return ScriptedProvider::load(path);
  }
  if (kind == "synthetic") {
    return std::make_shared<SyntheticProvider>(
        static_cast<std::uint64_t>(config.get_int("llm", "seed", 0)));
  }
  throw ConfigError("unknown llm provider: " + kind);
}

GatewayOptions gateway_options(const Config& config) {
  GatewayOptions o;
  o.max_in_flight = static_cast<std::size_t>(config.get_int("llm", "max_in_flight", 8));
  o.max_retries = static_cast<int>(config.get_int("llm", "max_retries", 3));
  o.backoff_ms = static_cast<int>(config.get_int("llm", "backoff_ms", 500));
  o.max_requests_per_second = config.get_double("llm", "max_requests_per_second", 0.0);
  return o;
}

}  // namespace benchsynth
