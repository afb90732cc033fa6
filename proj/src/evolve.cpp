#include "benchsynth/evolve.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "benchsynth/common/config.hpp"
#include "benchsynth/common/digest.hpp"
#include "benchsynth/common/parallel.hpp"
#include "benchsynth/gateway.hpp"
#include "benchsynth/metrics/protocols.hpp"

namespace benchsynth {
namespace {

using prompts::Difficulty;

struct Preset {
  std::string_view name;
  std::size_t total, colonies, seed_sample, crossover_outputs, crossover_batch;
  int iterations;
  bool guided;
  bool hard;
};

constexpr Preset kPresets[] = {
    {"mbpp-new", 1000, 10, 30, 2, 5, 5, false, false},
    {"mbpp-hard", 500, 10, 15, 1, 4, 5, false, true},
    {"leetcode-new", 1000, 10, 30, 2, 4, 5, false, false},
    {"mbpp-guided", 1000, 10, 30, 3, 5, 3, true, false},
    {"mbpp-hard-guided", 500, 10, 15, 3, 4, 3, true, true},
    {"leetcode-guided", 1000, 10, 30, 3, 4, 3, true, false},
};

Provenance provenance_for(Difficulty d) {
  switch (d) {
    case Difficulty::kEasier:
      return Provenance::kMutationEasy;
    case Difficulty::kEqual:
      return Provenance::kMutationMedium;
    case Difficulty::kHarder:
      return Provenance::kMutationHard;
  }
  return Provenance::kMutationMedium;
}

// Statement -> embedding, filled on demand through the provider.
class VectorMemo {
 public:
  VectorMemo(EmbeddingProvider* provider, const EmbedOptions& options)
      : provider_(provider), options_(options) {}

  std::vector<const std::vector<double>*> get(const std::vector<std::string>& texts) {
    std::vector<std::string> missing;
    for (const auto& t : texts) {
      if (!memo_.count(t)) missing.push_back(t);
    }
    if (!missing.empty()) {
      auto vecs = embed_texts(missing, *provider_, options_);
      for (std::size_t i = 0; i < missing.size(); ++i) memo_[missing[i]] = std::move(vecs[i]);
    }
    std::vector<const std::vector<double>*> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(&memo_.at(t));
    return out;
  }

 private:
  EmbeddingProvider* provider_;
  EmbedOptions options_;
  std::unordered_map<std::string, std::vector<double>> memo_;
};

nlohmann::ordered_json report_json(const ColonyReport& r) {
  nlohmann::ordered_json j;
  j["colony"] = r.colony;
  j["iterations"] = r.iterations;
  j["mutation_ops"] = r.mutation_ops;
  j["crossover_ops"] = r.crossover_ops;
  j["generated"] = r.generated;
  j["unusable"] = r.unusable;
  j["kfn_dropped"] = r.kfn_dropped;
  j["dedup_dropped"] = r.dedup_dropped;
  j["accepted"] = r.accepted;
  j["exhausted"] = r.exhausted;
  j["stalled"] = r.stalled;
  return j;
}

ColonyReport report_from(const nlohmann::json& j) {
  ColonyReport r;
  r.colony = j.at("colony").get<std::size_t>();
  r.iterations = j.at("iterations").get<std::size_t>();
  r.mutation_ops = j.at("mutation_ops").get<std::size_t>();
  r.crossover_ops = j.at("crossover_ops").get<std::size_t>();
  r.generated = j.at("generated").get<std::size_t>();
  r.unusable = j.at("unusable").get<std::size_t>();
  r.kfn_dropped = j.at("kfn_dropped").get<std::size_t>();
  r.dedup_dropped = j.at("dedup_dropped").get<std::size_t>();
  r.accepted = j.at("accepted").get<std::size_t>();
  return r;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t colony) {
  return dir / ("colony-" + std::to_string(colony) + ".jsonl");
}

}  // namespace

std::size_t GenerationConfig::per_colony() const {
  return colonies ? (total + colonies - 1) / colonies : 0;
}

void GenerationConfig::validate() const {
  if (total == 0) throw ConfigError("evolve.total must be positive");
  if (colonies == 0) throw ConfigError("evolve.colonies must be positive");
  if (seed_sample == 0) throw ConfigError("evolve.seed_sample must be positive");
  if (crossover_batch < 2) throw ConfigError("evolve.crossover_batch must be at least 2");
  if (crossover_batch > seed_sample) {
    throw ConfigError("evolve.crossover_batch cannot exceed evolve.seed_sample");
  }
  if (crossover_outputs == 0) throw ConfigError("evolve.crossover_outputs must be positive");
  if (feedback_iterations < 1) throw ConfigError("evolve.feedback_iterations must be >= 1");
  if (!(p_mutation >= 0.0 && p_mutation <= 1.0)) {
    throw ConfigError("evolve.p_mutation must lie in [0, 1]");
  }
  if (difficulties.empty() && p_mutation > 0.0) {
    throw ConfigError("evolve.difficulties is empty but mutation is enabled");
  }
  if (kfn_enabled && (kfn_keep_mutation == 0 || kfn_keep_crossover == 0)) {
    throw ConfigError("k-FN keep counts must be at least 1");
  }
  if (stall_limit == 0) throw ConfigError("evolve.stall_limit must be positive");
}

std::string GenerationConfig::canonical() const {
  std::ostringstream s;
  s.precision(17);
  s << "total=" << total << "\ncolonies=" << colonies << "\nseed_sample=" << seed_sample
    << "\ncrossover_outputs=" << crossover_outputs << "\ncrossover_batch=" << crossover_batch
    << "\nfeedback_iterations=" << feedback_iterations << "\np_mutation=" << p_mutation
    << "\nkfn=" << kfn_enabled << "\nkfn_keep_mutation=" << kfn_keep_mutation
    << "\nkfn_keep_crossover=" << kfn_keep_crossover << "\ndifficulties=";
  for (auto d : difficulties) s << prompts::to_string(d) << ",";
  s << "\nseed=" << seed << "\nmodel=" << model_id << "\nstall_limit=" << stall_limit << "\n";
  return s.str();
}

std::string GenerationConfig::fingerprint() const { return sha256_hex(canonical()); }

GenerationConfig GenerationConfig::preset(std::string_view name) {
  for (const auto& p : kPresets) {
    if (p.name != name) continue;
    GenerationConfig c;
    c.name = std::string(name);
    c.total = p.total;
    c.colonies = p.colonies;
    c.seed_sample = p.seed_sample;
    c.crossover_outputs = p.crossover_outputs;
    c.crossover_batch = p.crossover_batch;
    c.feedback_iterations = p.iterations;
    c.kfn_enabled = p.guided;
    if (p.hard) c.difficulties = {Difficulty::kHarder};
    return c;
  }
  throw ConfigError("unknown generation preset: " + std::string(name));
}

std::vector<std::string> GenerationConfig::preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.emplace_back(p.name);
  return out;
}

GenerationConfig GenerationConfig::from_config(const Config& cfg) {
  GenerationConfig c;
  if (auto p = cfg.get("evolve", "preset")) c = preset(*p);
  auto size = [&](std::string_view key, std::size_t fallback) {
    auto v = cfg.get_int("evolve", key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError("evolve." + std::string(key) + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  c.name = cfg.get_string("evolve", "name", c.name);
  c.total = size("total", c.total);
  c.colonies = size("colonies", c.colonies);
  c.seed_sample = size("seed_sample", c.seed_sample);
  c.crossover_outputs = size("crossover_outputs", c.crossover_outputs);
  c.crossover_batch = size("crossover_batch", c.crossover_batch);
  c.feedback_iterations =
      static_cast<int>(cfg.get_int("evolve", "feedback_iterations", c.feedback_iterations));
  c.p_mutation = cfg.get_double("evolve", "p_mutation", c.p_mutation);
  c.kfn_enabled = cfg.get_bool("evolve", "kfn", c.kfn_enabled);
  c.kfn_keep_mutation = size("kfn_keep_mutation", c.kfn_keep_mutation);
  c.kfn_keep_crossover = size("kfn_keep_crossover", c.kfn_keep_crossover);
  if (cfg.has("evolve", "difficulties")) {
    c.difficulties.clear();
    for (const auto& d : cfg.get_list("evolve", "difficulties", {})) {
      c.difficulties.push_back(prompts::parse_difficulty(d));
    }
  }
  c.seed = static_cast<std::uint64_t>(cfg.get_int("evolve", "seed", 0));
  c.model_id = cfg.get_string("evolve", "model", c.model_id);
  c.stall_limit = size("stall_limit", c.stall_limit);
  c.validate();
  return c;
}

std::string clean_generated_statement(std::string_view text) {
  auto trim = [](std::string_view s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string_view::npos) return std::string_view{};
    return s.substr(a, s.find_last_not_of(" \t\r\n") - a + 1);
  };
  text = trim(text);
  constexpr std::string_view kLabel = "New Question:";
  if (text.starts_with(kLabel)) text = trim(text.substr(kLabel.size()));
  return std::string(text);
}

std::vector<Variant> mutate(const ProblemRecord& problem, std::span<const Difficulty> difficulties,
                            Gateway& gateway, const std::string& model_id,
                            const std::string& context, std::size_t* unusable) {
  if (problem.statement.empty()) throw DataError("cannot mutate an empty statement: " + problem.id);
  std::vector<Variant> out;
  for (auto d : difficulties) {
    CompletionRequest req;
    req.prompt = prompts::mutation(d, problem.statement);
    req.model_id = model_id;
    req.tag = Purpose::kMutation;
    req.temperature = default_temperature(req.tag);
    req.context = context;
    req.subject = problem.statement;
    auto statement = clean_generated_statement(gateway.complete(req));
    if (statement.empty()) {
      if (unusable) ++*unusable;
      continue;
    }
    out.push_back({std::move(statement), provenance_for(d), {problem.id}});
  }
  return out;
}

std::vector<Variant> crossover(std::span<const ProblemRecord> batch, std::size_t outputs,
                               Gateway& gateway, const std::string& model_id,
                               const std::string& context, std::size_t* unusable) {
  if (batch.size() < 2) throw DataError("crossover needs at least two problems");
  std::vector<std::string> questions;
  std::vector<std::string> parents;
  for (const auto& p : batch) {
    questions.push_back(p.statement);
    parents.push_back(p.id);
  }
  CompletionRequest req;
  req.prompt = prompts::crossover(questions);
  req.model_id = model_id;
  req.tag = Purpose::kCrossover;
  req.temperature = default_temperature(req.tag);
  req.context = context;
  std::vector<Variant> out;
  for (std::size_t i = 0; i < outputs; ++i) {
    auto statement = clean_generated_statement(gateway.complete(req));
    if (statement.empty()) {
      if (unusable) ++*unusable;
      continue;
    }
    out.push_back({std::move(statement), Provenance::kCrossover, parents});
  }
  return out;
}

double max_cosine(std::span<const double> v, std::span<const std::vector<double>> reference) {
  double vn = 0.0;
  for (double x : v) vn += x * x;
  vn = std::sqrt(vn);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& u : reference) {
    if (u.size() != v.size()) throw DimensionMismatch("k-FN embeddings differ in dimension");
    double dot = 0.0, un = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      dot += v[i] * u[i];
      un += u[i] * u[i];
    }
    const double denom = vn * std::sqrt(un);
    if (denom == 0.0) throw DegenerateInputError("zero embedding in k-FN scoring");
    best = std::max(best, dot / denom);
  }
  return best;
}

std::vector<std::size_t> kfn_select(std::span<const std::vector<double>> candidates,
                                    std::span<const std::vector<double>> reference,
                                    std::size_t keep) {
  if (keep > candidates.size()) {
    throw InsufficientPoints("k-FN asked to keep " + std::to_string(keep) + " of " +
                             std::to_string(candidates.size()) + " candidates");
  }
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scored.emplace_back(max_cosine(candidates[i], reference), i);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < keep; ++i) out.push_back(scored[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

std::string checkpoint_line(const ColonyState& state, const ColonyReport& report,
                            const std::string& fingerprint) {
  nlohmann::ordered_json j;
  j["fingerprint"] = fingerprint;
  j["colony"] = state.colony;
  j["iteration"] = state.iteration;
  j["next_id"] = state.next_id;
  std::ostringstream rng;
  rng << state.rng;
  j["rng"] = rng.str();
  auto& pool = j["seed_pool"] = nlohmann::ordered_json::array();
  for (const auto& r : state.seed_pool) pool.push_back(to_json(r));
  auto& fresh = j["new_problems"] = nlohmann::ordered_json::array();
  for (const auto& r : state.new_problems) fresh.push_back(to_json(r));
  j["report"] = report_json(report);
  return j.dump();
}

std::optional<std::pair<ColonyState, ColonyReport>> load_checkpoint(
    const std::filesystem::path& path, const std::string& fingerprint) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  if (last.empty()) return std::nullopt;
  auto j = nlohmann::ordered_json::parse(last, nullptr, false);
  if (j.is_discarded()) throw DataError("corrupt checkpoint " + path.string());
  if (j.value("fingerprint", std::string()) != fingerprint) return std::nullopt;
  ColonyState s;
  s.colony = j.at("colony").get<std::size_t>();
  s.iteration = j.at("iteration").get<std::size_t>();
  s.next_id = j.at("next_id").get<std::size_t>();
  std::istringstream rng(j.at("rng").get<std::string>());
  rng >> s.rng;
  for (const auto& r : j.at("seed_pool")) s.seed_pool.push_back(record_from_json(r));
  for (const auto& r : j.at("new_problems")) s.new_problems.push_back(record_from_json(r));
  auto report = report_from(j.at("report"));
  report.resumed = true;
  return std::make_pair(std::move(s), report);
}

ColonyReport evolve_colony(ColonyState& state, std::size_t target, const GenerationConfig& config,
                           const EvolveEnv& env, std::optional<ColonyReport> resumed) {
  if (!env.gateway) throw ConfigError("evolve needs a gateway");
  if (config.kfn_enabled && !env.embedder) {
    throw ConfigError("k-farthest-neighbor selection needs an embedding provider");
  }
  if (state.seed_pool.empty()) throw DataError("colony seed pool is empty");

  ColonyReport report = resumed.value_or(ColonyReport{});
  report.resumed = resumed.has_value();
  report.exhausted = false;
  report.stalled = false;
  report.error.clear();
  report.colony = state.colony;
  report.iterations = state.iteration;
  const std::string context = "colony-" + std::to_string(state.colony);
  const std::string fingerprint = config.fingerprint();

  dedup::NearDuplicateIndex pool_index(env.dedup), new_index(env.dedup);
  {
    std::vector<ProblemRecord> pool;
    for (auto& r : state.seed_pool) {
      if (!pool_index.insert_if_novel(r.id, r.statement)) pool.push_back(std::move(r));
    }
    state.seed_pool = std::move(pool);
    for (const auto& r : state.new_problems) new_index.insert_if_novel(r.id, r.statement);
  }
  VectorMemo memo(env.embedder, env.embed_options);
  std::ofstream checkpoint;
  if (env.checkpoint_dir) {
    std::filesystem::create_directories(*env.checkpoint_dir);
    checkpoint.open(checkpoint_path(*env.checkpoint_dir, state.colony), std::ios::app);
  }

  std::size_t stall = 0;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  try {
    while (state.new_problems.size() < target) {
      const bool mutation = coin(state.rng) < config.p_mutation;
      std::vector<Variant> variants;
      std::size_t keep;
      if (mutation) {
        ++report.mutation_ops;
        const auto pick = std::uniform_int_distribution<std::size_t>(
            0, state.seed_pool.size() - 1)(state.rng);
        variants = mutate(state.seed_pool[pick], config.difficulties, *env.gateway,
                          config.model_id, context, &report.unusable);
        keep = config.kfn_keep_mutation;
      } else {
        ++report.crossover_ops;
        const auto n = std::min(config.crossover_batch, state.seed_pool.size());
        if (n < 2) throw DataError("colony pool too small for crossover");
        std::vector<ProblemRecord> batch;
        for (auto i : metrics::sample_without_replacement(state.seed_pool.size(), n, state.rng())) {
          batch.push_back(state.seed_pool[i]);
        }
        variants = crossover(batch, config.crossover_outputs, *env.gateway, config.model_id,
                             context, &report.unusable);
        keep = config.kfn_keep_crossover;
      }
      ++state.iteration;
      report.generated += variants.size();

      if (config.kfn_enabled && variants.size() > keep) {
        std::vector<std::string> ref_texts;
        for (const auto& r : state.new_problems) ref_texts.push_back(r.statement);
        for (const auto& r : state.seed_pool) ref_texts.push_back(r.statement);
        std::vector<std::string> cand_texts;
        for (const auto& v : variants) cand_texts.push_back(v.statement);
        std::vector<std::vector<double>> ref, cand;
        for (auto* v : memo.get(ref_texts)) ref.push_back(*v);
        for (auto* v : memo.get(cand_texts)) cand.push_back(*v);
        std::vector<Variant> kept;
        for (auto i : kfn_select(cand, ref, keep)) kept.push_back(std::move(variants[i]));
        report.kfn_dropped += variants.size() - kept.size();
        variants = std::move(kept);
      }

      std::vector<ProblemRecord> survivors;
      for (auto& v : variants) {
        ProblemRecord r;
        r.id = "c" + std::to_string(state.colony) + "-" + std::to_string(state.next_id++);
        r.statement = std::move(v.statement);
        r.provenance = v.provenance;
        r.parents = std::move(v.parents);
        r.colony = static_cast<int>(state.colony);
        r.iteration = static_cast<int>(state.iteration);
        survivors.push_back(std::move(r));
      }
      std::vector<ProblemRecord> accepted;
      std::vector<char> is_new(survivors.size(), 0);
      for (std::size_t i = 0; i < survivors.size(); ++i) {
        if (new_index.insert_if_novel(survivors[i].id, survivors[i].statement)) {
          ++report.dedup_dropped;
        } else {
          is_new[i] = 1;
          accepted.push_back(survivors[i]);
        }
      }
      if (env.verifier && !accepted.empty()) env.verifier(accepted);
      for (std::size_t i = 0, a = 0; i < survivors.size(); ++i) {
        if (is_new[i]) survivors[i] = accepted[a++];
        if (!pool_index.insert_if_novel(survivors[i].id, survivors[i].statement)) {
          state.seed_pool.push_back(survivors[i]);
        }
      }
      report.accepted += accepted.size();
      for (auto& r : accepted) state.new_problems.push_back(std::move(r));
      report.iterations = state.iteration;
      if (checkpoint.is_open()) checkpoint << checkpoint_line(state, report, fingerprint) << "\n" << std::flush;

      stall = is_new.empty() || std::count(is_new.begin(), is_new.end(), 1) == 0 ? stall + 1 : 0;
      if (stall >= config.stall_limit) {
        report.stalled = true;
        break;
      }
    }
  } catch (const GatewayError& e) {
    report.exhausted = true;
    report.error = e.what();
  }
  return report;
}

GenerationResult run_generation(const GenerationConfig& config, const DatasetManifest& seeds,
                                const EvolveEnv& env) {
  config.validate();
  if (seeds.records.size() < config.seed_sample) {
    throw DataError("seed dataset has " + std::to_string(seeds.records.size()) +
                    " records but each colony samples " + std::to_string(config.seed_sample));
  }
  const auto fingerprint = config.fingerprint();
  std::vector<ColonyState> states(config.colonies);
  std::vector<ColonyReport> reports(config.colonies);
  std::vector<std::optional<ColonyReport>> prior(config.colonies);
  for (std::size_t c = 0; c < config.colonies; ++c) {
    if (env.checkpoint_dir) {
      if (auto cp = load_checkpoint(checkpoint_path(*env.checkpoint_dir, c), fingerprint)) {
        states[c] = std::move(cp->first);
        prior[c] = cp->second;
        continue;
      }
      std::filesystem::remove(checkpoint_path(*env.checkpoint_dir, c));
    }
    auto& s = states[c];
    s.colony = c;
    s.rng.seed(derive_seed(config.seed, c));
    for (auto i : metrics::sample_without_replacement(seeds.records.size(), config.seed_sample,
                                                      s.rng())) {
      s.seed_pool.push_back(seeds.records[i]);
    }
  }

  const auto workers = env.colony_workers ? env.colony_workers : config.colonies;
  parallel_for(config.colonies, workers, [&](std::size_t c) {
    auto r = evolve_colony(states[c], config.per_colony(), config, env, prior[c]);
    reports[c] = std::move(r);
  });

  GenerationResult result;
  std::vector<DatasetManifest> parts;
  for (auto& s : states) {
    DatasetManifest m;
    m.name = config.name;
    m.records = std::move(s.new_problems);
    parts.push_back(std::move(m));
  }
  result.merged = merge_datasets(parts);
  result.merged.name = config.name;
  result.merged.lineage = {seeds.name};
  result.merged.config_fingerprint = fingerprint;
  auto deduped = dedup::deduplicate(result.merged, env.dedup);
  result.manifest = std::move(deduped.retained);
  result.manifest.name = config.name;
  result.manifest.lineage = {seeds.name};
  result.manifest.config_fingerprint = fingerprint;
  result.removed = std::move(deduped.removed);
  result.colonies = std::move(reports);
  for (const auto& r : result.colonies) result.partial = result.partial || r.exhausted || r.stalled;
  return result;
}

}  // namespace benchsynth
