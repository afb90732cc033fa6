// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "benchsynth/analysis.hpp"
#include "benchsynth/common/config.hpp"
#include "benchsynth/dedup.hpp"
#include "benchsynth/evolve.hpp"
#include "benchsynth/metrics/estimators.hpp"
#include "benchsynth/metrics/protocols.hpp"
#include "benchsynth/pipeline.hpp"
#include "benchsynth/projection.hpp"
#include "benchsynth/verify.hpp"
#include "support/responses.hpp"
#include "support/sampling.hpp"
#include "support/seeds.hpp"
#include "support/statements.hpp"

using namespace benchsynth;
using knn::PointSet;
using metrics::KnnBackend;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Verdict()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!v.pass) ++failures;
  std::printf("%s %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(),
              secs);
  std::fflush(stdout);
}

std::string fmt(double x, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << std::fixed << x;
  return s.str();
}

std::string sci(double x) {
  std::ostringstream s;
  s.precision(2);
  s << std::scientific << x;
  return s.str();
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

PointSet scaled(const PointSet& p, double a) {
  auto c = p.coords();
  for (auto& x : c) x *= a;
  return PointSet(p.dim(), std::move(c));
}

// --- estimators ------------------------------------------------------------

Verdict kl_gaussian_shift() {
  std::mt19937_64 rng(1001);
  std::vector<double> est;
  for (int t = 0; t < 20; ++t) {
    auto x = testsupport::gaussian(5000, 2, rng);
    auto y = testsupport::gaussian(5000, 2, rng, {1.0, 0.0});
    est.push_back(metrics::kl_divergence(y, x, 4));
  }
  const double m = mean(est);
  return {std::abs(m - 0.5) <= 0.1, "mean " + fmt(m) + " vs 0.5 +/- 0.1 over 20 trials"};
}

Verdict kl_null() {
  std::mt19937_64 rng(1002);
  std::vector<double> est;
  for (int t = 0; t < 20; ++t) {
    auto x = testsupport::gaussian(5000, 2, rng);
    auto y = testsupport::gaussian(5000, 2, rng);
    est.push_back(metrics::kl_divergence(y, x, 4));
  }
  const double m = mean(est);
  return {std::abs(m) <= 0.05, "mean " + fmt(m) + " vs 0 +/- 0.05 over 20 trials"};
}

Verdict entropy_gaussian() {
  std::mt19937_64 rng(1003);
  std::vector<double> est;
  for (int t = 0; t < 20; ++t) {
    est.push_back(metrics::differential_entropy(testsupport::gaussian(2000, 2, rng), 4));
  }
  const double m = mean(est);
  const double truth = std::log(2.0 * std::numbers::pi * std::numbers::e);
  return {std::abs(m - truth) <= 0.08,
          "mean " + fmt(m) + " vs " + fmt(truth) + " +/- 0.08 over 20 trials"};
}

Verdict entropy_uniform() {
  std::mt19937_64 rng(1004);
  std::vector<double> est;
  for (int t = 0; t < 20; ++t) {
    est.push_back(metrics::differential_entropy(testsupport::uniform(2000, 2, rng), 4));
  }
  const double m = mean(est);
  return {std::abs(m) <= 0.08, "mean " + fmt(m) + " vs 0 +/- 0.08 over 20 trials"};
}

Verdict homogeneity() {
  std::mt19937_64 rng(1005);
  double worst = 0;
  for (std::size_t d : {2u, 5u}) {
    auto x = testsupport::gaussian(1500, d, rng);
    const double h = metrics::differential_entropy(x, 4);
    for (double a : {0.5, 2.0, 10.0}) {
      const double ha = metrics::differential_entropy(scaled(x, a), 4);
      const double expect = h + static_cast<double>(d) * std::log(a);
      worst = std::max(worst, std::abs(ha - expect) / std::max(1.0, std::abs(expect)));
    }
  }
  // Exact up to floating-point rounding of the scaled coordinates.
  return {worst <= 1e-10, "max relative deviation " + sci(worst) + " (<= 1e-10)"};
}

// --- oracle equivalence ----------------------------------------------------

Verdict backend_equivalence() {
  std::mt19937_64 rng(2001);
  const std::size_t dims[] = {2, 8, 12};
  std::size_t mismatches = 0;
  for (int f = 0; f < 50; ++f) {
    const std::size_t d = dims[f % 3];
    const std::size_t n = 50 + rng() % 951;
    const std::size_t m = 50 + rng() % 951;  // n + m <= 2000
    const std::size_t k = 1 + rng() % 8;
    auto x = testsupport::gaussian(n, d, rng);
    auto y = testsupport::gaussian(m, d, rng, std::vector<double>(d, 0.3));
    const double kl_t = metrics::kl_divergence(y, x, k, KnnBackend::kTree);
    const double kl_r = metrics::kl_divergence(y, x, k, KnnBackend::kReference);
    const double h_t = metrics::differential_entropy(x, k, KnnBackend::kTree);
    const double h_r = metrics::differential_entropy(x, k, KnnBackend::kReference);
    if (kl_t != kl_r || h_t != h_r) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + "/50 fixtures differ (KL and entropy)"};
}

// --- cluster orderings -----------------------------------------------------

struct Clusters {
  std::vector<std::vector<double>> centers;
  std::size_t dim;
};

EmbeddingMatrix draw(const Clusters& c, const std::vector<std::size_t>& which, std::size_t per,
                     std::mt19937_64& rng, const std::string& name) {
  std::normal_distribution<double> g(0.0, 0.35);
  EmbeddingMatrix m;
  m.dataset_name = name;
  m.model_id = "synthetic-clusters";
  std::vector<double> coords;
  for (auto ci : which) {
    for (std::size_t i = 0; i < per; ++i) {
      double ss = 0;
      std::vector<double> v(c.dim);
      for (std::size_t j = 0; j < c.dim; ++j) {
        v[j] = c.centers[ci][j] + g(rng);
        ss += v[j] * v[j];
      }
      for (auto& x : v) coords.push_back(x / std::sqrt(ss));
      m.ids.push_back(name + std::to_string(m.ids.size()));
    }
  }
  m.vectors = PointSet(c.dim, std::move(coords));
  m.unit_norm = true;
  return m;
}

Verdict cluster_orderings() {
  std::mt19937_64 rng(3001);
  Clusters c{{}, 64};
  std::normal_distribution<double> g;
  for (int i = 0; i < 7; ++i) {
    std::vector<double> v(c.dim);
    double ss = 0;
    for (auto& x : v) {
      x = g(rng);
      ss += x * x;
    }
    for (auto& x : v) x /= std::sqrt(ss);
    c.centers.push_back(v);
  }
  ProjectionConfig pc;
  pc.target_dim = 10;
  pc.runs = 1;
  std::vector<PointSet> mixture, single, member, disjoint;
  for (int run = 0; run < 10; ++run) {
    std::vector<EmbeddingMatrix> ms{draw(c, {0, 1, 2, 3, 4}, 200, rng, "mix"),
                                    draw(c, {5}, 1000, rng, "single"),
                                    draw(c, {0}, 200, rng, "member"),
                                    draw(c, {6}, 200, rng, "disjoint")};
    pc.seed = static_cast<std::uint64_t>(run);
    auto fam = project_jointly(ms, pc).front();
    mixture.push_back(fam[0].vectors);
    single.push_back(fam[1].vectors);
    member.push_back(fam[2].vectors);
    disjoint.push_back(fam[3].vectors);
  }
  auto hm = metrics::diversity_protocol(mixture, 150, 50, 4, 7);
  auto hs = metrics::diversity_protocol(single, 150, 50, 4, 7);
  auto kd = metrics::novelty_protocol(disjoint, mixture, 4);
  auto km = metrics::novelty_protocol(member, mixture, 4);
  const bool entropy_ok = hm.value - hm.ci95 > hs.value + hs.ci95;
  const bool kl_ok = kd.value - kd.ci95 > km.value + km.ci95;
  return {entropy_ok && kl_ok,
          "entropy mixture " + fmt(hm.value) + "+/-" + fmt(hm.ci95) + " vs single " +
              fmt(hs.value) + "+/-" + fmt(hs.ci95) + "; KL disjoint " + fmt(kd.value) + "+/-" +
              fmt(kd.ci95) + " vs member " + fmt(km.value) + "+/-" + fmt(km.ci95)};
}

// --- dedup -----------------------------------------------------------------

ProblemRecord rec(std::string id, std::string statement) {
  ProblemRecord r;
  r.id = std::move(id);
  r.statement = std::move(statement);
  return r;
}

Verdict dedup_recall() {
  int flagged = 0;
  bool exact_ok = true;
  std::size_t false_merges = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(4000 + seed);
    DatasetManifest m;
    std::uniform_int_distribution<std::size_t> len(20, 40);
    for (int i = 0; i < 494; ++i) {
      m.records.push_back(rec("r" + std::to_string(i),
                              testsupport::join_words(testsupport::random_words(len(rng), rng))));
    }
    // 47 words give 45 grams; 5 more words give 50: J = 0.9.
    auto base = testsupport::random_words(47, rng);
    auto plus = base;
    for (auto& w : testsupport::random_words(5, rng)) plus.push_back(w);
    m.records.push_back(rec("near-a", testsupport::join_words(base)));
    m.records.push_back(rec("near-b", testsupport::join_words(plus)));
    // 37 words give 35 grams; 15 more give 50: J = 0.7, must survive.
    auto low = testsupport::random_words(37, rng);
    auto low_plus = low;
    for (auto& w : testsupport::random_words(15, rng)) low_plus.push_back(w);
    m.records.push_back(rec("low-a", testsupport::join_words(low)));
    m.records.push_back(rec("low-b", testsupport::join_words(low_plus)));
    m.records.push_back(rec("exact-a", m.records[7].statement));
    m.records.push_back(rec("exact-b", m.records[100].statement));
    std::shuffle(m.records.begin(), m.records.end(), rng);

    dedup::DedupConfig cfg;
    cfg.seed = seed;
    auto res = dedup::deduplicate(m, cfg);
    std::map<std::string, std::string> by_id;
    for (const auto& r : m.records) by_id[r.id] = r.statement;
    std::set<std::string> dropped;
    for (const auto& p : res.removed) {
      dropped.insert(p.dropped);
      const double truth =
          testsupport::set_jaccard(testsupport::word_grams(by_id[p.kept], 3),
                                   testsupport::word_grams(by_id[p.dropped], 3));
      if (truth < 0.75) ++false_merges;
    }
    if (dropped.count("near-a") || dropped.count("near-b")) ++flagged;
    const bool e7 = dropped.count("exact-a") || dropped.count("r7");
    const bool e100 = dropped.count("exact-b") || dropped.count("r100");
    exact_ok = exact_ok && e7 && e100;
  }
  return {flagged >= 19 && exact_ok && false_merges == 0,
          "planted J=0.9 pair flagged in " + std::to_string(flagged) +
              "/20 seeds (>= 19); exact duplicates " + (exact_ok ? "always" : "not always") +
              " removed; " + std::to_string(false_merges) + " merges below J=0.75"};
}

// --- k-FN ------------------------------------------------------------------

std::vector<double> random_unit(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(d);
  double n = 0;
  for (auto& x : v) {
    x = g(rng);
    n += x * x;
  }
  for (auto& x : v) x /= std::sqrt(n);
  return v;
}

// Every size-`keep` subset, minimizing the summed nearest-reference cosine.
std::vector<std::size_t> brute_force_kfn(const std::vector<std::vector<double>>& cand,
                                         const std::vector<std::vector<double>>& ref,
                                         std::size_t keep) {
  const std::size_t n = cand.size();
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -2;
    for (const auto& r : ref) {
      double dot = 0;
      for (std::size_t j = 0; j < r.size(); ++j) dot += cand[i][j] * r[j];
      best = std::max(best, dot);
    }
    score[i] = best;
  }
  std::vector<std::size_t> best_set, set;
  double best_total = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, double)> rec_search = [&](std::size_t from, double total) {
    if (set.size() == keep) {
      if (total < best_total) {
        best_total = total;
        best_set = set;
      }
      return;
    }
    for (std::size_t i = from; i + (keep - set.size()) <= n; ++i) {
      set.push_back(i);
      rec_search(i + 1, total + score[i]);
      set.pop_back();
    }
  };
  rec_search(0, 0.0);
  return best_set;
}

Verdict kfn_equivalence() {
  std::mt19937_64 rng(5001);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 19;
    const std::size_t keep = 1 + rng() % n;
    const std::size_t d = 2 + rng() % 10;
    std::vector<std::vector<double>> cand, ref;
    for (std::size_t i = 0; i < n; ++i) cand.push_back(random_unit(d, rng));
    for (std::size_t i = 0, r = 1 + rng() % 20; i < r; ++i) ref.push_back(random_unit(d, rng));
    if (kfn_select(cand, ref, keep) != brute_force_kfn(cand, ref, keep)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + "/100 trials differ from brute force"};
}

// --- pipeline determinism --------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict pipeline_determinism() {
  const auto config_path = std::filesystem::path(BENCHSYNTH_SOURCE_DIR) / "configs/mock.config";
  testsupport::TempDir dir("acceptance-pipeline");
  const auto seeds = testsupport::seed_dataset(12);
  std::vector<std::string> manifests, reports;
  PipelineResult last;
  for (int rep = 0; rep < 3; ++rep) {
    auto cfg = Config::load(config_path);
    PipelineServices services;
    auto settings = PipelineSettings::from_config(cfg, services);
    const auto& g = settings.generation;
    if (g.total != 40 || g.colonies != 2 || g.seed_sample != 10 || g.feedback_iterations != 3) {
      return {false, "mock config does not match N=40, N_c=2, B_s=10, N_it=3"};
    }
    last = run_pipeline(settings, seeds, services);
    const auto out = dir / ("run" + std::to_string(rep)) / "mock.jsonl";
    write_pipeline_outputs(last, out, true);
    if (!std::filesystem::exists(out.string() + ".meta.json")) {
      return {false, "manifest meta file missing"};
    }
    manifests.push_back(slurp(out) + slurp(out.string() + ".meta.json") +
                        slurp(sibling(out, "prefilter.jsonl")) +
                        slurp(sibling(out, "failed.jsonl")));
    reports.push_back(slurp(sibling(out, "report.json")));
  }
  const bool identical = manifests[0] == manifests[1] && manifests[1] == manifests[2] &&
                         reports[0] == reports[1] && reports[1] == reports[2];

  // A problem that failed verification and later served as a parent.
  std::map<std::string, const ProblemRecord*> by_id;
  for (const auto& r : last.prefilter.records) by_id[r.id] = &r;
  std::size_t reused_failures = 0, failures_total = 0;
  for (const auto& r : last.prefilter.records) {
    if (r.status != Status::kPassing) ++failures_total;
    for (const auto& p : r.parents) {
      auto it = by_id.find(p);
      if (it != by_id.end() && it->second->status != Status::kPassing &&
          it->second->iteration < r.iteration) {
        ++reused_failures;
      }
    }
  }

  const auto& rep = last.report;
  const auto generated = rep["generated"].get<std::size_t>();
  const auto passing = rep["passing"].get<std::size_t>();
  const auto filtered = rep["filtered"].get<std::size_t>();
  double tests = 0;
  for (const auto& r : last.final_manifest.records) tests += r.test_count;
  const double avg = last.final_manifest.records.empty()
                         ? 0.0
                         : tests / static_cast<double>(last.final_manifest.records.size());
  std::size_t cat_sum = 0;
  for (const auto& [k, v] : rep["categories"].items()) cat_sum += v.get<std::size_t>();
  const bool ledger = generated == last.prefilter.records.size() &&
                      generated == filtered + passing &&
                      passing == last.final_manifest.records.size() && cat_sum == generated &&
                      std::abs(rep["avg_tests"].get<double>() - avg) < 1e-12 &&
                      rep["after_dedup"].get<std::size_t>() +
                              rep["operations"]["final_dedup_removed"].get<std::size_t>() ==
                          generated;
  return {identical && reused_failures > 0 && ledger,
          std::string("3 runs ") + (identical ? "byte-identical" : "DIFFER") + "; " +
              std::to_string(reused_failures) + " children of " + std::to_string(failures_total) +
              " non-passing problems; ledger generated " + std::to_string(generated) +
              " = passing " + std::to_string(passing) + " + filtered " + std::to_string(filtered) +
              ", avg tests " + fmt(rep["avg_tests"].get<double>(), 2) +
              (ledger ? " consistent" : " INCONSISTENT")};
}

// --- feedback loop ---------------------------------------------------------

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

Verdict feedback_contract() {
  ProblemRecord p = rec("p1", "Write a function that adds two numbers.");
  sandbox::StubSandbox sb;
  Gateway fix(ScriptedProvider::parse(rules_json(
      {{"solution", testsupport::tagged(std::string(sandbox::kFailMarker))},
       {"feedback", testsupport::tagged()}})));
  auto a = feedback_loop(p, fix, sb, VerifyOptions{});
  Gateway once(ScriptedProvider::parse(rules_json({{"solution", testsupport::tagged()}})));
  auto b = feedback_loop(p, once, sb, VerifyOptions{});
  const bool ok = a.category == Status::kPassing && a.attempts_used == 2 &&
                  fix.totals().calls == 2 && b.category == Status::kPassing &&
                  b.attempts_used == 1 && once.totals().calls == 1;
  return {ok, "fail-then-fix: " + std::string(to_string(a.category)) + ", attempts " +
                  std::to_string(a.attempts_used) + ", calls " +
                  std::to_string(fix.totals().calls) + "; all-pass: " +
                  std::string(to_string(b.category)) + ", calls " +
                  std::to_string(once.totals().calls)};
}

// --- sweep stability -------------------------------------------------------

DatasetManifest vocab_dataset(const std::string& name, const std::vector<std::string>& words,
                              std::size_t count, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  DatasetManifest m;
  m.name = name;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<std::string> w;
    for (int j = 0; j < 10; ++j) w.push_back(words[pick(rng)]);
    m.records.push_back(rec(name + "-" + std::to_string(i), testsupport::join_words(w)));
  }
  return m;
}

Verdict sweep_stability() {
  std::mt19937_64 rng(6001);
  const auto base_vocab = testsupport::random_words(60, rng);
  auto near_vocab = base_vocab;
  for (std::size_t i = 0; i < near_vocab.size(); i += 3) {
    near_vocab[i] = testsupport::random_words(1, rng)[0];
  }
  const auto far_vocab = testsupport::random_words(60, rng);
  std::vector<DatasetManifest> ds{vocab_dataset("far", far_vocab, 300, rng),
                                  vocab_dataset("near", near_vocab, 300, rng),
                                  vocab_dataset("baseline", base_vocab, 300, rng)};
  HashEmbeddingProvider embed(96, 3);
  analysis::EmbeddingSource src{&embed, {}};
  analysis::MeasureSpec spec;
  spec.projection.runs = 10;
  const std::vector<double> ks{2, 4, 8, 16};
  std::size_t cells = 0, inversions = 0;
  std::string detail;
  for (std::size_t nn : {30u, 80u}) {
    spec.projection.n_neighbors = nn;
    auto rows = analysis::sweep(analysis::SweepParam::kK, ks, "novelty", ds, src, spec);
    std::map<double, std::map<std::string, double>> grid;
    for (const auto& r : rows) grid[r.param_value][r.dataset] = r.value;
    for (const auto& [k, v] : grid) {
      ++cells;
      if (!(v.at("far") > v.at("near"))) ++inversions;
      if (k == 4 && nn == 80) {
        detail = "at k=4, n-neighbors=80: far " + fmt(v.at("far")) + " > near " + fmt(v.at("near"));
      }
    }
  }
  return {cells == 8 && inversions == 0,
          std::to_string(inversions) + " inversions over " + std::to_string(cells) +
              " (k, n-neighbors) cells; " + detail};
}

}  // namespace

int main() {
  report("estimator KL shifted Gaussian", kl_gaussian_shift);
  report("estimator KL null", kl_null);
  report("estimator entropy Gaussian", entropy_gaussian);
  report("estimator entropy uniform", entropy_uniform);
  report("estimator homogeneity", homogeneity);
  report("oracle equivalence tree vs all-pairs", backend_equivalence);
  report("cluster orderings", cluster_orderings);
  report("dedup recall and precision", dedup_recall);
  report("k-FN vs brute force", kfn_equivalence);
  report("pipeline determinism and ledger", pipeline_determinism);
  report("feedback-loop contract", feedback_contract);
  report("sweep stability", sweep_stability);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
