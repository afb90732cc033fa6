#include <doctest.h>

#include <atomic>
#include <cmath>

#include "benchsynth/common/config.hpp"
#include "benchsynth/embedding.hpp"
#include "support/sampling.hpp"

using namespace benchsynth;

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

class CountingProvider : public EmbeddingProvider {
 public:
  explicit CountingProvider(int failures = 0) : failures_(failures) {}
  std::string model_id() const override { return "counting"; }
  std::size_t dim() const override { return 3; }
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
    ++calls;
    if (failures_-- > 0) throw ExternalError("flaky");
    std::vector<std::vector<double>> out;
    for (const auto& t : texts) out.push_back({static_cast<double>(t.size()), 0.0, 0.0});
    return out;
  }
  std::atomic<int> calls{0};

 private:
  std::atomic<int> failures_;
};

DatasetManifest dataset(std::vector<std::string> statements) {
  DatasetManifest m;
  m.name = "d";
  for (std::size_t i = 0; i < statements.size(); ++i) {
    ProblemRecord r;
    r.id = "p" + std::to_string(i);
    r.statement = statements[i];
    m.records.push_back(r);
  }
  return m;
}

}  // namespace

TEST_CASE("normalize scales rows to unit length") {
  EmbeddingMatrix m;
  m.ids = {"a"};
  m.vectors = knn::PointSet(2, {3.0, 4.0});
  auto n = normalize(m);
  CHECK(n.vectors.row(0)[0] == doctest::Approx(0.6));
  CHECK(n.vectors.row(0)[1] == doctest::Approx(0.8));
  CHECK(n.unit_norm);
  m.ids = {"zero"};
  m.vectors = knn::PointSet(2, {0.0, 0.0});
  try {
    normalize(m);
    FAIL("expected DegenerateInputError");
  } catch (const DegenerateInputError& e) {
    CHECK(std::string(e.what()).find("zero") != std::string::npos);
  }
}

TEST_CASE("hash provider is deterministic and token based") {
  HashEmbeddingProvider p(64, 1);
  std::vector<std::string> texts{"sort a list of integers", "Sort a list of integers!",
                                 "sort a list of strings", "compute graph shortest paths"};
  auto v = p.embed(texts);
  CHECK(v[0] == v[1]);
  CHECK(dot(v[0], v[0]) == doctest::Approx(1.0));
  CHECK(dot(v[0], v[2]) > dot(v[0], v[3]));
  CHECK(v == HashEmbeddingProvider(64, 1).embed(texts));
  CHECK(v != HashEmbeddingProvider(64, 2).embed(texts));
}

TEST_CASE("embed_dataset keeps row order and uses the cache") {
  testsupport::TempDir dir("emb");
  EmbeddingCache cache(dir.path());
  CountingProvider p;
  EmbedOptions o;
  o.cache = &cache;
  o.batch_size = 2;
  auto m = embed_dataset(dataset({"a", "bbb", "cc"}), p, o);
  CHECK(m.ids == std::vector<std::string>{"p0", "p1", "p2"});
  CHECK(m.rows() == 3);
  CHECK(m.vectors.row(1)[0] == doctest::Approx(1.0));
  CHECK(p.calls == 2);
  auto again = embed_dataset(dataset({"a", "bbb", "cc"}), p, o);
  CHECK(p.calls == 2);
  CHECK(again.vectors.coords() == m.vectors.coords());
  CHECK(EmbeddingCache::key("m", "x") != EmbeddingCache::key("n", "x"));
}

TEST_CASE("transient provider failures are retried") {
  CountingProvider flaky(2);
  EmbedOptions o;
  o.backoff_ms = 1;
  o.max_retries = 3;
  CHECK_NOTHROW(embed_dataset(dataset({"x", "y"}), flaky, o));
  CountingProvider dead(100);
  o.max_retries = 1;
  try {
    embed_dataset(dataset({"x", "y"}), dead, o);
    FAIL("expected EmbeddingError");
  } catch (const EmbeddingError& e) {
    CHECK(e.failed_ids() == std::vector<std::string>{"p0", "p1"});
  }
}

TEST_CASE("empty statements are rejected") {
  CountingProvider p;
  CHECK_THROWS_AS(embed_dataset(dataset({"ok", ""}), p), DataError);
}

TEST_CASE("provider factory") {
  auto c = Config::parse("[embedding]\nprovider = hash\ndim = 16\nseed = 3\n");
  auto p = make_embedding_provider(c);
  CHECK(p->dim() == 16);
  CHECK(p->model_id() == "hash-16-3");
  CHECK_THROWS_AS(make_embedding_provider(Config::parse("[embedding]\nprovider = magic\n")), ConfigError);
  CHECK_THROWS_AS(make_embedding_provider(Config::parse("[embedding]\nprovider = http\n")), ConfigError);
}
