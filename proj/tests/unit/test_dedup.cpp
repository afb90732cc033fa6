#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "benchsynth/common/errors.hpp"
#include "benchsynth/dedup.hpp"
#include "support/sampling.hpp"
#include "support/statements.hpp"

using namespace benchsynth;
using namespace benchsynth::dedup;

namespace {

ProblemRecord rec(std::string id, std::string statement) {
  ProblemRecord r;
  r.id = std::move(id);
  r.statement = std::move(statement);
  return r;
}

}  // namespace

TEST_CASE("shingles are normalized word 3-grams") {
  auto s = shingle("Return the SUM, of a list!", 3);
  CHECK(s == ShingleSet{"of a list", "return the sum", "sum of a", "the sum of"});
  CHECK(shingle("two words", 3) == ShingleSet{"two words"});
  CHECK(shingle("a b a b a b", 2).size() == 2);
  std::mt19937_64 rng(2);
  for (std::size_t n : {1u, 3u, 10u, 40u}) {
    auto words = testsupport::random_words(n, rng);
    CHECK(shingle(testsupport::join_words(words), 3).size() == std::max<std::size_t>(1, n >= 3 ? n - 2 : 1));
  }
}

TEST_CASE("jaccard matches a set oracle") {
  std::mt19937_64 rng(8);
  auto words = testsupport::random_words(40, rng);
  auto a = testsupport::join_words(words);
  words[20] = "zzzz";
  auto b = testsupport::join_words(words);
  CHECK(jaccard(shingle(a, 3), shingle(b, 3)) ==
        doctest::Approx(testsupport::set_jaccard(testsupport::word_grams(a, 3), testsupport::word_grams(b, 3))));
}

TEST_CASE("minhash agreement estimates jaccard") {
  // 40 shared grams, 5 private to each side: J = 40/50 = 0.8.
  ShingleSet a;
  ShingleSet b;
  for (int i = 0; i < 40; ++i) {
    a.push_back("s" + std::to_string(i));
    b.push_back("s" + std::to_string(i));
  }
  for (int i = 0; i < 5; ++i) {
    a.push_back("a" + std::to_string(i));
    b.push_back("b" + std::to_string(i));
  }
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    sum += agreement(signature(a, 250, seed), signature(b, 250, seed));
  }
  CHECK(std::abs(sum / 50 - 0.8) < 0.06);

  ShingleSet c{"x1", "x2", "x3", "x4"};
  ShingleSet d{"y1", "y2", "y3", "y4"};
  CHECK(agreement(signature(c, 250, 3), signature(d, 250, 3)) < 0.05);
  CHECK(signature(a, 250, 1).values == signature(a, 250, 1).values);
  CHECK_THROWS_AS(signature({}, 10, 0), DataError);
}

TEST_CASE("deduplicate keeps the earlier of a near-duplicate pair") {
  std::mt19937_64 rng(5);
  DatasetManifest m;
  m.name = "d";
  auto base = testsupport::random_words(60, rng);
  auto extended = base;
  for (auto& w : testsupport::random_words(6, rng)) extended.push_back(w);
  m.records.push_back(rec("a", testsupport::join_words(base)));
  m.records.push_back(rec("b", testsupport::join_words(testsupport::random_words(30, rng))));
  m.records.push_back(rec("c", testsupport::join_words(extended)));
  m.records.push_back(rec("d", testsupport::join_words(base)));
  auto res = deduplicate(m);
  REQUIRE(res.retained.records.size() == 2);
  CHECK(res.retained.records[0].id == "a");
  CHECK(res.retained.records[1].id == "b");
  REQUIRE(res.removed.size() == 2);
  CHECK(res.removed[0].kept == "a");
  CHECK(res.removed[0].dropped == "c");
  CHECK(res.removed[0].jaccard == doctest::Approx(58.0 / 64.0));
  CHECK(res.removed[1].dropped == "d");
  CHECK(res.removed[1].jaccard == 1.0);
}

TEST_CASE("pairs below the threshold survive") {
  std::mt19937_64 rng(6);
  auto base = testsupport::random_words(30, rng);
  auto other = base;
  // Replacing every fifth word leaves J well below 0.75.
  for (std::size_t i = 0; i < other.size(); i += 5) other[i] = "q" + other[i];
  DatasetManifest m;
  m.records.push_back(rec("a", testsupport::join_words(base)));
  m.records.push_back(rec("b", testsupport::join_words(other)));
  CHECK(deduplicate(m).retained.records.size() == 2);
}

TEST_CASE("index and config validation") {
  DedupConfig bad;
  bad.bands = 7;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  NearDuplicateIndex idx;
  CHECK_FALSE(idx.insert_if_novel("x", "find the longest common prefix of a list of strings"));
  auto dup = idx.insert_if_novel("y", "Find the longest common prefix of a list of strings.");
  REQUIRE(dup);
  CHECK(idx.id(dup->accepted_index) == "x");
  CHECK(dup->band_hits == 25);
  CHECK(idx.size() == 1);
}

TEST_CASE("removal log is JSONL") {
  testsupport::TempDir dir("dedup");
  std::vector<RemovedPair> removed{{"a", "b", 0.9, 3}};
  write_removal_log(removed, dir / "r.jsonl");
  std::ifstream in(dir / "r.jsonl");
  std::string line;
  std::getline(in, line);
  CHECK(line == R"({"kept":"a","dropped":"b","jaccard":0.9,"band_hits":3})");
}
