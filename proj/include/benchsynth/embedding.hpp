#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "benchsynth/common/errors.hpp"
#include "benchsynth/corpus.hpp"
#include "benchsynth/knn/point_set.hpp"

namespace benchsynth {

class Config;

// Row-aligned embedding vectors for one dataset under one model.
struct EmbeddingMatrix {
  std::string dataset_name;
  std::string model_id;
  std::vector<std::string> ids;
  knn::PointSet vectors;
  bool unit_norm = false;

  std::size_t dim() const { return vectors.dim(); }
  std::size_t rows() const { return ids.size(); }
};

class EmbeddingError : public ExternalError {
 public:
  EmbeddingError(const std::string& what, std::vector<std::string> failed_ids)
      : ExternalError(what), failed_ids_(std::move(failed_ids)) {}
  const std::vector<std::string>& failed_ids() const { return failed_ids_; }

 private:
  std::vector<std::string> failed_ids_;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string model_id() const = 0;
  virtual std::size_t dim() const = 0;
  // One vector per input text, in order. Throws ExternalError on failure.
  virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
};

// Offline deterministic provider. Each lower-cased alphanumeric token maps
// to a seeded Gaussian vector; a statement embeds to the normalized sum, so
// identical statements get identical vectors and shared vocabulary raises
// cosine similarity.
class HashEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::size_t dim = 768, std::uint64_t seed = 0);
  std::string model_id() const override;
  std::size_t dim() const override { return dim_; }
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

struct HttpEmbeddingOptions {
  std::string endpoint;       // full URL; POST body is a JSON array of strings
  std::string model_id = "all-mpnet-base-v2";
  std::size_t dim = 768;
  std::string auth_env;       // env var holding a bearer token, optional
  int timeout_s = 60;
};

// Remote endpoint: request body is a JSON list of strings, response body a
// JSON list of float arrays.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(HttpEmbeddingOptions options);
  std::string model_id() const override { return options_.model_id; }
  std::size_t dim() const override { return options_.dim; }
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

 private:
  HttpEmbeddingOptions options_;
};

// Content-addressed on-disk cache: <dir>/<2 hex>/<sha256(model, text)>.f64
// holding raw little-endian doubles. Distinct keys may be read and written
// concurrently; writes go through a temp file and rename.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path dir);
  static std::string key(std::string_view model_id, std::string_view text);
  std::optional<std::vector<double>> get(const std::string& key, std::size_t dim) const;
  void put(const std::string& key, std::span<const double> vector) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& key) const;
  std::filesystem::path dir_;
};

struct EmbedOptions {
  std::size_t batch_size = 32;
  std::size_t max_in_flight = 4;
  int max_retries = 3;
  int backoff_ms = 200;
  const EmbeddingCache* cache = nullptr;
};

// One L2-normalized vector per record, cached by (statement, model).
EmbeddingMatrix embed_dataset(const DatasetManifest& manifest, EmbeddingProvider& provider,
                              const EmbedOptions& options = {});

// Embeds free-standing texts through the same cache/retry path.
std::vector<std::vector<double>> embed_texts(std::span<const std::string> texts,
                                             EmbeddingProvider& provider,
                                             const EmbedOptions& options = {});

// Scales every row to unit L2 norm. Throws DegenerateInputError naming the
// first zero row.
EmbeddingMatrix normalize(EmbeddingMatrix matrix);

// Builds a provider from the [embedding] section: provider = hash|http.
std::unique_ptr<EmbeddingProvider> make_embedding_provider(const Config& config);

// Provider plus batching and cache settings from [embedding]
// (batch_size, max_in_flight, cache_dir).
struct EmbeddingSetup {
  std::unique_ptr<EmbeddingProvider> provider;
  std::unique_ptr<EmbeddingCache> cache;
  EmbedOptions options;
};
EmbeddingSetup embedding_setup(const Config& config);

}  // namespace benchsynth
