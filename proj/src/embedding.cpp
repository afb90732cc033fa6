#include "benchsynth/embedding.hpp"

#include <httplib.h>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <random>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "benchsynth/common/config.hpp"
#include "benchsynth/common/digest.hpp"

namespace benchsynth {
namespace {

std::vector<std::string> tokens_of(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::exchange(cur, {}));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void normalize_in_place(std::span<double> v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  if (ss == 0.0 || !std::isfinite(ss)) throw DegenerateInputError("zero embedding vector");
  const double norm = std::sqrt(ss);
  for (double& x : v) x /= norm;
}

struct SplitUrl {
  std::string origin;
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  auto scheme = url.find("://");
  auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

HashEmbeddingProvider::HashEmbeddingProvider(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
}

std::string HashEmbeddingProvider::model_id() const {
  return "hash-" + std::to_string(dim_) + "-" + std::to_string(seed_);
}

std::vector<std::vector<double>> HashEmbeddingProvider::embed(
    std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    auto toks = tokens_of(text);
    if (toks.empty()) toks.push_back(text);
    std::vector<double> v(dim_, 0.0);
    for (const auto& t : toks) {
      std::mt19937_64 rng(derive_seed(seed_, fnv1a64(t)));
      std::normal_distribution<double> gauss;
      for (auto& x : v) x += gauss(rng);
    }
    normalize_in_place(v);
    out.push_back(std::move(v));
  }
  return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEmbeddingOptions options)
    : options_(std::move(options)) {
  if (options_.endpoint.empty()) throw ConfigError("embedding endpoint is required");
}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed(
    std::span<const std::string> texts) {
  auto [origin, path] = split_url(options_.endpoint);
  httplib::Client client(origin);
  client.set_read_timeout(options_.timeout_s, 0);
  client.set_connection_timeout(options_.timeout_s, 0);
  httplib::Headers headers;
  if (!options_.auth_env.empty()) {
    if (const char* token = std::getenv(options_.auth_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  nlohmann::json body = std::vector<std::string>(texts.begin(), texts.end());
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) {
    throw ExternalError("embedding request failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw ExternalError("embedding endpoint returned HTTP " + std::to_string(res->status));
  }
  auto parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (!parsed.is_array() || parsed.size() != texts.size()) {
    throw ExternalError("embedding response is not a list of " + std::to_string(texts.size()) +
                        " vectors");
  }
  std::vector<std::vector<double>> out;
  for (const auto& row : parsed) {
    auto v = row.get<std::vector<double>>();
    if (v.size() != options_.dim) {
      throw ExternalError("embedding dimension " + std::to_string(v.size()) + " != configured " +
                          std::to_string(options_.dim));
    }
    out.push_back(std::move(v));
  }
  return out;
}

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::string EmbeddingCache::key(std::string_view model_id, std::string_view text) {
  std::string material(model_id);
  material.push_back('\0');
  material.append(text);
  return sha256_hex(material);
}

std::filesystem::path EmbeddingCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".f64");
}

std::optional<std::vector<double>> EmbeddingCache::get(const std::string& key,
                                                       std::size_t dim) const {
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return std::nullopt;
  std::vector<double> v(dim);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(dim * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(dim * sizeof(double))) return std::nullopt;
  if (in.peek() != std::char_traits<char>::eof()) return std::nullopt;
  return v;
}

void EmbeddingCache::put(const std::string& key, std::span<const double> vector) const {
  auto path = path_for(key);
  std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(vector.data()),
              static_cast<std::streamsize>(vector.size() * sizeof(double)));
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::vector<double>> embed_texts(std::span<const std::string> texts,
                                             EmbeddingProvider& provider,
                                             const EmbedOptions& options) {
  const std::size_t dim = provider.dim();
  const std::string model = provider.model_id();
  std::vector<std::vector<double>> out(texts.size());
  std::vector<std::size_t> misses;
  std::vector<std::string> keys(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) throw DataError("cannot embed an empty statement");
    if (options.cache) {
      keys[i] = EmbeddingCache::key(model, texts[i]);
      if (auto hit = options.cache->get(keys[i], dim)) {
        out[i] = std::move(*hit);
        continue;
      }
    }
    misses.push_back(i);
  }

  const std::size_t batch = std::max<std::size_t>(options.batch_size, 1);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b < misses.size(); b += batch) {
    batches.emplace_back(misses.begin() + static_cast<std::ptrdiff_t>(b),
                         misses.begin() + static_cast<std::ptrdiff_t>(std::min(b + batch, misses.size())));
  }

  auto run_batch = [&](const std::vector<std::size_t>& idx) -> std::string {
    std::vector<std::string> chunk;
    for (auto i : idx) chunk.push_back(texts[i]);
    std::string last_error;
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
      if (attempt > 0 && options.backoff_ms > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(options.backoff_ms << (attempt - 1)));
      }
      try {
        auto vecs = provider.embed(chunk);
        if (vecs.size() != chunk.size()) throw ExternalError("provider returned wrong row count");
        for (std::size_t j = 0; j < idx.size(); ++j) {
          if (vecs[j].size() != dim) throw ExternalError("provider returned wrong dimension");
          if (options.cache) options.cache->put(keys[idx[j]], vecs[j]);
          out[idx[j]] = std::move(vecs[j]);
        }
        return {};
      } catch (const std::exception& e) {
        last_error = e.what();
      }
    }
    return last_error;
  };

  std::vector<std::string> failed;
  std::string first_error;
  const std::size_t wave = std::max<std::size_t>(options.max_in_flight, 1);
  for (std::size_t b = 0; b < batches.size(); b += wave) {
    std::vector<std::future<std::string>> pending;
    for (std::size_t j = b; j < std::min(b + wave, batches.size()); ++j) {
      pending.push_back(std::async(std::launch::async, run_batch, std::cref(batches[j])));
    }
    for (std::size_t j = 0; j < pending.size(); ++j) {
      auto err = pending[j].get();
      if (!err.empty()) {
        if (first_error.empty()) first_error = err;
        for (auto i : batches[b + j]) failed.push_back(std::to_string(i));
      }
    }
  }
  if (!failed.empty()) {
    throw EmbeddingError("embedding failed after retries: " + first_error, failed);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    try {
      normalize_in_place(out[i]);
    } catch (const DegenerateInputError&) {
      throw DegenerateInputError("zero embedding vector for text #" + std::to_string(i));
    }
  }
  return out;
}

EmbeddingMatrix embed_dataset(const DatasetManifest& manifest, EmbeddingProvider& provider,
                              const EmbedOptions& options) {
  EmbeddingMatrix m;
  m.dataset_name = manifest.name;
  m.model_id = provider.model_id();
  std::vector<std::string> texts;
  for (const auto& r : manifest.records) {
    m.ids.push_back(r.id);
    texts.push_back(r.statement);
  }
  std::vector<std::vector<double>> vecs;
  try {
    vecs = embed_texts(texts, provider, options);
  } catch (const EmbeddingError& e) {
    std::vector<std::string> ids;
    for (const auto& i : e.failed_ids()) ids.push_back(m.ids[std::stoul(i)]);
    throw EmbeddingError(e.what(), ids);
  }
  std::vector<double> coords;
  coords.reserve(vecs.size() * provider.dim());
  for (const auto& v : vecs) coords.insert(coords.end(), v.begin(), v.end());
  m.vectors = knn::PointSet(provider.dim(), std::move(coords));
  if (m.rows() == 0) m.vectors = knn::PointSet(provider.dim(), {});
  m.unit_norm = true;
  return m;
}

EmbeddingMatrix normalize(EmbeddingMatrix matrix) {
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    auto row = matrix.vectors.row(i);
    double ss = 0.0;
    for (double x : row) ss += x * x;
    if (ss == 0.0 || !std::isfinite(ss)) {
      throw DegenerateInputError("cannot normalize zero vector for id " + matrix.ids[i]);
    }
    const double norm = std::sqrt(ss);
    for (double& x : row) x /= norm;
  }
  matrix.unit_norm = true;
  return matrix;
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const Config& config) {
  auto kind = config.get_string("embedding", "provider", "hash");
  auto dim = static_cast<std::size_t>(config.get_int("embedding", "dim", 768));
  if (kind == "hash") {
    auto seed = static_cast<std::uint64_t>(config.get_int("embedding", "seed", 0));
    return std::make_unique<HashEmbeddingProvider>(dim, seed);
  }
  if (kind == "http") {
    HttpEmbeddingOptions o;
    o.endpoint = config.get_string("embedding", "endpoint", "");
    o.model_id = config.get_string("embedding", "model", o.model_id);
    o.dim = dim;
    o.auth_env = config.get_string("embedding", "auth_env", "");
    o.timeout_s = static_cast<int>(config.get_int("embedding", "timeout_s", 60));
    return std::make_unique<HttpEmbeddingProvider>(o);
  }
  throw ConfigError("unknown embedding provider: " + kind);
}

EmbeddingSetup embedding_setup(const Config& config) {
  EmbeddingSetup s;
  s.provider = make_embedding_provider(config);
  const auto batch = config.get_int("embedding", "batch_size", 32);
  const auto in_flight = config.get_int("embedding", "max_in_flight", 4);
  if (batch < 1 || in_flight < 1) {
    throw ConfigError("embedding.batch_size and embedding.max_in_flight must be >= 1");
  }
  s.options.batch_size = static_cast<std::size_t>(batch);
  s.options.max_in_flight = static_cast<std::size_t>(in_flight);
  if (auto dir = config.get("embedding", "cache_dir"); dir && !dir->empty()) {
    s.cache = std::make_unique<EmbeddingCache>(*dir);
    s.options.cache = s.cache.get();
  }
  return s;
}

}  // namespace benchsynth
