#include "benchsynth/projection.hpp"

#include <Eigen/Dense>

#include <fstream>
#include <future>
#include <map>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "benchsynth/common/subprocess.hpp"

namespace benchsynth {
namespace {

knn::PointSet stack(std::span<const EmbeddingMatrix> matrices) {
  knn::PointSet all(matrices.front().dim(), {});
  for (const auto& m : matrices) {
    for (std::size_t i = 0; i < m.rows(); ++i) all.push_back(m.vectors.row(i));
  }
  return all;
}

std::vector<EmbeddingMatrix> split(const knn::PointSet& reduced,
                                   std::span<const EmbeddingMatrix> matrices,
                                   const std::string& model_suffix) {
  std::vector<EmbeddingMatrix> out;
  std::size_t offset = 0;
  for (const auto& m : matrices) {
    EmbeddingMatrix part;
    part.dataset_name = m.dataset_name;
    part.model_id = m.model_id + model_suffix;
    part.ids = m.ids;
    std::vector<double> coords(reduced.coords().begin() + static_cast<std::ptrdiff_t>(offset * reduced.dim()),
                               reduced.coords().begin() +
                                   static_cast<std::ptrdiff_t>((offset + m.rows()) * reduced.dim()));
    part.vectors = knn::PointSet(reduced.dim(), std::move(coords));
    offset += m.rows();
    out.push_back(normalize(std::move(part)));
  }
  return out;
}

knn::PointSet run_external(const knn::PointSet& points, const ProjectionConfig& config,
                           std::uint64_t run_seed) {
  nlohmann::json request;
  auto& rows = request["points"] = nlohmann::json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto r = points.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  request["n_neighbors"] = config.n_neighbors;
  request["min_dist"] = config.min_dist;
  request["dim"] = config.target_dim;
  request["seed"] = run_seed;

  ProcessResult result;
  try {
    result = run_process(split_command(config.reducer_command), request.dump());
  } catch (const ExternalError& e) {
    throw ExternalError(std::string(e.what()) +
                        "; external reducer unavailable, use method linear-pca or "
                        "precomputed-import instead");
  }
  if (result.exit_code != 0) {
    throw ExternalError("external reducer exited with code " + std::to_string(result.exit_code) +
                        "; use method linear-pca or precomputed-import instead");
  }
  auto reply = nlohmann::json::parse(result.output, nullptr, false);
  if (!reply.is_object() || !reply.contains("points") || !reply["points"].is_array()) {
    throw ExternalError("external reducer reply lacks a points array");
  }
  if (reply["points"].size() != points.size()) {
    throw ExternalError("external reducer returned " + std::to_string(reply["points"].size()) +
                        " points, expected " + std::to_string(points.size()));
  }
  std::vector<std::vector<double>> out;
  for (const auto& row : reply["points"]) out.push_back(row.get<std::vector<double>>());
  auto reduced = knn::PointSet::from_rows(out);
  if (reduced.dim() != config.target_dim) {
    throw DimensionMismatch("external reducer returned dimension " + std::to_string(reduced.dim()));
  }
  return reduced;
}

}  // namespace

ProjectionMethod parse_projection_method(std::string_view s) {
  if (s == "linear-pca" || s == "pca") return ProjectionMethod::kLinearPca;
  if (s == "external-reducer" || s == "external") return ProjectionMethod::kExternalReducer;
  if (s == "precomputed-import" || s == "import") return ProjectionMethod::kPrecomputedImport;
  throw UsageError("unknown projection method: " + std::string(s));
}

std::string_view to_string(ProjectionMethod m) {
  switch (m) {
    case ProjectionMethod::kLinearPca:
      return "linear-pca";
    case ProjectionMethod::kExternalReducer:
      return "external-reducer";
    case ProjectionMethod::kPrecomputedImport:
      return "precomputed-import";
  }
  return "linear-pca";
}

void ProjectionConfig::validate() const {
  if (target_dim < 2) throw UsageError("projection target dimension must be >= 2");
  if (runs < 1) throw UsageError("projection runs must be >= 1");
  if (n_neighbors < 2) throw UsageError("n_neighbors must be >= 2");
  if (method == ProjectionMethod::kExternalReducer && reducer_command.empty()) {
    throw UsageError("external-reducer needs a reducer command");
  }
  if (method == ProjectionMethod::kPrecomputedImport && coordinates_path.empty()) {
    throw UsageError("precomputed-import needs a coordinates file");
  }
}

knn::PointSet pca_project(const knn::PointSet& points, std::size_t target_dim) {
  const auto n = static_cast<Eigen::Index>(points.size());
  const auto dim = static_cast<Eigen::Index>(points.dim());
  if (target_dim > points.dim()) {
    throw DimensionMismatch("cannot project " + std::to_string(points.dim()) + "-dim points to " +
                            std::to_string(target_dim) + " dimensions");
  }
  if (n < 2) throw InsufficientPoints("PCA needs at least 2 points");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      points.coords().data(), n, dim);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centred = x.rowwise() - mean;
  const Eigen::MatrixXd cov = (centred.transpose() * centred) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw DataError("PCA eigendecomposition failed");
  // eigenvalues ascend; keep the trailing columns, largest first
  const auto td = static_cast<Eigen::Index>(target_dim);
  const Eigen::MatrixXd axes = solver.eigenvectors().rightCols(td).rowwise().reverse();
  const Eigen::MatrixXd projected = x * axes;
  std::vector<double> coords(static_cast<std::size_t>(n) * target_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < td; ++j) {
      coords[static_cast<std::size_t>(i * td + j)] = projected(i, j);
    }
  }
  return knn::PointSet(target_dim, std::move(coords));
}

std::vector<std::vector<EmbeddingMatrix>> project_jointly(std::span<const EmbeddingMatrix> matrices,
                                                          const ProjectionConfig& config) {
  config.validate();
  if (matrices.empty()) throw UsageError("nothing to project");
  for (const auto& m : matrices) {
    if (m.model_id != matrices.front().model_id) {
      throw DataError("datasets were embedded with different models: " + m.model_id + " vs " +
                      matrices.front().model_id);
    }
    if (m.dim() != matrices.front().dim()) {
      throw DimensionMismatch("datasets have different embedding dimensions");
    }
  }

  if (config.method == ProjectionMethod::kPrecomputedImport) {
    std::vector<DatasetIds> ids;
    for (const auto& m : matrices) ids.push_back({m.dataset_name, m.ids});
    return import_coordinates(config.coordinates_path, ids);
  }

  const auto all = stack(matrices);
  const std::string suffix = "/" + std::string(to_string(config.method)) + "-" +
                             std::to_string(config.target_dim);
  std::vector<std::vector<EmbeddingMatrix>> families(config.runs);
  if (config.method == ProjectionMethod::kLinearPca) {
    // deterministic: every run reduces to the same coordinates
    const auto reduced = pca_project(all, config.target_dim);
    for (auto& f : families) f = split(reduced, matrices, suffix);
    return families;
  }
  std::vector<std::future<knn::PointSet>> pending;
  for (std::size_t r = 0; r < config.runs; ++r) {
    pending.push_back(std::async(std::launch::async, run_external, std::cref(all),
                                 std::cref(config), config.seed + r));
  }
  for (std::size_t r = 0; r < config.runs; ++r) {
    families[r] = split(pending[r].get(), matrices, suffix);
  }
  return families;
}

std::vector<std::vector<EmbeddingMatrix>> import_coordinates(
    const std::filesystem::path& path, std::span<const DatasetIds> datasets) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read coordinates file " + path.string());
  // run -> (dataset or "", id) -> vector
  std::map<std::int64_t, std::map<std::pair<std::string, std::string>, std::vector<double>>> runs;
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_object() || !j.contains("id") || !j.contains("vector")) {
      throw ParseError("expected {\"id\", \"vector\"}", lineno);
    }
    auto v = j["vector"].get<std::vector<double>>();
    if (dim == 0) dim = v.size();
    if (v.size() != dim || dim == 0) {
      throw DimensionMismatch("coordinates line " + std::to_string(lineno) + " has dimension " +
                              std::to_string(v.size()) + ", expected " + std::to_string(dim));
    }
    std::string id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    std::string ds = j.value("dataset", std::string());
    runs[j.value("run", std::int64_t{0})][{ds, id}] = std::move(v);
  }
  if (runs.empty()) throw DataError("coordinates file " + path.string() + " is empty");

  std::vector<std::vector<EmbeddingMatrix>> families;
  for (const auto& [run, table] : runs) {
    std::vector<EmbeddingMatrix> family;
    for (const auto& d : datasets) {
      EmbeddingMatrix m;
      m.dataset_name = d.name;
      m.model_id = "imported-" + std::to_string(dim);
      m.ids = d.ids;
      std::vector<double> coords;
      for (const auto& id : d.ids) {
        auto it = table.find({d.name, id});
        if (it == table.end()) it = table.find({std::string(), id});
        if (it == table.end()) {
          throw DataError("coordinates file lacks id " + id + " (dataset " + d.name + ", run " +
                          std::to_string(run) + ")");
        }
        coords.insert(coords.end(), it->second.begin(), it->second.end());
      }
      m.vectors = knn::PointSet(dim, std::move(coords));
      family.push_back(normalize(std::move(m)));
    }
    families.push_back(std::move(family));
  }
  return families;
}

}  // namespace benchsynth
