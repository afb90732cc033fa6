#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "benchsynth/embedding.hpp"

namespace benchsynth {

enum class ProjectionMethod { kPrecomputedImport, kLinearPca, kExternalReducer };

ProjectionMethod parse_projection_method(std::string_view s);
std::string_view to_string(ProjectionMethod m);

struct ProjectionConfig {
  ProjectionMethod method = ProjectionMethod::kLinearPca;
  std::size_t target_dim = 10;
  std::size_t n_neighbors = 80;
  double min_dist = 0.1;
  std::size_t runs = 10;
  std::uint64_t seed = 0;
  // external-reducer: command line of a program speaking the JSON contract
  //   stdin  {"points": [[..]], "n_neighbors", "min_dist", "dim", "seed"}
  //   stdout {"points": [[..]]}
  std::string reducer_command;
  // precomputed-import: JSONL of {"id", "vector"} with optional "dataset"
  // and "run" keys.
  std::filesystem::path coordinates_path;

  void validate() const;
};

// One family per run; family[i] is matrices[i] projected to target_dim and
// renormalized. All inputs are stacked and reduced in one call per run so
// their relative geometry is preserved, with run seed = seed + r.
std::vector<std::vector<EmbeddingMatrix>> project_jointly(std::span<const EmbeddingMatrix> matrices,
                                                          const ProjectionConfig& config);

struct DatasetIds {
  std::string name;
  std::vector<std::string> ids;
};

// Assembles matrices in the order of `datasets` from a coordinates file,
// one family per distinct "run" value (ascending), each renormalized. A row
// with a "dataset" key only serves that dataset. Throws DataError naming a
// missing id; DimensionMismatch on ragged vectors.
std::vector<std::vector<EmbeddingMatrix>> import_coordinates(
    const std::filesystem::path& path, std::span<const DatasetIds> datasets);

// Principal axes from the centred covariance; coordinates are the raw
// points expressed on the top `target_dim` axes. At full rank this is an
// orthogonal change of basis.
knn::PointSet pca_project(const knn::PointSet& points, std::size_t target_dim);

}  // namespace benchsynth
