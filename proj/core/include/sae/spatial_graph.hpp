#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sae/data_model.hpp"
#include "sae/metadata.hpp"

namespace sae {

/// B: binary neighbor weights. W: symmetrized row-standardized weights
/// (experimental).
enum class WeightStyle { B, W };

std::string_view to_string(WeightStyle s);
WeightStyle parse_weight_style(std::string_view s);

struct AdjacencyGraph {
  std::vector<std::string> node_ids;                       // sorted, unique
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // first < second, sorted
  std::vector<std::size_t> component;                      // per node
  std::size_t component_count = 0;
  WeightStyle style = WeightStyle::B;

  /// Validates ids and edges, normalizes edge order and labels components
  /// in order of their smallest node.
  static AdjacencyGraph from_edges(std::vector<std::string> node_ids,
                                   std::vector<std::pair<std::size_t, std::size_t>> edges,
                                   WeightStyle style = WeightStyle::B);

  std::size_t size() const noexcept { return node_ids.size(); }
  std::size_t index_of(std::string_view id) const;
  std::vector<std::size_t> degrees() const;
  std::vector<std::vector<std::size_t>> component_members() const;
};

/// Rook contiguity: two regions are adjacent iff their rings share a
/// boundary stretch of positive length after snapping coordinates to a grid
/// of `tolerance` degrees. Country labels play no part.
AdjacencyGraph build_adjacency(const std::vector<RegionBoundary>& boundaries,
                               double tolerance = 1e-6, WeightStyle style = WeightStyle::B);

/// ICAR structure matrix at unit scale, stored by edge.
struct IcarPrecision {
  struct Edge {
    std::size_t i = 0;
    std::size_t j = 0;
    double weight = 0.0;
  };

  std::size_t dimension = 0;
  std::vector<Edge> edges;
  std::vector<double> diagonal;  // row sums of the weights
  std::vector<std::vector<std::pair<std::size_t, double>>> neighbors;
  std::vector<std::size_t> component;
  std::size_t component_count = 0;
  std::size_t rank = 0;
  WeightStyle style = WeightStyle::B;

  Eigen::MatrixXd dense() const;
};

IcarPrecision icar_precision(const AdjacencyGraph& graph);

/// x'Qx as the edge sum of w_ij (x_i - x_j)^2.
double quadratic_form(const IcarPrecision& q, std::span<const double> x);

/// Tab-separated `style`, `node`, `edge` and `component` lines; '#' comments.
void write_graph(std::ostream& out, const AdjacencyGraph& graph,
                 const ArtifactMetadata* meta = nullptr);
AdjacencyGraph read_graph(std::istream& in);

}  // namespace sae
