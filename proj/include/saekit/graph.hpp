#ifndef SAEKIT_GRAPH_HPP
#define SAEKIT_GRAPH_HPP

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "saekit/rng.hpp"

namespace saekit::graph {

/// Neighbor declarations over a named area universe. Each pair states that
/// `first` lists `second` as a neighbor; the graph is symmetrized on build.
struct AdjacencySpec {
  std::vector<std::string> names;
  std::vector<std::pair<std::string, std::string>> neighbor_pairs;
};

/// Undirected area adjacency with connected-component labels.
class AreaGraph {
 public:
  /// Neighbor lists must be symmetric, in range, and free of self-loops.
  AreaGraph(std::vector<std::string> names, std::vector<std::vector<std::size_t>> neighbors);

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<std::size_t>& neighbors(std::size_t a) const { return neighbors_.at(a); }
  std::size_t degree(std::size_t a) const { return neighbors_.at(a).size(); }

  /// Component label per area, labels numbered 0.. in order of first area.
  const std::vector<std::size_t>& components() const noexcept { return component_; }
  std::size_t component_count() const noexcept { return n_components_; }
  bool connected() const noexcept { return n_components_ == 1; }
  std::size_t edge_count() const;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<std::size_t>> neighbors_;
  std::vector<std::size_t> component_;
  std::size_t n_components_ = 0;
};

/// Validates names, symmetrizes (warning on one-sided declarations), drops
/// duplicate pairs, and labels components. Throws ValidationError on unknown
/// names, self-loops, or fewer than two areas.
AreaGraph build_graph(const AdjacencySpec& spec);

/// Index-based construction for generated geographies; edges are undirected.
AreaGraph graph_from_edges(std::vector<std::string> names,
                           const std::vector<std::pair<std::size_t, std::size_t>>& edges);

/// Raw ICAR structure matrix D - W.
Eigen::MatrixXd icar_precision(const AreaGraph& graph);

enum class ComponentPolicy {
  reject,          // multi-component graphs are an error
  per_component,   // sum-to-zero and scaling applied to each component separately
};

/// ICAR precision scaled so the constrained marginal variances have
/// geometric mean one (per component under ComponentPolicy::per_component).
struct ScaledIcarPrecision {
  Eigen::MatrixXd q_star;
  /// Multiplier applied to the raw precision; per component when there are several.
  std::vector<double> scale_factors;
  int rank_deficiency = 0;
  std::vector<std::size_t> component;  // label per area
  /// Nonzero eigenpairs of q_star (columns of basis); basis spans the
  /// sum-to-zero subspace of every non-singleton component.
  Eigen::MatrixXd basis;
  Eigen::VectorXd eigenvalues;
  /// Diagonal of the constrained generalized inverse of q_star.
  Eigen::VectorXd marginal_variances;

  std::size_t size() const noexcept { return static_cast<std::size_t>(q_star.rows()); }
  double scale_factor() const { return scale_factors.front(); }
  std::size_t component_count() const noexcept { return scale_factors.size(); }
  Eigen::MatrixXd generalized_inverse() const;
};

/// Relative cutoff below which an eigenvalue counts as zero.
inline constexpr double kZeroEigenTolerance = 1e-9;

/// Eigendecomposes each component of `q`, inverts its nonzero eigenvalues,
/// reads the marginal variances and rescales. Singleton components carry no
/// spatial variation (their row of q is zero) and are left unscaled.
/// Throws ValidationError when the graph is disconnected under
/// ComponentPolicy::reject, or when a component has more than one zero
/// eigenvalue (malformed input).
ScaledIcarPrecision scale_icar(const Eigen::MatrixXd& q,
                               ComponentPolicy policy = ComponentPolicy::reject);

/// One draw from the constrained, scaled ICAR field, N(0, Q*^-).
Eigen::VectorXd sample_constrained_icar(const ScaledIcarPrecision& prec, Rng& rng);

/// Adjacency file: one "areaA<TAB>areaB" edge per line ('#' comments allowed).
/// Each line declares both directions.
AdjacencySpec read_adjacency(const std::string& path, std::vector<std::string> names);

}  // namespace saekit::graph

#endif  // SAEKIT_GRAPH_HPP
