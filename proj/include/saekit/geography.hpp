#ifndef SAEKIT_GEOGRAPHY_HPP
#define SAEKIT_GEOGRAPHY_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "saekit/graph.hpp"
#include "saekit/rng.hpp"

namespace saekit::simulation {

/// Synthetic stand-in for a national population raster and its sampling frame.
struct GeographyConfig {
  std::size_t grid_size = 240;             // pixels per side of the unit square
  std::size_t n_areas = 37;
  std::size_t single_stratum_areas = 1;    // areas without an urban/rural split
  std::size_t n_admin2 = 774;              // sub-areas for the x4 field
  std::size_t frame_clusters_per_stratum = 300;
  double urban_fraction = 0.15;            // densest share of an area's pixels
  std::size_t lloyd_iterations = 8;
  std::size_t admin2_lloyd_iterations = 2;
  // Log population surface: mean + Matern(nu = 1) field on a coarse lattice,
  // bilinearly interpolated, plus pixel-level noise.
  double log_population_mean = 3.0;
  double log_population_sd = 2.0;
  double log_population_range = 0.3;
  double log_population_noise_sd = 1.0;
  std::size_t population_lattice = 24;
  double mean_cluster_size = 10.0;          // N_c ~ Poisson(mean)

  void validate() const;
};

struct FrameCluster {
  std::size_t pixel = 0;
  std::size_t area = 0;
  std::size_t stratum = 0;
  std::size_t admin2 = 0;
  double x = 0;  // pixel centre in the unit square
  double y = 0;
  int size = 0;  // N_c individuals
};

struct SyntheticGeography {
  std::size_t grid_size = 0;
  std::vector<double> population;      // per pixel, row-major (row = y)
  std::vector<std::size_t> area;       // per pixel
  std::vector<std::size_t> stratum;    // per pixel
  std::vector<std::size_t> admin2;     // per pixel
  std::vector<std::string> area_names;
  std::vector<std::size_t> stratum_area;
  std::vector<bool> stratum_urban;
  std::size_t n_admin2 = 0;
  std::optional<graph::AreaGraph> area_graph;
  std::optional<graph::AreaGraph> admin2_graph;
  std::vector<FrameCluster> clusters;  // sampling frame, grouped by stratum

  std::size_t n_areas() const noexcept { return area_names.size(); }
  std::size_t n_strata() const noexcept { return stratum_area.size(); }
  std::size_t n_pixels() const noexcept { return population.size(); }
  double total_population() const;
  /// Frame cluster indices per stratum.
  std::vector<std::vector<std::size_t>> clusters_by_stratum() const;
};

/// Builds contiguous areas by Lloyd-relaxed Voronoi tessellation of the
/// grid, splits each area into an urban stratum (densest pixels) and a rural
/// stratum, and draws the frame: clusters are pixels drawn per stratum with
/// probability proportional to population without replacement, each with a
/// Poisson cluster size. Throws ValidationError on infeasible settings.
SyntheticGeography generate_geography(const GeographyConfig& config, std::uint64_t seed);

/// Matern covariance with smoothness 1: sigma2 * (kappa h) K_1(kappa h) with
/// kappa = sqrt(8) / range, so correlation is near 0.13 at h = range.
double matern1_covariance(double h, double range, double variance = 1.0);

/// Exact draws of a Matern(nu = 1) field on an n x n lattice of cell centres
/// of the unit square, via dense Cholesky of the covariance.
class MaternLattice {
 public:
  MaternLattice(std::size_t n, double range, double variance = 1.0);
  std::size_t size() const noexcept { return n_; }
  Eigen::VectorXd draw(Rng& rng) const;
  /// Index of the lattice node nearest to (x, y).
  std::size_t nearest(double x, double y) const;
  double node_x(std::size_t k) const;
  double node_y(std::size_t k) const;

 private:
  std::size_t n_;
  Eigen::MatrixXd chol_;  // lower factor
};

struct CovariateConfig {
  double matern_range = 0.25 * 1.4142135623730951;  // fraction of the domain diameter
  std::size_t matern_lattice = 40;
};

/// Cluster-level covariates, one row per frame cluster.
struct Covariates {
  Eigen::MatrixXd x;           // clusters x 5
  Eigen::VectorXd area_icar;   // x3 values per area
  Eigen::VectorXd admin2_icar; // x4 values per sub-area
};

/// x1 ~ Bernoulli(0.5); x2 ~ Bernoulli(0.3 + 0.5 (a + 1) / A) for 0-based
/// area a; x3, x4 scaled sum-to-zero ICAR fields over areas and sub-areas;
/// x5 a Matern(nu = 1) field read at the nearest lattice node.
Covariates draw_covariates(const SyntheticGeography& geo, const CovariateConfig& config,
                           std::uint64_t seed);

}  // namespace saekit::simulation

#endif  // SAEKIT_GEOGRAPHY_HPP
