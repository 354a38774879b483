#ifndef SAEKIT_SIMULATION_HPP
#define SAEKIT_SIMULATION_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "saekit/geography.hpp"
#include "saekit/model.hpp"
#include "saekit/summary.hpp"
#include "saekit/survey.hpp"

namespace saekit::simulation {

/// Cluster risk model logit(q_c) = logit(mu) + x_c' beta + u_a + v_c.
struct PopulationConfig {
  double mu = 0.1;
  std::array<double, 5> beta{0.25, -0.25, 0.5, 0.25, 0.25};
  double area_sd = 0.25;     // u_a ~ N(0, area_sd^2)
  double cluster_sd = 0.5;   // v_c ~ N(0, cluster_sd^2)

  void validate() const;
};

struct Population {
  Eigen::VectorXd risk;             // q_c per frame cluster
  Eigen::VectorXd area_effect;      // u_a
  std::vector<int> positives;       // Y_c = sum of responses in cluster c
  std::vector<double> truth;        // p_a = sum Y / sum N over the area's clusters
};

/// Fresh area and cluster effects and Binomial(N_c, q_c) cluster counts.
/// Covariates and cluster sizes come from the fixed frame.
Population draw_population(const SyntheticGeography& geo, const Covariates& covariates,
                           const PopulationConfig& config, std::uint64_t seed);

/// Systematic PPS selection of n units from a randomly ordered list. Units
/// whose expected count n size_j / S reaches 1 are taken with certainty and
/// the rest re-selected among the remainder.
struct PpsSample {
  std::vector<std::size_t> selected;  // ascending indices into sizes
  std::vector<double> inclusion;      // pi_j for every unit
};
PpsSample systematic_pps(std::span<const double> sizes, std::size_t n, Rng& rng);

struct SurveySample {
  survey::SurveyDataset data;
  std::vector<std::size_t> clusters;  // selected frame clusters, by stratum
  std::vector<double> inclusion;      // pi of each selected cluster
};

/// First-stage measure of size.
enum class SizeMeasure {
  frame_population,  // population of the cluster's pixel, as a census frame records it
  cluster_size,      // realized N_c
};

/// Stratified two-stage sample: clusters_per_stratum clusters per stratum by
/// PPS on the chosen size measure, then every individual of a selected
/// cluster, each with weight 1 / pi. Throws ValidationError if a stratum has
/// fewer clusters of positive size than requested.
SurveySample sample_survey(const SyntheticGeography& geo, const Population& population,
                           std::size_t clusters_per_stratum, std::uint64_t seed,
                           SizeMeasure size = SizeMeasure::frame_population);

/// Every frame cluster with certainty (weights 1).
survey::SurveyDataset census_survey(const SyntheticGeography& geo, const Population& population);

/// Averages over areas of squared and absolute error, interval coverage
/// (l_a <= p_a <= u_a) and interval length.
struct Metrics {
  double rmse = 0;
  double mae = 0;
  double cov90 = 0;
  double mil = 0;
};

/// Throws ValidationError when sizes differ or a value is missing (NaN).
Metrics compute_metrics(const summary::AreaEstimates& estimates, std::span<const double> truth);

/// One dataset drawn from a model's prior predictive: latent state, true
/// proportions and variances, and the direct estimates the model sees.
struct PriorPredictive {
  model::ParameterState state;
  Eigen::VectorXd p;  // true area proportions
  Eigen::VectorXd v;  // true sampling variances (joint smoothing)
  survey::DirectEstimates direct;
};

/// Draws hyperparameters from their priors, latent effects from the linking
/// model, V_a from the variance linking model, and then
/// p-hat_a ~ N(p_a, V_a) and V-hat_a = V_a chi^2_d / d. For mean smoothing
/// the variances are instead v_fixed. Every area is marked sampled with the
/// given n and d = m - 1. p-hat is not clamped to [0, 1].
PriorPredictive simulate_prior_predictive(const model::ModelConfig& config,
                                          const std::optional<graph::ScaledIcarPrecision>& icar,
                                          const std::vector<std::string>& areas,
                                          std::span<const int> n, std::span<const int> m,
                                          Rng& rng, double v_fixed = 0.01);

}  // namespace saekit::simulation

#endif  // SAEKIT_SIMULATION_HPP
