#ifndef SAEKIT_SUMMARY_HPP
#define SAEKIT_SUMMARY_HPP

#include <Eigen/Dense>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "saekit/model.hpp"
#include "saekit/sampler.hpp"
#include "saekit/survey.hpp"

namespace saekit::summary {

struct AreaEstimate {
  std::string area;
  double point = 0;
  double lower = 0;
  double upper = 0;
  double interval_length = 0;  // upper - lower
  bool flagged = false;         // interval undefined or degenerate by construction
};

struct AreaEstimates {
  std::string method;  // reporting label, e.g. "Spatial Unmatched JS"
  double level = 0.90;
  std::vector<AreaEstimate> areas;

  std::size_t size() const noexcept { return areas.size(); }
  const AreaEstimate& operator[](std::size_t a) const { return areas[a]; }
};

struct HyperEstimate {
  std::string name;
  double point = 0;
  double lower = 0;
  double upper = 0;
};

struct HyperSummary {
  double level = 0.90;
  std::vector<HyperEstimate> entries;

  const HyperEstimate& at(const std::string& name) const;
};

/// Linear interpolation between order statistics (R type 7). `sorted` must be
/// ascending and nonempty; prob in [0, 1].
double quantile_sorted(std::span<const double> sorted, double prob);
/// Sorts a copy and applies quantile_sorted.
double quantile(std::vector<double> values, double prob);

/// Median and equal-tailed interval of one scalar's draws.
HyperEstimate summarize_scalar(std::string name, std::vector<double> draws, double level);

/// Rows are draws, columns are areas: point = median, bounds = (1-level)/2
/// and (1+level)/2 quantiles.
AreaEstimates summarize_draws(const Eigen::MatrixXd& draws, const std::vector<std::string>& areas,
                              std::string method, double level = 0.90);

/// Draws of p_a (one row per posterior draw, chains in order) reconstructed
/// from the sampled parameter vectors.
Eigen::MatrixXd proportion_draws(const sampler::PosteriorSamples& samples,
                                 const model::AreaModel& model);

AreaEstimates summarize_areas(const sampler::PosteriorSamples& samples,
                              const model::AreaModel& model, double level = 0.90);

/// Reporting-scale summaries: intercept, sigma_u, phi (spatial), and gamma0,
/// gamma1, gamma2, sigma_tau (joint smoothing).
HyperSummary summarize_hypers(const sampler::PosteriorSamples& samples,
                              const model::AreaModel& model, double level = 0.90);

/// Design-based intervals built on the logit scale,
///   logit(p) +/- z sqrt(V) / (p (1 - p)),
/// then mapped back. Areas with p-hat in {0, 1} get the degenerate interval
/// (p-hat, p-hat) and are flagged; areas without a variance get NaN bounds
/// and are flagged.
AreaEstimates hajek_intervals(const survey::DirectEstimates& direct, double level = 0.90);

/// CSV with header area,method,point,lower,upper,interval_length; one block
/// per estimate set, in the given order.
void write_estimates_csv(std::ostream& out, std::span<const AreaEstimates> sets);

}  // namespace saekit::summary

#endif  // SAEKIT_SUMMARY_HPP
