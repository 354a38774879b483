#include "saekit/summary.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <ostream>

#include "saekit/csv.hpp"
#include "saekit/error.hpp"

namespace saekit::summary {

namespace {

void check_level(double level) {
  if (!(level > 0 && level < 1)) throw ValidationError("interval level must lie in (0, 1)");
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

const HyperEstimate& HyperSummary::at(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e;
  }
  throw ValidationError("no hyperparameter named '" + name + "'");
}

double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sample");
  if (!(prob >= 0 && prob <= 1)) throw ValidationError("quantile probability must lie in [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::vector<double> values, double prob) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, prob);
}

HyperEstimate summarize_scalar(std::string name, std::vector<double> draws, double level) {
  check_level(level);
  if (draws.empty()) throw ValidationError("no draws to summarize for " + name);
  std::sort(draws.begin(), draws.end());
  HyperEstimate e;
  e.name = std::move(name);
  e.point = quantile_sorted(draws, 0.5);
  e.lower = quantile_sorted(draws, (1.0 - level) / 2.0);
  e.upper = quantile_sorted(draws, (1.0 + level) / 2.0);
  return e;
}

AreaEstimates summarize_draws(const Eigen::MatrixXd& draws, const std::vector<std::string>& areas,
                              std::string method, double level) {
  check_level(level);
  if (draws.rows() == 0) throw ValidationError("no draws to summarize");
  if (static_cast<std::size_t>(draws.cols()) != areas.size()) {
    throw ValidationError("draw matrix does not match the area list");
  }
  AreaEstimates out;
  out.method = std::move(method);
  out.level = level;
  std::vector<double> column(static_cast<std::size_t>(draws.rows()));
  for (Eigen::Index a = 0; a < draws.cols(); ++a) {
    for (Eigen::Index i = 0; i < draws.rows(); ++i) column[static_cast<std::size_t>(i)] = draws(i, a);
    std::sort(column.begin(), column.end());
    AreaEstimate e;
    e.area = areas[static_cast<std::size_t>(a)];
    e.point = quantile_sorted(column, 0.5);
    e.lower = quantile_sorted(column, (1.0 - level) / 2.0);
    e.upper = quantile_sorted(column, (1.0 + level) / 2.0);
    e.interval_length = e.upper - e.lower;
    out.areas.push_back(std::move(e));
  }
  return out;
}

Eigen::MatrixXd proportion_draws(const sampler::PosteriorSamples& samples,
                                 const model::AreaModel& model) {
  if (samples.dim != model.dimension()) {
    throw ValidationError("posterior draws do not match the model dimension");
  }
  const std::size_t total = samples.total_draws();
  Eigen::MatrixXd p(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(model.area_count()));
  for (std::size_t c = 0; c < samples.n_chains; ++c) {
    for (std::size_t i = 0; i < samples.n_samples; ++i) {
      const Eigen::VectorXd theta = samples.draw(c, i);
      p.row(static_cast<Eigen::Index>(c * samples.n_samples + i)) =
          model.latent_proportions(theta).transpose();
    }
  }
  return p;
}

AreaEstimates summarize_areas(const sampler::PosteriorSamples& samples,
                              const model::AreaModel& model, double level) {
  std::vector<std::string> names;
  for (const auto& d : model.data().direct.areas) names.push_back(d.area);
  return summarize_draws(proportion_draws(samples, model), names,
                         std::string(model::method_label(model.method())), level);
}

HyperSummary summarize_hypers(const sampler::PosteriorSamples& samples,
                              const model::AreaModel& model, double level) {
  if (samples.dim != model.dimension()) {
    throw ValidationError("posterior draws do not match the model dimension");
  }
  const model::ParameterLayout& L = model.layout();
  auto collect = [&](std::size_t j, auto transform) {
    std::vector<double> v;
    v.reserve(samples.total_draws());
    for (std::size_t c = 0; c < samples.n_chains; ++c) {
      for (std::size_t i = 0; i < samples.n_samples; ++i) {
        v.push_back(transform(samples.draws[(c * samples.n_samples + i) * samples.dim + j]));
      }
    }
    return v;
  };
  auto identity = [](double x) { return x; };
  auto exp_ = [](double x) { return std::exp(x); };
  auto logistic = [](double x) { return model::logistic(x); };

  HyperSummary out;
  out.level = level;
  out.entries.push_back(summarize_scalar("intercept", collect(L.beta, identity), level));
  out.entries.push_back(summarize_scalar("sigma_u", collect(L.log_sigma_u, exp_), level));
  if (L.spatial) out.entries.push_back(summarize_scalar("phi", collect(L.logit_phi, logistic), level));
  if (L.smooth_variance) {
    for (std::size_t k = 0; k < L.n_gamma; ++k) {
      out.entries.push_back(
          summarize_scalar("gamma" + std::to_string(k), collect(L.gamma + k, identity), level));
    }
    out.entries.push_back(summarize_scalar("sigma_tau", collect(L.log_sigma_tau, exp_), level));
  }
  return out;
}

AreaEstimates hajek_intervals(const survey::DirectEstimates& direct, double level) {
  check_level(level);
  const double z = boost::math::quantile(boost::math::normal(), (1.0 + level) / 2.0);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  AreaEstimates out;
  out.method = std::string(model::method_label(model::Method::hajek));
  out.level = level;
  for (const auto& d : direct.areas) {
    AreaEstimate e;
    e.area = d.area;
    e.point = d.p_hat;
    if (!d.has_variance()) {
      e.lower = e.upper = e.interval_length = nan;
      e.flagged = true;
    } else if (d.p_hat <= 0 || d.p_hat >= 1) {
      e.lower = e.upper = d.p_hat;
      e.interval_length = 0;
      e.flagged = true;
    } else {
      const double centre = logit(d.p_hat);
      const double sd = std::sqrt(d.v_hat) / (d.p_hat * (1.0 - d.p_hat));
      e.lower = model::logistic(centre - z * sd);
      e.upper = model::logistic(centre + z * sd);
      e.interval_length = e.upper - e.lower;
    }
    out.areas.push_back(std::move(e));
  }
  return out;
}

void write_estimates_csv(std::ostream& out, std::span<const AreaEstimates> sets) {
  out << "area,method,point,lower,upper,interval_length\n";
  for (const auto& set : sets) {
    for (const auto& e : set.areas) {
      out << csv::quote(e.area) << ',' << csv::quote(set.method) << ','
          << csv::format_number(e.point) << ',' << csv::format_number(e.lower) << ','
          << csv::format_number(e.upper) << ',' << csv::format_number(e.interval_length) << '\n';
    }
  }
}

}  // namespace saekit::summary
