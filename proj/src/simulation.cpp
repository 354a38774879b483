#include "saekit/simulation.hpp"

#include <algorithm>
#include <boost/random/gamma_distribution.hpp>
#include <cmath>
#include <numeric>

#include "saekit/error.hpp"

namespace saekit::simulation {

void PopulationConfig::validate() const {
  if (!(mu > 0 && mu < 1)) throw ValidationError("mu must lie in (0, 1)");
  for (double b : beta) {
    if (!std::isfinite(b)) throw ValidationError("covariate coefficients must be finite");
  }
  if (!(area_sd >= 0) || !(cluster_sd >= 0)) {
    throw ValidationError("random effect standard deviations must be nonnegative");
  }
}

Population draw_population(const SyntheticGeography& geo, const Covariates& covariates,
                           const PopulationConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t n = geo.clusters.size();
  if (static_cast<std::size_t>(covariates.x.rows()) != n || covariates.x.cols() != 5) {
    throw ValidationError("covariates do not match the frame");
  }
  Rng rng(seed);
  Population pop;
  const std::size_t A = geo.n_areas();
  pop.area_effect.resize(static_cast<Eigen::Index>(A));
  for (std::size_t a = 0; a < A; ++a) {
    pop.area_effect[static_cast<Eigen::Index>(a)] = config.area_sd * rng.normal();
  }
  const double base = std::log(config.mu / (1.0 - config.mu));
  pop.risk.resize(static_cast<Eigen::Index>(n));
  pop.positives.resize(n);
  std::vector<double> y_sum(A, 0), n_sum(A, 0);
  for (std::size_t c = 0; c < n; ++c) {
    const auto i = static_cast<Eigen::Index>(c);
    const FrameCluster& fc = geo.clusters[c];
    double eta = base + pop.area_effect[static_cast<Eigen::Index>(fc.area)] +
                 config.cluster_sd * rng.normal();
    for (int k = 0; k < 5; ++k) eta += config.beta[static_cast<std::size_t>(k)] * covariates.x(i, k);
    pop.risk[i] = model::logistic(eta);
    pop.positives[c] = fc.size > 0 ? rng.binomial(fc.size, pop.risk[i]) : 0;
    y_sum[fc.area] += pop.positives[c];
    n_sum[fc.area] += fc.size;
  }
  pop.truth.resize(A);
  for (std::size_t a = 0; a < A; ++a) {
    if (!(n_sum[a] > 0)) throw ValidationError(geo.area_names[a] + " has no population");
    pop.truth[a] = y_sum[a] / n_sum[a];
  }
  return pop;
}

PpsSample systematic_pps(std::span<const double> sizes, std::size_t n, Rng& rng) {
  PpsSample out;
  out.inclusion.assign(sizes.size(), 0.0);
  std::vector<std::size_t> pool;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    if (!(sizes[j] >= 0) || !std::isfinite(sizes[j])) {
      throw ValidationError("PPS sizes must be finite and nonnegative");
    }
    if (sizes[j] > 0) pool.push_back(j);
  }
  if (pool.size() < n) {
    throw ValidationError("cannot select " + std::to_string(n) + " units from " +
                          std::to_string(pool.size()) + " of positive size");
  }
  std::size_t n_left = n;
  for (bool changed = true; changed && n_left > 0;) {
    changed = false;
    double total = 0;
    for (auto j : pool) total += sizes[j];
    std::vector<std::size_t> rest;
    for (auto j : pool) {
      if (static_cast<double>(n_left) * sizes[j] / total >= 1.0) {
        out.inclusion[j] = 1.0;
        out.selected.push_back(j);
        changed = true;
      } else {
        rest.push_back(j);
      }
    }
    n_left -= pool.size() - rest.size();
    pool.swap(rest);
  }
  if (n_left > 0) {
    double total = 0;
    for (auto j : pool) total += sizes[j];
    for (auto j : pool) out.inclusion[j] = static_cast<double>(n_left) * sizes[j] / total;
    for (std::size_t k = pool.size(); k > 1; --k) std::swap(pool[k - 1], pool[rng.index(k)]);
    const double step = total / static_cast<double>(n_left);
    double point = rng.uniform() * step;
    double cum = 0;
    std::size_t taken = 0;
    for (auto j : pool) {
      cum += sizes[j];
      while (taken < n_left && point < cum) {
        out.selected.push_back(j);
        ++taken;
        point += step;
      }
    }
    // Rounding can leave the last point just past the final cumulative total.
    for (auto it = pool.rbegin(); taken < n_left; ++it) {
      if (std::find(out.selected.begin(), out.selected.end(), *it) == out.selected.end()) {
        out.selected.push_back(*it);
        ++taken;
      }
    }
  }
  std::sort(out.selected.begin(), out.selected.end());
  return out;
}

namespace {

void add_cluster(survey::SurveyDataset& data, const SyntheticGeography& geo,
                 const Population& pop, std::size_t c, double weight) {
  const FrameCluster& fc = geo.clusters[c];
  const std::string stratum = "s" + std::to_string(fc.stratum + 1);
  const std::string cluster = "c" + std::to_string(c + 1);
  const std::string& area = geo.area_names[fc.area];
  for (int i = 0; i < fc.size; ++i) {
    data.add_unit(i < pop.positives[c] ? 1 : 0, weight, stratum, cluster, area);
  }
}

}  // namespace

SurveySample sample_survey(const SyntheticGeography& geo, const Population& population,
                           std::size_t clusters_per_stratum, std::uint64_t seed,
                           SizeMeasure size) {
  if (population.positives.size() != geo.clusters.size()) {
    throw ValidationError("population does not match the frame");
  }
  if (clusters_per_stratum < 1) throw ValidationError("clusters_per_stratum must be positive");
  SurveySample out{survey::SurveyDataset(geo.area_names), {}, {}};
  Rng rng(seed);
  const auto strata = geo.clusters_by_stratum();
  for (std::size_t s = 0; s < strata.size(); ++s) {
    std::vector<double> sizes;
    for (auto c : strata[s]) {
      const FrameCluster& fc = geo.clusters[c];
      // Pixels without residents cannot be surveyed whatever the frame says.
      const double frame = fc.size > 0 ? geo.population[fc.pixel] : 0.0;
      sizes.push_back(size == SizeMeasure::cluster_size ? static_cast<double>(fc.size) : frame);
    }
    PpsSample pick;
    try {
      pick = systematic_pps(sizes, clusters_per_stratum, rng);
    } catch (const ValidationError& e) {
      throw ValidationError("stratum s" + std::to_string(s + 1) + ": " + e.what());
    }
    for (auto k : pick.selected) {
      const std::size_t c = strata[s][k];
      out.clusters.push_back(c);
      out.inclusion.push_back(pick.inclusion[k]);
      add_cluster(out.data, geo, population, c, 1.0 / pick.inclusion[k]);
    }
  }
  return out;
}

survey::SurveyDataset census_survey(const SyntheticGeography& geo, const Population& population) {
  survey::SurveyDataset data(geo.area_names);
  for (std::size_t c = 0; c < geo.clusters.size(); ++c) add_cluster(data, geo, population, c, 1.0);
  return data;
}

Metrics compute_metrics(const summary::AreaEstimates& estimates, std::span<const double> truth) {
  if (estimates.size() != truth.size()) {
    throw ValidationError("estimates cover " + std::to_string(estimates.size()) +
                          " areas but truth has " + std::to_string(truth.size()));
  }
  if (truth.empty()) throw ValidationError("no areas to score");
  Metrics m;
  for (std::size_t a = 0; a < truth.size(); ++a) {
    const auto& e = estimates[a];
    if (std::isnan(e.point) || std::isnan(e.lower) || std::isnan(e.upper) || std::isnan(truth[a])) {
      throw ValidationError("missing estimate or truth for area " + e.area);
    }
    const double err = truth[a] - e.point;
    m.rmse += err * err;
    m.mae += std::abs(err);
    m.cov90 += (e.lower <= truth[a] && truth[a] <= e.upper) ? 1.0 : 0.0;
    m.mil += e.upper - e.lower;
  }
  const double A = static_cast<double>(truth.size());
  m.rmse = std::sqrt(m.rmse / A);
  m.mae /= A;
  m.cov90 /= A;
  m.mil /= A;
  return m;
}

PriorPredictive simulate_prior_predictive(const model::ModelConfig& config,
                                          const std::optional<graph::ScaledIcarPrecision>& icar,
                                          const std::vector<std::string>& areas,
                                          std::span<const int> n, std::span<const int> m,
                                          Rng& rng, double v_fixed) {
  const std::size_t A = areas.size();
  config.validate(A);
  if (n.size() != A || m.size() != A) throw ValidationError("n and m must have one entry per area");
  if (config.spatial && (!icar || icar->size() != A)) {
    throw ValidationError("spatial prior predictive needs a matching ICAR structure");
  }
  const auto Ai = static_cast<Eigen::Index>(A);
  PriorPredictive out;
  model::ParameterState& s = out.state;

  const auto p = static_cast<Eigen::Index>(config.design.cols());
  s.beta.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) s.beta[j] = rng.normal(config.beta_prior_mean, config.beta_prior_sd);
  auto exponential = [&](double rate) { return -std::log1p(-rng.uniform()) / rate; };
  const double sigma_u = exponential(config.sigma_u_prior.rate());
  s.log_sigma_u = std::log(sigma_u);
  s.u_unstr.resize(Ai);
  for (Eigen::Index a = 0; a < Ai; ++a) s.u_unstr[a] = rng.normal();

  Eigen::VectorXd u = s.u_unstr;
  if (config.spatial) {
    boost::random::gamma_distribution<double> ga(config.phi_prior_a), gb(config.phi_prior_b);
    const double x = ga(rng.engine()), y = gb(rng.engine());
    const double phi = x / (x + y);
    s.logit_phi = std::log(phi / (1.0 - phi));
    s.u_spat = graph::sample_constrained_icar(*icar, rng);
    u = std::sqrt(1.0 - phi) * s.u_unstr + std::sqrt(phi) * s.u_spat;
  }
  out.p = (config.design * s.beta + sigma_u * u).unaryExpr([](double e) { return model::logistic(e); });

  out.v.resize(Ai);
  if (config.smooth_variance) {
    const std::size_t k = static_cast<std::size_t>(config.gvf_extra.cols());
    s.gamma.resize(static_cast<Eigen::Index>(3 + k));
    for (int j = 0; j < 3; ++j) {
      s.gamma[j] = rng.normal(config.gamma_prior_mean[static_cast<std::size_t>(j)],
                              config.gamma_prior_sd[static_cast<std::size_t>(j)]);
    }
    for (std::size_t j = 0; j < k; ++j) {
      s.gamma[static_cast<Eigen::Index>(3 + j)] = rng.normal(0.0, config.gamma_extra_prior_sd);
    }
    const double sigma_tau = exponential(config.sigma_tau_prior.rate());
    s.log_sigma_tau = std::log(sigma_tau);
    s.log_v.resize(Ai);
    std::vector<double> z(k);
    for (std::size_t a = 0; a < A; ++a) {
      for (std::size_t j = 0; j < k; ++j) {
        z[j] = config.gvf_extra(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j));
      }
      const auto i = static_cast<Eigen::Index>(a);
      const double f = model::gvf_mean(out.p[i], n[a], std::span<const double>(s.gamma.data(), 3 + k), z);
      s.log_v[i] = f + sigma_tau * rng.normal();
      out.v[i] = std::exp(s.log_v[i]);
    }
  } else {
    out.v.setConstant(v_fixed);
  }

  for (std::size_t a = 0; a < A; ++a) {
    const auto i = static_cast<Eigen::Index>(a);
    if (m[a] < 2) throw ValidationError("prior predictive areas need at least two clusters");
    survey::DirectEstimate d;
    d.area = areas[a];
    d.n = n[a];
    d.m = m[a];
    d.dof = m[a] - 1;
    d.status = survey::AreaStatus::ok;
    d.p_hat = out.p[i] + std::sqrt(out.v[i]) * rng.normal();
    d.v_hat = config.smooth_variance ? out.v[i] * rng.chi_squared(d.dof) / d.dof : out.v[i];
    out.direct.areas.push_back(std::move(d));
  }
  return out;
}

}  // namespace saekit::simulation
