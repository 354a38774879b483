#include "saekit/model.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <numbers>

#include "saekit/error.hpp"
#include "saekit/log.hpp"

namespace saekit::model {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

}  // namespace

ModelConfig ModelConfig::intercept_only(std::size_t n_areas, bool spatial, bool smooth_variance) {
  ModelConfig c;
  c.spatial = spatial;
  c.smooth_variance = smooth_variance;
  c.design = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n_areas), 1);
  c.gvf_extra = Eigen::MatrixXd(static_cast<Eigen::Index>(n_areas), 0);
  return c;
}

void ModelConfig::validate(std::size_t n_areas) const {
  const auto a = static_cast<Eigen::Index>(n_areas);
  if (design.rows() != a || design.cols() < 1) {
    throw ValidationError("design matrix must have one row per area and at least one column");
  }
  if (!design.allFinite()) throw ValidationError("design matrix has non-finite entries");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < design.cols()) throw ValidationError("design matrix is not full column rank");
  if (gvf_extra.cols() > 0 && gvf_extra.rows() != a) {
    throw ValidationError("GVF covariates must have one row per area");
  }
  if (!gvf_extra.allFinite()) throw ValidationError("GVF covariates have non-finite entries");
  auto check_pc = [](const PcPrior& p, const char* name) {
    if (!(p.upper > 0) || !(p.tail_prob > 0 && p.tail_prob < 1)) {
      throw ValidationError(std::string("PC prior for ") + name +
                            " needs upper > 0 and 0 < tail probability < 1");
    }
  };
  check_pc(sigma_u_prior, "sigma_u");
  check_pc(sigma_tau_prior, "sigma_tau");
  if (!(beta_prior_sd > 0)) throw ValidationError("beta prior sd must be positive");
  for (double sd : gamma_prior_sd) {
    if (!(sd > 0)) throw ValidationError("gamma prior sds must be positive");
  }
  if (!(gamma_extra_prior_sd > 0)) throw ValidationError("gamma extra prior sd must be positive");
  if (!(phi_prior_a > 0) || !(phi_prior_b > 0)) {
    throw ValidationError("phi Beta prior shapes must be positive");
  }
  if (!(interval_level > 0 && interval_level < 1)) {
    throw ValidationError("interval level must lie in (0, 1)");
  }
}

std::string_view method_label(Method method) {
  switch (method) {
    case Method::hajek:
      return "Hájek";
    case Method::unmatched_ms:
      return "Unmatched MS";
    case Method::spatial_unmatched_ms:
      return "Spatial Unmatched MS";
    case Method::unmatched_js:
      return "Unmatched JS";
    case Method::spatial_unmatched_js:
      return "Spatial Unmatched JS";
  }
  return "Hájek";
}

Method method_of(const ModelConfig& config) {
  if (config.smooth_variance) {
    return config.spatial ? Method::spatial_unmatched_js : Method::unmatched_js;
  }
  return config.spatial ? Method::spatial_unmatched_ms : Method::unmatched_ms;
}

std::array<Method, 4> model_methods() {
  return {Method::unmatched_ms, Method::spatial_unmatched_ms, Method::unmatched_js,
          Method::spatial_unmatched_js};
}

double gvf_mean(double p, double n, std::span<const double> gamma, std::span<const double> z) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("GVF requires 0 < p < 1, got " + std::to_string(p));
  }
  if (!(n >= 1.0)) throw DomainError("GVF requires n >= 1");
  if (gamma.size() != 3 + z.size()) {
    throw DomainError("GVF expects " + std::to_string(3 + z.size()) + " coefficients");
  }
  double f = gamma[0] + gamma[1] * std::log(p * (1.0 - p)) + gamma[2] * std::log(n);
  for (std::size_t k = 0; k < z.size(); ++k) f += gamma[3 + k] * z[k];
  return f;
}

Eigen::VectorXd constrain_spatial(const Eigen::VectorXd& u_raw) {
  if (u_raw.size() == 0) return u_raw;
  return u_raw.array() - u_raw.mean();
}

Eigen::VectorXd constrain_spatial(const Eigen::VectorXd& u_raw,
                                  const std::vector<std::size_t>& components) {
  if (components.size() != static_cast<std::size_t>(u_raw.size())) {
    throw ValidationError("component labels do not match vector length");
  }
  const std::size_t k = components.empty()
                            ? 0
                            : 1 + *std::max_element(components.begin(), components.end());
  std::vector<double> sum(k, 0.0);
  std::vector<double> count(k, 0.0);
  for (Eigen::Index i = 0; i < u_raw.size(); ++i) {
    sum[components[static_cast<std::size_t>(i)]] += u_raw(i);
    count[components[static_cast<std::size_t>(i)]] += 1.0;
  }
  Eigen::VectorXd out(u_raw.size());
  for (Eigen::Index i = 0; i < u_raw.size(); ++i) {
    const std::size_t c = components[static_cast<std::size_t>(i)];
    out(i) = u_raw(i) - sum[c] / count[c];
  }
  return out;
}

AreaModel::AreaModel(ModelConfig config, ModelData data)
    : config_(std::move(config)), data_(std::move(data)) {
  const std::size_t n_areas = data_.direct.size();
  if (n_areas < 1) throw ValidationError("model needs at least one area");
  config_.validate(n_areas);
  if (config_.spatial) {
    if (!data_.icar) throw ValidationError("spatial model requires an ICAR precision");
    if (data_.icar->size() != n_areas) {
      throw ValidationError("ICAR precision size does not match the number of areas");
    }
    component_ = data_.icar->component;
    const std::size_t k = data_.icar->component_count();
    component_size_.assign(k, 0.0);
    for (std::size_t c : component_) component_size_[c] += 1.0;
  }

  for (std::size_t a = 0; a < n_areas; ++a) {
    const survey::DirectEstimate& e = data_.direct[a];
    if (!e.sampled()) continue;
    if (!e.has_variance()) {
      log::warn("area '" + e.area + "' has " + std::to_string(e.m) +
                " sampled cluster(s); excluded from the likelihood");
      continue;
    }
    if (!std::isfinite(e.p_hat) || !std::isfinite(e.v_hat)) {
      log::warn("area '" + e.area + "' has a non-finite direct estimate; excluded");
      continue;
    }
    if (e.p_hat == 0.0 || e.p_hat == 1.0 || e.v_hat <= 0.0) {
      log::warn("area '" + e.area + "' has a degenerate direct estimate (p_hat = " +
                std::to_string(e.p_hat) + ", v_hat = " + std::to_string(e.v_hat) +
                "); excluded from the likelihood");
      continue;
    }
    if (config_.smooth_variance && (e.dof < 1 || e.n < 1)) {
      log::warn("area '" + e.area + "' lacks degrees of freedom; excluded");
      continue;
    }
    observed_.push_back(a);
  }

  const auto n_obs = static_cast<Eigen::Index>(observed_.size());
  p_hat_obs_.resize(n_obs);
  v_hat_obs_.resize(n_obs);
  log_v_hat_obs_.resize(n_obs);
  dof_obs_.resize(n_obs);
  log_n_obs_.resize(n_obs);
  chi2_const_obs_.resize(n_obs);
  for (Eigen::Index k = 0; k < n_obs; ++k) {
    const survey::DirectEstimate& e = data_.direct[observed_[static_cast<std::size_t>(k)]];
    p_hat_obs_(k) = e.p_hat;
    v_hat_obs_(k) = e.v_hat;
    log_v_hat_obs_(k) = std::log(e.v_hat);
    dof_obs_(k) = static_cast<double>(e.dof);
    log_n_obs_(k) = std::log(static_cast<double>(std::max(e.n, 1)));
    // log f(V-hat | V) = log d - l + (d/2 - 1)(log d + log V-hat - l)
    //                    - d V-hat e^{-l} / 2 - (d/2) log 2 - lgamma(d/2)
    // Everything that does not involve l = log V is precomputed here.
    const double d = dof_obs_(k);
    chi2_const_obs_(k) = std::log(d) + (0.5 * d - 1.0) * (std::log(d) + log_v_hat_obs_(k)) -
                         0.5 * d * std::numbers::ln2 - std::lgamma(0.5 * d);
  }

  log_lambda_u_ = std::log(config_.sigma_u_prior.rate());
  log_lambda_tau_ = std::log(config_.sigma_tau_prior.rate());
  log_beta_fn_ = std::log(boost::math::beta(config_.phi_prior_a, config_.phi_prior_b));
  beta_lpdf_const_ = -kHalfLog2Pi - std::log(config_.beta_prior_sd);

  ParameterLayout& L = layout_;
  L.n_areas = n_areas;
  L.n_beta = static_cast<std::size_t>(config_.design.cols());
  L.spatial = config_.spatial;
  L.smooth_variance = config_.smooth_variance;
  L.n_observed = observed_.size();
  L.n_gamma = config_.smooth_variance ? 3 + static_cast<std::size_t>(config_.gvf_extra.cols()) : 0;

  std::size_t off = 0;
  L.beta = off;
  off += L.n_beta;
  L.u_unstr = off;
  off += n_areas;
  L.u_spat = off;
  if (L.spatial) off += n_areas;
  L.log_sigma_u = off++;
  L.logit_phi = off;
  if (L.spatial) ++off;
  L.log_v = off;
  if (L.smooth_variance) off += L.n_observed;
  L.gamma = off;
  off += L.n_gamma;
  L.log_sigma_tau = off;
  if (L.smooth_variance) ++off;
  L.dimension = off;

  gamma_mean_.resize(static_cast<Eigen::Index>(L.n_gamma));
  gamma_sd_.resize(static_cast<Eigen::Index>(L.n_gamma));
  gamma_lpdf_const_.resize(static_cast<Eigen::Index>(L.n_gamma));
  for (std::size_t j = 0; j < L.n_gamma; ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    gamma_mean_(i) = j < 3 ? config_.gamma_prior_mean[j] : 0.0;
    gamma_sd_(i) = j < 3 ? config_.gamma_prior_sd[j] : config_.gamma_extra_prior_sd;
    gamma_lpdf_const_(i) = -kHalfLog2Pi - std::log(gamma_sd_(i));
  }
}

std::vector<std::string> AreaModel::parameter_names() const {
  const ParameterLayout& L = layout_;
  std::vector<std::string> names;
  names.reserve(L.dimension);
  for (std::size_t j = 0; j < L.n_beta; ++j) names.push_back("beta[" + std::to_string(j) + "]");
  const auto& areas = data_.direct.areas;
  for (std::size_t a = 0; a < L.n_areas; ++a) names.push_back("u_unstr[" + areas[a].area + "]");
  if (L.spatial) {
    for (std::size_t a = 0; a < L.n_areas; ++a) names.push_back("u_spat[" + areas[a].area + "]");
  }
  names.emplace_back("log_sigma_u");
  if (L.spatial) names.emplace_back("logit_phi");
  if (L.smooth_variance) {
    for (std::size_t a : observed_) names.push_back("log_v[" + areas[a].area + "]");
    for (std::size_t j = 0; j < L.n_gamma; ++j) {
      names.push_back("gamma[" + std::to_string(j) + "]");
    }
    names.emplace_back("log_sigma_tau");
  }
  return names;
}

Eigen::VectorXd AreaModel::pack(const ParameterState& s) const {
  const ParameterLayout& L = layout_;
  auto check = [](const Eigen::VectorXd& v, std::size_t n, const char* what) {
    if (static_cast<std::size_t>(v.size()) != n) {
      throw ValidationError(std::string("parameter block '") + what + "' has size " +
                            std::to_string(v.size()) + ", expected " + std::to_string(n));
    }
  };
  check(s.beta, L.n_beta, "beta");
  check(s.u_unstr, L.n_areas, "u_unstr");
  if (L.spatial) check(s.u_spat, L.n_areas, "u_spat");
  if (L.smooth_variance) {
    check(s.log_v, L.n_observed, "log_v");
    check(s.gamma, L.n_gamma, "gamma");
  }
  Eigen::VectorXd theta(static_cast<Eigen::Index>(L.dimension));
  theta.segment(static_cast<Eigen::Index>(L.beta), s.beta.size()) = s.beta;
  theta.segment(static_cast<Eigen::Index>(L.u_unstr), s.u_unstr.size()) = s.u_unstr;
  if (L.spatial) {
    theta.segment(static_cast<Eigen::Index>(L.u_spat), s.u_spat.size()) = s.u_spat;
    theta(static_cast<Eigen::Index>(L.logit_phi)) = s.logit_phi;
  }
  theta(static_cast<Eigen::Index>(L.log_sigma_u)) = s.log_sigma_u;
  if (L.smooth_variance) {
    theta.segment(static_cast<Eigen::Index>(L.log_v), s.log_v.size()) = s.log_v;
    theta.segment(static_cast<Eigen::Index>(L.gamma), s.gamma.size()) = s.gamma;
    theta(static_cast<Eigen::Index>(L.log_sigma_tau)) = s.log_sigma_tau;
  }
  return theta;
}

ParameterState AreaModel::unpack(const Eigen::VectorXd& theta) const {
  const ParameterLayout& L = layout_;
  if (static_cast<std::size_t>(theta.size()) != L.dimension) {
    throw ValidationError("parameter vector has size " + std::to_string(theta.size()) +
                          ", expected " + std::to_string(L.dimension));
  }
  auto seg = [&](std::size_t off, std::size_t n) -> Eigen::VectorXd {
    return theta.segment(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(n));
  };
  ParameterState s;
  s.beta = seg(L.beta, L.n_beta);
  s.u_unstr = seg(L.u_unstr, L.n_areas);
  s.log_sigma_u = theta(static_cast<Eigen::Index>(L.log_sigma_u));
  if (L.spatial) {
    s.u_spat = seg(L.u_spat, L.n_areas);
    s.logit_phi = theta(static_cast<Eigen::Index>(L.logit_phi));
  }
  if (L.smooth_variance) {
    s.log_v = seg(L.log_v, L.n_observed);
    s.gamma = seg(L.gamma, L.n_gamma);
    s.log_sigma_tau = theta(static_cast<Eigen::Index>(L.log_sigma_tau));
  }
  return s;
}

Eigen::VectorXd AreaModel::spatial_effect(const Eigen::VectorXd& theta) const {
  if (!layout_.spatial) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout_.n_areas));
  Eigen::VectorXd raw = theta.segment(static_cast<Eigen::Index>(layout_.u_spat),
                                      static_cast<Eigen::Index>(layout_.n_areas));
  return component_size_.size() == 1 ? constrain_spatial(raw) : constrain_spatial(raw, component_);
}

Eigen::VectorXd AreaModel::area_effect(const Eigen::VectorXd& theta) const {
  const ParameterLayout& L = layout_;
  const double sigma_u = std::exp(theta(static_cast<Eigen::Index>(L.log_sigma_u)));
  Eigen::VectorXd u1 =
      theta.segment(static_cast<Eigen::Index>(L.u_unstr), static_cast<Eigen::Index>(L.n_areas));
  if (!L.spatial) return sigma_u * u1;
  const double phi = logistic(theta(static_cast<Eigen::Index>(L.logit_phi)));
  return sigma_u * (std::sqrt(1.0 - phi) * u1 + std::sqrt(phi) * spatial_effect(theta));
}

Eigen::VectorXd AreaModel::linear_predictor(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd beta = theta.segment(static_cast<Eigen::Index>(layout_.beta),
                                       static_cast<Eigen::Index>(layout_.n_beta));
  return config_.design * beta + area_effect(theta);
}

Eigen::VectorXd AreaModel::latent_proportions(const Eigen::VectorXd& theta) const {
  return linear_predictor(theta).unaryExpr([](double x) { return logistic(x); });
}

template <bool WithGradient, bool NonCentered>
double AreaModel::evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad,
                           DensityTerms* terms) const {
  const ParameterLayout& L = layout_;
  if (static_cast<std::size_t>(theta.size()) != L.dimension) {
    throw ValidationError("parameter vector has size " + std::to_string(theta.size()) +
                          ", expected " + std::to_string(L.dimension));
  }
  const auto A = static_cast<Eigen::Index>(L.n_areas);
  const auto nb = static_cast<Eigen::Index>(L.n_beta);
  const auto o_beta = static_cast<Eigen::Index>(L.beta);
  const auto o_u1 = static_cast<Eigen::Index>(L.u_unstr);
  const auto o_u2 = static_cast<Eigen::Index>(L.u_spat);
  const auto o_lsu = static_cast<Eigen::Index>(L.log_sigma_u);
  const auto o_lphi = static_cast<Eigen::Index>(L.logit_phi);
  const auto o_lv = static_cast<Eigen::Index>(L.log_v);
  const auto o_gamma = static_cast<Eigen::Index>(L.gamma);
  const auto o_lst = static_cast<Eigen::Index>(L.log_sigma_tau);

  DensityTerms t;
  if constexpr (WithGradient) grad->setZero(theta.size());

  const auto beta = theta.segment(o_beta, nb);
  const auto u1 = theta.segment(o_u1, A);
  const double log_sigma_u = theta(o_lsu);
  const double sigma_u = std::exp(log_sigma_u);

  double phi = 0.0;
  double sqrt_phi = 0.0;
  double sqrt_1mphi = 1.0;
  Eigen::VectorXd centered;
  if (L.spatial) {
    const double lp = theta(o_lphi);
    phi = logistic(lp);
    sqrt_phi = std::sqrt(phi);
    sqrt_1mphi = std::sqrt(logistic(-lp));
    centered = spatial_effect(theta);
  }

  Eigen::VectorXd u = L.spatial ? Eigen::VectorXd(sigma_u * (sqrt_1mphi * u1 + sqrt_phi * centered))
                                : Eigen::VectorXd(sigma_u * u1);
  Eigen::VectorXd eta = config_.design * beta + u;

  Eigen::VectorXd g_eta;
  if constexpr (WithGradient) g_eta = Eigen::VectorXd::Zero(A);

  const bool js = L.smooth_variance;
  double sigma_tau = 0.0;
  double inv_tau2 = 0.0;
  if (js) {
    sigma_tau = std::exp(theta(o_lst));
    inv_tau2 = 1.0 / (sigma_tau * sigma_tau);
  }
  const auto n_extra = static_cast<Eigen::Index>(config_.gvf_extra.cols());

  // Likelihood over observed areas.
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(observed_.size()); ++k) {
    const auto a = static_cast<Eigen::Index>(observed_[static_cast<std::size_t>(k)]);
    const double e = eta(a);
    // log p = -softplus(-e) and log(p (1 - p)) = -2 softplus(-e) - e, without cancellation.
    const double sp = softplus(-e);
    const double p = std::exp(-sp);
    const double resid = p_hat_obs_(k) - p;
    if (!js) {
      const double v = v_hat_obs_(k);
      t.mean_sampling += -kHalfLog2Pi - 0.5 * log_v_hat_obs_(k) - 0.5 * resid * resid / v;
      if constexpr (WithGradient) g_eta(a) += resid / v * p * (1.0 - p);
      continue;
    }

    const double log_pq = -2.0 * sp - e;
    double f = theta(o_gamma) + theta(o_gamma + 1) * log_pq + theta(o_gamma + 2) * log_n_obs_(k);
    for (Eigen::Index j = 0; j < n_extra; ++j) f += theta(o_gamma + 3 + j) * config_.gvf_extra(a, j);
    double log_v;
    double r = 0.0;  // log V - f (natural) or its standardized value (non-centered)
    if constexpr (NonCentered) {
      r = theta(o_lv + k);
      log_v = f + sigma_tau * r;
    } else {
      log_v = theta(o_lv + k);
      r = log_v - f;
    }
    const double inv_v = std::exp(-log_v);
    const double d = dof_obs_(k);
    const double ratio = v_hat_obs_(k) * inv_v;
    t.mean_sampling += -kHalfLog2Pi - 0.5 * log_v - 0.5 * resid * resid * inv_v;
    t.variance_sampling += chi2_const_obs_(k) - 0.5 * d * log_v - 0.5 * d * ratio;
    if constexpr (NonCentered) {
      // Includes the Jacobian sigma_tau of log V = f + sigma_tau z.
      t.variance_linking += -kHalfLog2Pi - 0.5 * r * r;
    } else {
      t.variance_linking += -kHalfLog2Pi - theta(o_lst) - 0.5 * r * r * inv_tau2;
    }

    if constexpr (WithGradient) {
      g_eta(a) += resid * inv_v * p * (1.0 - p);
      // d/d log V of the two sampling terms.
      const double h = -0.5 + 0.5 * resid * resid * inv_v - 0.5 * d + 0.5 * d * ratio;
      // Weight on d f for every parameter f depends on.
      double w;
      if constexpr (NonCentered) {
        (*grad)(o_lv + k) += sigma_tau * h - r;
        (*grad)(o_lst) += sigma_tau * r * h;
        w = h;
      } else {
        const double r_scaled = r * inv_tau2;
        (*grad)(o_lv + k) += h - r_scaled;
        (*grad)(o_lst) += -1.0 + r * r * inv_tau2;
        w = r_scaled;
      }
      g_eta(a) += w * theta(o_gamma + 1) * (1.0 - 2.0 * p);
      (*grad)(o_gamma) += w;
      (*grad)(o_gamma + 1) += w * log_pq;
      (*grad)(o_gamma + 2) += w * log_n_obs_(k);
      for (Eigen::Index j = 0; j < n_extra; ++j) {
        (*grad)(o_gamma + 3 + j) += w * config_.gvf_extra(a, j);
      }
    }
  }

  // Latent effects.
  t.latent_prior += -0.5 * u1.squaredNorm() - static_cast<double>(A) * kHalfLog2Pi;
  if (L.spatial) {
    const Eigen::VectorXd q_c = data_.icar->q_star * centered;
    t.latent_prior += -0.5 * centered.dot(q_c);
    // The mean of each component of the raw vector gets a unit normal so the
    // redundant direction is proper; the centered field is unaffected.
    const auto raw = theta.segment(o_u2, A);
    if (component_size_.size() == 1) {
      const double mean = raw.mean();
      t.latent_prior += -0.5 * static_cast<double>(A) * mean * mean;
      if constexpr (WithGradient) {
        Eigen::VectorXd g_c = sigma_u * sqrt_phi * g_eta - q_c;
        grad->segment(o_u2, A) = (g_c.array() - g_c.mean() - mean).matrix();
      }
    } else {
      std::vector<double> comp_mean(component_size_.size(), 0.0);
      for (Eigen::Index i = 0; i < A; ++i) comp_mean[component_[static_cast<std::size_t>(i)]] += raw(i);
      for (std::size_t c = 0; c < comp_mean.size(); ++c) {
        comp_mean[c] /= component_size_[c];
        t.latent_prior += -0.5 * component_size_[c] * comp_mean[c] * comp_mean[c];
      }
      if constexpr (WithGradient) {
        Eigen::VectorXd g_raw = constrain_spatial(Eigen::VectorXd(sigma_u * sqrt_phi * g_eta - q_c),
                                                  component_);
        for (Eigen::Index i = 0; i < A; ++i) {
          g_raw(i) -= comp_mean[component_[static_cast<std::size_t>(i)]];
        }
        grad->segment(o_u2, A) = g_raw;
      }
    }
  }

  // Hyperpriors, each including the Jacobian of its unconstrained transform.
  const double lambda_u = config_.sigma_u_prior.rate();
  t.hyper_prior += log_lambda_u_ - lambda_u * sigma_u + log_sigma_u;
  {
    const double inv_sd = 1.0 / config_.beta_prior_sd;
    for (Eigen::Index j = 0; j < nb; ++j) {
      const double z = (beta(j) - config_.beta_prior_mean) * inv_sd;
      t.hyper_prior += beta_lpdf_const_ - 0.5 * z * z;
    }
  }
  if (L.spatial) {
    const double lp = theta(o_lphi);
    t.hyper_prior += -config_.phi_prior_a * softplus(-lp) - config_.phi_prior_b * softplus(lp) -
                     log_beta_fn_;
  }
  if (js) {
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(L.n_gamma); ++j) {
      const double z = (theta(o_gamma + j) - gamma_mean_(j)) / gamma_sd_(j);
      t.hyper_prior += gamma_lpdf_const_(j) - 0.5 * z * z;
    }
    const double lambda_tau = config_.sigma_tau_prior.rate();
    t.hyper_prior += log_lambda_tau_ - lambda_tau * sigma_tau + theta(o_lst);
  }

  if constexpr (WithGradient) {
    const double inv_var_beta = 1.0 / (config_.beta_prior_sd * config_.beta_prior_sd);
    grad->segment(o_beta, nb) =
        config_.design.transpose() * g_eta -
        ((beta.array() - config_.beta_prior_mean) * inv_var_beta).matrix();
    grad->segment(o_u1, A) = sigma_u * sqrt_1mphi * g_eta - u1;
    (*grad)(o_lsu) = g_eta.dot(u) + 1.0 - lambda_u * sigma_u;
    if (L.spatial) {
      const double one_m_phi = 1.0 - phi;
      // d u / d logit(phi) = sigma_u phi (1 - phi) (c / (2 sqrt phi) - u1 / (2 sqrt(1 - phi)))
      const double du2 = 0.5 * sigma_u * sqrt_phi * one_m_phi;
      const double du1 = -0.5 * sigma_u * phi * sqrt_1mphi;
      (*grad)(o_lphi) = du2 * g_eta.dot(centered) + du1 * g_eta.dot(u1) +
                        config_.phi_prior_a * one_m_phi - config_.phi_prior_b * phi;
    }
    if (js) {
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(L.n_gamma); ++j) {
        const double sd = gamma_sd_(j);
        (*grad)(o_gamma + j) += -(theta(o_gamma + j) - gamma_mean_(j)) / (sd * sd);
      }
      (*grad)(o_lst) += 1.0 - config_.sigma_tau_prior.rate() * sigma_tau;
    }
  }

  if (terms) *terms = t;
  return t.total();
}

double AreaModel::log_density(const Eigen::VectorXd& theta) const {
  return evaluate<false, false>(theta, nullptr, nullptr);
}

double AreaModel::log_density_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
  return evaluate<true, false>(theta, &grad, nullptr);
}

DensityTerms AreaModel::terms(const Eigen::VectorXd& theta) const {
  DensityTerms t;
  evaluate<false, false>(theta, nullptr, &t);
  return t;
}

void AreaModel::gvf_means(const Eigen::VectorXd& theta, Eigen::VectorXd& f,
                          Eigen::VectorXd* df_deta) const {
  const ParameterLayout& L = layout_;
  const Eigen::VectorXd eta = linear_predictor(theta);
  const auto o_gamma = static_cast<Eigen::Index>(L.gamma);
  const auto n_obs = static_cast<Eigen::Index>(observed_.size());
  const auto n_extra = static_cast<Eigen::Index>(config_.gvf_extra.cols());
  f.resize(n_obs);
  if (df_deta) df_deta->resize(n_obs);
  for (Eigen::Index k = 0; k < n_obs; ++k) {
    const auto a = static_cast<Eigen::Index>(observed_[static_cast<std::size_t>(k)]);
    const double e = eta(a);
    const double log_pq = -softplus(-e) - softplus(e);
    double v = theta(o_gamma) + theta(o_gamma + 1) * log_pq + theta(o_gamma + 2) * log_n_obs_(k);
    for (Eigen::Index j = 0; j < n_extra; ++j) v += theta(o_gamma + 3 + j) * config_.gvf_extra(a, j);
    f(k) = v;
    if (df_deta) (*df_deta)(k) = theta(o_gamma + 1) * (1.0 - 2.0 * logistic(e));
  }
}

Eigen::VectorXd AreaModel::to_sampling(const Eigen::VectorXd& theta) const {
  if (static_cast<std::size_t>(theta.size()) != layout_.dimension) {
    throw ValidationError("parameter vector has the wrong size");
  }
  if (!layout_.smooth_variance) return theta;
  Eigen::VectorXd f;
  gvf_means(theta, f, nullptr);
  const double sigma_tau = std::exp(theta(static_cast<Eigen::Index>(layout_.log_sigma_tau)));
  Eigen::VectorXd xi = theta;
  auto block = xi.segment(static_cast<Eigen::Index>(layout_.log_v), f.size());
  block = (block - f) / sigma_tau;
  return xi;
}

Eigen::VectorXd AreaModel::from_sampling(const Eigen::VectorXd& xi) const {
  if (static_cast<std::size_t>(xi.size()) != layout_.dimension) {
    throw ValidationError("parameter vector has the wrong size");
  }
  if (!layout_.smooth_variance) return xi;
  Eigen::VectorXd f;
  gvf_means(xi, f, nullptr);
  const double sigma_tau = std::exp(xi(static_cast<Eigen::Index>(layout_.log_sigma_tau)));
  Eigen::VectorXd theta = xi;
  auto block = theta.segment(static_cast<Eigen::Index>(layout_.log_v), f.size());
  block = f + sigma_tau * block;
  return theta;
}

double AreaModel::sampling_log_density_gradient(const Eigen::VectorXd& xi,
                                                Eigen::VectorXd& grad) const {
  if (!layout_.smooth_variance) return evaluate<true, false>(xi, &grad, nullptr);
  return evaluate<true, true>(xi, &grad, nullptr);
}

double AreaModel::sampling_log_density(const Eigen::VectorXd& xi) const {
  if (!layout_.smooth_variance) return evaluate<false, false>(xi, nullptr, nullptr);
  return evaluate<false, true>(xi, nullptr, nullptr);
}

Eigen::VectorXd latent_proportions(const ParameterState& state, const AreaModel& model) {
  return model.latent_proportions(model.pack(state));
}

double log_posterior(const ParameterState& state, const AreaModel& model) {
  const double lp = model.log_density(model.pack(state));
  if (!std::isfinite(lp)) throw DomainError("log posterior is not finite at this state");
  return lp;
}

Eigen::VectorXd grad_log_posterior(const ParameterState& state, const AreaModel& model) {
  Eigen::VectorXd g;
  const double lp = model.log_density_gradient(model.pack(state), g);
  if (!std::isfinite(lp) || !g.allFinite()) {
    throw DomainError("log posterior gradient is not finite at this state");
  }
  return g;
}

}  // namespace saekit::model
