#ifndef SAEKIT_MODEL_HPP
#define SAEKIT_MODEL_HPP

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saekit/graph.hpp"
#include "saekit/survey.hpp"

namespace saekit::model {

/// Penalized-complexity prior on a standard deviation: exponential with
/// P(sigma > upper) = tail_prob, i.e. rate -log(tail_prob) / upper.
struct PcPrior {
  double upper = 1.0;
  double tail_prob = 0.01;

  double rate() const { return -std::log(tail_prob) / upper; }
};

/// Model variant switches and prior settings.
struct ModelConfig {
  bool spatial = true;          // BYM2 linking prior (false: iid)
  bool smooth_variance = true;  // joint smoothing (false: V_a fixed at V-hat)

  Eigen::MatrixXd design;     // A x (p+1); first column is the intercept
  Eigen::MatrixXd gvf_extra;  // A x k extra GVF covariates; k may be 0

  PcPrior sigma_u_prior{1.0, 0.01};
  PcPrior sigma_tau_prior{1.0, 0.01};
  double beta_prior_mean = 0.0;
  double beta_prior_sd = std::sqrt(1000.0);  // variance 1000
  std::array<double, 3> gamma_prior_mean{0.0, 1.0, -1.0};
  std::array<double, 3> gamma_prior_sd{1.0, 0.5, 0.5};
  double gamma_extra_prior_sd = 1.0;
  double phi_prior_a = 0.5;
  double phi_prior_b = 0.5;
  double interval_level = 0.90;

  /// Intercept-only design with default priors.
  static ModelConfig intercept_only(std::size_t n_areas, bool spatial, bool smooth_variance);

  /// Throws ValidationError on rank-deficient design, bad priors or shapes.
  void validate(std::size_t n_areas) const;
};

enum class Method {
  hajek,
  unmatched_ms,
  spatial_unmatched_ms,
  unmatched_js,
  spatial_unmatched_js,
};

std::string_view method_label(Method method);
Method method_of(const ModelConfig& config);
/// The four model-based variants in reporting order.
std::array<Method, 4> model_methods();

/// Likelihood inputs: direct estimates and, for spatial variants, the scaled
/// ICAR structure over the same area order.
struct ModelData {
  survey::DirectEstimates direct;
  std::optional<graph::ScaledIcarPrecision> icar;
};

/// Offsets of each block in the unconstrained parameter vector.
struct ParameterLayout {
  std::size_t n_areas = 0;
  std::size_t n_beta = 0;
  std::size_t n_gamma = 0;  // 3 + extra GVF covariates, JS only
  std::size_t n_observed = 0;
  bool spatial = false;
  bool smooth_variance = false;

  std::size_t beta = 0;
  std::size_t u_unstr = 0;
  std::size_t u_spat = 0;
  std::size_t log_sigma_u = 0;
  std::size_t logit_phi = 0;
  std::size_t log_v = 0;
  std::size_t gamma = 0;
  std::size_t log_sigma_tau = 0;
  std::size_t dimension = 0;
};

/// Structured view of a parameter vector. u_spat is the raw spatial vector;
/// the density always works with its sum-to-zero projection. log_v holds one
/// entry per observed area (AreaModel::observed_areas()).
struct ParameterState {
  Eigen::VectorXd beta;
  Eigen::VectorXd u_unstr;
  Eigen::VectorXd u_spat;
  double log_sigma_u = 0.0;
  double logit_phi = 0.0;
  Eigen::VectorXd log_v;
  Eigen::VectorXd gamma;
  double log_sigma_tau = 0.0;
};

/// Additive pieces of the log posterior, for inspection and tests.
struct DensityTerms {
  double mean_sampling = 0;
  double variance_sampling = 0;
  double variance_linking = 0;
  double latent_prior = 0;
  double hyper_prior = 0;

  double total() const {
    return mean_sampling + variance_sampling + variance_linking + latent_prior + hyper_prior;
  }
};

/// Joint posterior of one area-level model variant.
///
/// Mean model: p-hat_a ~ N(p_a, V_a) with logit(p) = X beta + u and
/// u = sigma_u (sqrt(1 - phi) u1 + sqrt(phi) u2*) (BYM2) or u = sigma_u u1.
/// Joint smoothing adds d_a V-hat_a / V_a ~ chi^2_{d_a} and
/// log V_a ~ N(gamma0 + gamma1 log(p_a (1 - p_a)) + gamma2 log n_a, sigma_tau^2).
///
/// Areas without a usable direct estimate (unsampled, single cluster,
/// p-hat in {0, 1}, or V-hat = 0) contribute no likelihood and carry no
/// log_v entry; their p_a is still defined through the linking model.
///
/// Hyperparameters are sampled as log sigma_u, logit phi and log sigma_tau
/// with the matching Jacobians. Thread-safe for concurrent const use.
class AreaModel {
 public:
  AreaModel(ModelConfig config, ModelData data);

  const ModelConfig& config() const noexcept { return config_; }
  const ModelData& data() const noexcept { return data_; }
  const ParameterLayout& layout() const noexcept { return layout_; }
  std::size_t dimension() const noexcept { return layout_.dimension; }
  std::size_t area_count() const noexcept { return layout_.n_areas; }
  Method method() const { return method_of(config_); }

  /// Areas contributing to the likelihood, ascending.
  const std::vector<std::size_t>& observed_areas() const noexcept { return observed_; }
  std::vector<std::string> parameter_names() const;

  Eigen::VectorXd pack(const ParameterState& state) const;
  ParameterState unpack(const Eigen::VectorXd& theta) const;

  double log_density(const Eigen::VectorXd& theta) const;
  /// Log density and its gradient in one pass; grad is resized as needed.
  double log_density_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const;
  DensityTerms terms(const Eigen::VectorXd& theta) const;

  /// Sampling parameterization: the natural vector with the log_v block
  /// replaced by standardized deviations (log V_a - f_a) / sigma_tau, which
  /// removes the funnel between log V and sigma_tau. Identical to the natural
  /// vector for mean smoothing.
  Eigen::VectorXd to_sampling(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd from_sampling(const Eigen::VectorXd& xi) const;
  /// Log density in the sampling parameterization (natural log density plus
  /// n_observed log sigma_tau) and its gradient.
  double sampling_log_density_gradient(const Eigen::VectorXd& xi, Eigen::VectorXd& grad) const;
  double sampling_log_density(const Eigen::VectorXd& xi) const;

  /// Sum-to-zero spatial field and total area effect for one parameter vector.
  Eigen::VectorXd spatial_effect(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd area_effect(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd linear_predictor(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd latent_proportions(const Eigen::VectorXd& theta) const;

 private:
  /// GVF means f_a over observed areas, and d f_a / d eta_a.
  void gvf_means(const Eigen::VectorXd& theta, Eigen::VectorXd& f, Eigen::VectorXd* df_deta) const;
  template <bool WithGradient, bool NonCentered>
  double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad, DensityTerms* terms) const;

  ModelConfig config_;
  ModelData data_;
  ParameterLayout layout_;
  std::vector<std::size_t> observed_;
  std::vector<std::size_t> component_;    // per-area component label (spatial)
  std::vector<double> component_size_;    // areas per component
  Eigen::VectorXd p_hat_obs_;
  Eigen::VectorXd v_hat_obs_;
  Eigen::VectorXd log_v_hat_obs_;
  Eigen::VectorXd dof_obs_;
  Eigen::VectorXd log_n_obs_;
  Eigen::VectorXd chi2_const_obs_;  // variance sampling terms free of V_a
  // Prior constants.
  double log_lambda_u_ = 0;
  double log_lambda_tau_ = 0;
  double log_beta_fn_ = 0;
  double beta_lpdf_const_ = 0;
  Eigen::VectorXd gamma_mean_;
  Eigen::VectorXd gamma_sd_;
  Eigen::VectorXd gamma_lpdf_const_;
};

inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

/// Generalized variance function gamma0 + gamma1 log(p(1-p)) + gamma2 log n
/// (+ z' gamma_extra). gamma holds 3 + z.size() entries. Throws DomainError
/// unless 0 < p < 1 and n >= 1.
double gvf_mean(double p, double n, std::span<const double> gamma,
                std::span<const double> z = {});

/// Projection onto the sum-to-zero subspace: u_raw - mean(u_raw).
Eigen::VectorXd constrain_spatial(const Eigen::VectorXd& u_raw);
/// Per-component centering; components[i] labels area i.
Eigen::VectorXd constrain_spatial(const Eigen::VectorXd& u_raw,
                                  const std::vector<std::size_t>& components);

Eigen::VectorXd latent_proportions(const ParameterState& state, const AreaModel& model);
double log_posterior(const ParameterState& state, const AreaModel& model);
Eigen::VectorXd grad_log_posterior(const ParameterState& state, const AreaModel& model);

}  // namespace saekit::model

#endif  // SAEKIT_MODEL_HPP
