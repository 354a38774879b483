#ifndef SAEKIT_SAMPLER_HPP
#define SAEKIT_SAMPLER_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "saekit/diagnostics.hpp"
#include "saekit/rng.hpp"

namespace saekit::sampler {

/// Log density and gradient at x; must be reentrant. Non-finite values mark
/// x as outside the support.
using LogDensity = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

enum class Algorithm {
  nuts,         // multinomial dynamic HMC with generalized no-U-turn criterion
  random_walk,  // adaptive random-walk Metropolis, for debugging
};

struct SamplerConfig {
  std::size_t n_chains = 4;
  std::size_t n_warmup = 1000;
  std::size_t n_samples = 1000;
  std::uint64_t seed = 1;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  double init_radius = 2.0;  // inits uniform on (-r, r) per coordinate
  Algorithm algorithm = Algorithm::nuts;
  std::size_t workers = 1;  // chains run concurrently; results do not depend on this
  int max_init_attempts = 100;
  double divergence_flag_rate = 0.10;

  void validate() const;
};

struct ChainStats {
  double step_size = 0;
  Eigen::VectorXd inv_metric;
  std::size_t divergences = 0;   // post-warmup
  double mean_accept = 0;        // post-warmup mean acceptance statistic
  double mean_tree_depth = 0;    // post-warmup
  std::size_t leapfrog_steps = 0;  // all iterations
};

/// Post-warmup draws, chain-major: draws[(chain * n_samples + iter) * dim + j].
struct PosteriorSamples {
  std::size_t n_chains = 0;
  std::size_t n_samples = 0;
  std::size_t dim = 0;
  std::vector<std::string> names;
  std::vector<double> draws;
  std::vector<ChainStats> chains;

  std::vector<Diagnostic> rhat;
  std::vector<Diagnostic> ess;
  std::size_t divergences = 0;
  bool divergence_flag = false;

  Eigen::Map<const Eigen::VectorXd> draw(std::size_t chain, std::size_t iter) const;
  /// Draws of parameter j split by chain.
  std::vector<std::vector<double>> parameter_chains(std::size_t j) const;
  std::size_t total_draws() const noexcept { return n_chains * n_samples; }
  double max_rhat() const;
  double min_ess() const;
};

/// Runs independent chains from jittered inits, adapts step size by dual
/// averaging and a diagonal metric over doubling windows during warmup, and
/// returns post-warmup draws with split R-hat and ESS filled in. Output is a
/// deterministic function of (log density, dim, config) for any worker count.
/// Throws SamplerError if no finite initial point is found.
PosteriorSamples run_chains(const LogDensity& log_density, std::size_t dim,
                            const SamplerConfig& config, std::vector<std::string> names = {});

/// Fills rhat and ess for every parameter.
void compute_diagnostics(PosteriorSamples& samples);

/// Position, momentum, gradient and log density at one point of a trajectory.
struct PhasePoint {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  Eigen::VectorXd grad;
  double log_density = 0;
};

/// One leapfrog step of size eps (negative integrates backwards) under the
/// Euclidean metric with diagonal inverse mass inv_metric.
void leapfrog(const LogDensity& f, const Eigen::VectorXd& inv_metric, double eps, PhasePoint& z);

double hamiltonian(const PhasePoint& z, const Eigen::VectorXd& inv_metric);

/// Nesterov dual averaging of log step size toward a target acceptance rate.
class DualAverage {
 public:
  explicit DualAverage(double target, double gamma = 0.05, double t0 = 10, double kappa = 0.75)
      : target_(target), gamma_(gamma), t0_(t0), kappa_(kappa) {}

  void set_mu(double mu) noexcept { mu_ = mu; }
  void restart() noexcept {
    counter_ = 0;
    s_bar_ = 0;
    x_bar_ = 0;
  }
  /// Updates with one acceptance statistic; returns the next step size.
  double learn(double accept_stat);
  double final_step_size() const { return std::exp(x_bar_); }

 private:
  double target_;
  double gamma_;
  double t0_;
  double kappa_;
  double mu_ = std::log(10.0);
  double counter_ = 0;
  double s_bar_ = 0;
  double x_bar_ = 0;
};

/// Warmup schedule for metric adaptation: an initial fast buffer, slow
/// windows doubling in length, and a terminal fast buffer.
class WindowSchedule {
 public:
  explicit WindowSchedule(std::size_t n_warmup, std::size_t init_buffer = 75,
                          std::size_t term_buffer = 50, std::size_t base_window = 25);

  /// True when iteration `counter` (0-based) feeds the metric estimator.
  bool in_window() const;
  /// True when the current window closes at this iteration.
  bool window_end() const;
  void advance();  // call once per iteration after the checks above
  bool enabled() const noexcept { return enabled_; }

 private:
  void compute_next_window();

  std::size_t n_warmup_;
  std::size_t init_buffer_;
  std::size_t term_buffer_;
  std::size_t window_size_;
  std::size_t next_window_;
  std::size_t counter_ = 0;
  bool enabled_ = true;
};

}  // namespace saekit::sampler

#endif  // SAEKIT_SAMPLER_HPP
