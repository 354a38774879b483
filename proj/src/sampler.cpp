#include "saekit/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "saekit/error.hpp"
#include "saekit/parallel.hpp"

namespace saekit::sampler {

using Eigen::VectorXd;

void SamplerConfig::validate() const {
  if (n_chains < 1) throw ValidationError("n_chains must be at least 1");
  if (n_samples < 1) throw ValidationError("n_samples must be at least 1");
  if (!(target_accept > 0 && target_accept < 1)) {
    throw ValidationError("target_accept must lie in (0, 1)");
  }
  if (max_tree_depth < 1 || max_tree_depth > 20) {
    throw ValidationError("max_tree_depth must lie in [1, 20]");
  }
  if (!(init_radius >= 0) || !std::isfinite(init_radius)) {
    throw ValidationError("init_radius must be finite and nonnegative");
  }
  if (max_init_attempts < 1) throw ValidationError("max_init_attempts must be positive");
  if (!(divergence_flag_rate >= 0 && divergence_flag_rate <= 1)) {
    throw ValidationError("divergence_flag_rate must lie in [0, 1]");
  }
}

Eigen::Map<const VectorXd> PosteriorSamples::draw(std::size_t chain, std::size_t iter) const {
  if (chain >= n_chains || iter >= n_samples) throw ValidationError("draw index out of range");
  return Eigen::Map<const VectorXd>(draws.data() + (chain * n_samples + iter) * dim,
                                    static_cast<Eigen::Index>(dim));
}

std::vector<std::vector<double>> PosteriorSamples::parameter_chains(std::size_t j) const {
  if (j >= dim) throw ValidationError("parameter index out of range");
  std::vector<std::vector<double>> out(n_chains, std::vector<double>(n_samples));
  for (std::size_t c = 0; c < n_chains; ++c) {
    for (std::size_t i = 0; i < n_samples; ++i) out[c][i] = draws[(c * n_samples + i) * dim + j];
  }
  return out;
}

double PosteriorSamples::max_rhat() const {
  double m = 1.0;
  for (const auto& r : rhat) {
    if (!r.flagged) m = std::max(m, r.value);
  }
  return m;
}

double PosteriorSamples::min_ess() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& e : ess) {
    if (!e.flagged) m = std::min(m, e.value);
  }
  return m;
}

void compute_diagnostics(PosteriorSamples& s) {
  s.rhat.assign(s.dim, {});
  s.ess.assign(s.dim, {});
  if (s.n_samples < 4) return;
  for (std::size_t j = 0; j < s.dim; ++j) {
    const auto chains = s.parameter_chains(j);
    s.rhat[j] = split_rhat(chains);
    s.ess[j] = effective_sample_size(chains);
  }
}

void leapfrog(const LogDensity& f, const VectorXd& inv_metric, double eps, PhasePoint& z) {
  z.p += 0.5 * eps * z.grad;
  z.q += eps * inv_metric.cwiseProduct(z.p);
  z.log_density = f(z.q, z.grad);
  z.p += 0.5 * eps * z.grad;
}

double hamiltonian(const PhasePoint& z, const VectorXd& inv_metric) {
  return -z.log_density + 0.5 * z.p.dot(inv_metric.cwiseProduct(z.p));
}

double DualAverage::learn(double accept_stat) {
  counter_ += 1;
  accept_stat = std::min(accept_stat, 1.0);
  const double eta = 1.0 / (counter_ + t0_);
  s_bar_ = (1.0 - eta) * s_bar_ + eta * (target_ - accept_stat);
  const double x = mu_ - s_bar_ * std::sqrt(counter_) / gamma_;
  const double x_eta = std::pow(counter_, -kappa_);
  x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
  return std::exp(x);
}

WindowSchedule::WindowSchedule(std::size_t n_warmup, std::size_t init_buffer,
                               std::size_t term_buffer, std::size_t base_window)
    : n_warmup_(n_warmup),
      init_buffer_(init_buffer),
      term_buffer_(term_buffer),
      window_size_(base_window) {
  if (n_warmup < 20) {
    enabled_ = false;
    next_window_ = 0;
    return;
  }
  if (init_buffer + base_window + term_buffer > n_warmup) {
    init_buffer_ = static_cast<std::size_t>(0.15 * static_cast<double>(n_warmup));
    term_buffer_ = static_cast<std::size_t>(0.1 * static_cast<double>(n_warmup));
    window_size_ = n_warmup - (init_buffer_ + term_buffer_);
  }
  next_window_ = init_buffer_ + window_size_ - 1;
}

bool WindowSchedule::in_window() const {
  return enabled_ && counter_ >= init_buffer_ && counter_ < n_warmup_ - term_buffer_ &&
         counter_ != n_warmup_;
}

bool WindowSchedule::window_end() const {
  return enabled_ && counter_ == next_window_ && counter_ != n_warmup_;
}

void WindowSchedule::advance() {
  if (window_end()) compute_next_window();
  ++counter_;
}

void WindowSchedule::compute_next_window() {
  const std::size_t last = n_warmup_ - term_buffer_ - 1;
  if (next_window_ == last) return;
  window_size_ *= 2;
  next_window_ = counter_ + window_size_;
  if (next_window_ != last && next_window_ + 2 * window_size_ >= n_warmup_ - term_buffer_) {
    next_window_ = last;
  }
}

namespace {

constexpr double kMaxDeltaH = 1000.0;

double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// Running mean and variance of the positions in one adaptation window.
class Welford {
 public:
  explicit Welford(std::size_t dim) : mean_(VectorXd::Zero(static_cast<Eigen::Index>(dim))),
                                      m2_(VectorXd::Zero(static_cast<Eigen::Index>(dim))) {}
  void add(const VectorXd& x) {
    ++n_;
    const VectorXd delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta.cwiseProduct(x - mean_);
  }
  std::size_t count() const { return n_; }
  VectorXd variance() const { return m2_ / (static_cast<double>(n_) - 1.0); }
  void restart() {
    n_ = 0;
    mean_.setZero();
    m2_.setZero();
  }

 private:
  std::size_t n_ = 0;
  VectorXd mean_;
  VectorXd m2_;
};

struct Transition {
  double accept_stat = 0;
  int depth = 0;
  std::size_t n_leapfrog = 0;
  bool divergent = false;
};

class Chain {
 public:
  Chain(const LogDensity& f, std::size_t dim, const SamplerConfig& cfg, std::uint64_t seed)
      : f_(f), cfg_(cfg), rng_(seed),
        inv_metric_(VectorXd::Ones(static_cast<Eigen::Index>(dim))),
        dim_(dim) {}

  void initialize() {
    const auto d = static_cast<Eigen::Index>(dim_);
    z_.q.resize(d);
    z_.p = VectorXd::Zero(d);
    z_.grad.resize(d);
    for (int attempt = 0; attempt < cfg_.max_init_attempts; ++attempt) {
      for (Eigen::Index j = 0; j < d; ++j) {
        z_.q[j] = rng_.uniform(-cfg_.init_radius, cfg_.init_radius);
      }
      z_.log_density = eval(z_.q, z_.grad);
      if (std::isfinite(z_.log_density) && z_.grad.allFinite()) return;
    }
    std::ostringstream msg;
    msg << "no finite initial value after " << cfg_.max_init_attempts << " attempts";
    throw SamplerError(msg.str());
  }

  double eval(const VectorXd& q, VectorXd& grad) const {
    double lp;
    try {
      lp = f_(q, grad);
    } catch (const DomainError&) {
      return -std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
    return lp;
  }

  void sample_momentum() {
    for (Eigen::Index j = 0; j < z_.p.size(); ++j) {
      z_.p[j] = rng_.normal() / std::sqrt(inv_metric_[j]);
    }
  }

  double hamilton(const PhasePoint& z) const {
    if (!std::isfinite(z.log_density)) return std::numeric_limits<double>::infinity();
    return hamiltonian(z, inv_metric_);
  }

  void step(PhasePoint& z, double eps) const {
    z.p += 0.5 * eps * z.grad;
    z.q += eps * inv_metric_.cwiseProduct(z.p);
    z.log_density = eval(z.q, z.grad);
    if (!std::isfinite(z.log_density)) return;
    z.p += 0.5 * eps * z.grad;
  }

  // Doubles or halves the step size until a single leapfrog step crosses
  // an acceptance probability of 0.8.
  void init_step_size() {
    if (!(eps_ > 0) || eps_ > 1e7) return;
    const PhasePoint init = z_;
    auto trial = [&] {
      z_ = init;
      sample_momentum();
      const double h0 = hamilton(z_);
      step(z_, eps_);
      double h = hamilton(z_);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      return h0 - h;
    };
    const double delta = trial();
    const int direction = delta > std::log(0.8) ? 1 : -1;
    for (;;) {
      const double dh = trial();
      if (direction == 1 && !(dh > std::log(0.8))) break;
      if (direction == -1 && !(dh < std::log(0.8))) break;
      eps_ = direction == 1 ? 2 * eps_ : 0.5 * eps_;
      if (eps_ > 1e7) throw SamplerError("step size diverged during initialization");
      if (eps_ == 0) throw SamplerError("step size collapsed to zero during initialization");
    }
    z_ = init;
  }

  static bool criterion(const VectorXd& p_sharp_minus, const VectorXd& p_sharp_plus,
                        const VectorXd& rho) {
    return p_sharp_plus.dot(rho) > 0 && p_sharp_minus.dot(rho) > 0;
  }

  // Recursive tree doubling. Mirrors the multinomial sampler with the
  // generalized no-U-turn check and the extra checks across subtree joints.
  bool build_tree(int depth, PhasePoint& z_propose, VectorXd& p_sharp_beg, VectorXd& p_sharp_end,
                  VectorXd& rho, VectorXd& p_beg, VectorXd& p_end, double h0, double sign,
                  double& log_sum_weight, Transition& t) {
    if (depth == 0) {
      step(z_, sign * eps_);
      ++t.n_leapfrog;
      double h = hamilton(z_);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      if (h - h0 > kMaxDeltaH) t.divergent = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro_prob_ += h0 - h > 0 ? 1.0 : std::exp(h0 - h);
      z_propose = z_;
      p_sharp_beg = inv_metric_.cwiseProduct(z_.p);
      p_sharp_end = p_sharp_beg;
      rho += z_.p;
      p_beg = z_.p;
      p_end = p_beg;
      return !t.divergent;
    }
    const auto d = static_cast<Eigen::Index>(dim_);
    double lsw_init = -std::numeric_limits<double>::infinity();
    VectorXd p_init_end(d), p_sharp_init_end(d), rho_init = VectorXd::Zero(d);
    if (!build_tree(depth - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg,
                    p_init_end, h0, sign, lsw_init, t)) {
      return false;
    }
    PhasePoint z_propose_final = z_;
    double lsw_final = -std::numeric_limits<double>::infinity();
    VectorXd p_final_beg(d), p_sharp_final_beg(d), rho_final = VectorXd::Zero(d);
    if (!build_tree(depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final,
                    p_final_beg, p_end, h0, sign, lsw_final, t)) {
      return false;
    }
    const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
    if (lsw_final > lsw_subtree) {
      z_propose = z_propose_final;
    } else if (rng_.uniform() < std::exp(lsw_final - lsw_subtree)) {
      z_propose = z_propose_final;
    }
    const VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
    persist = persist && criterion(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
    return persist;
  }

  Transition nuts_transition() {
    Transition t;
    sample_momentum();
    sum_metro_prob_ = 0;
    const auto d = static_cast<Eigen::Index>(dim_);

    PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;
    VectorXd p_fwd_fwd = z_.p, p_sharp_fwd_fwd = inv_metric_.cwiseProduct(z_.p);
    VectorXd p_fwd_bck = p_fwd_fwd, p_sharp_fwd_bck = p_sharp_fwd_fwd;
    VectorXd p_bck_fwd = p_fwd_fwd, p_sharp_bck_fwd = p_sharp_fwd_fwd;
    VectorXd p_bck_bck = p_fwd_fwd, p_sharp_bck_bck = p_sharp_fwd_fwd;
    VectorXd rho = z_.p;
    double log_sum_weight = 0;
    const double h0 = hamilton(z_);

    while (t.depth < cfg_.max_tree_depth) {
      VectorXd rho_fwd = VectorXd::Zero(d), rho_bck = VectorXd::Zero(d);
      bool valid;
      double lsw_subtree = -std::numeric_limits<double>::infinity();
      if (rng_.uniform() > 0.5) {
        z_ = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid = build_tree(t.depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd,
                           p_fwd_bck, p_fwd_fwd, h0, 1.0, lsw_subtree, t);
        z_fwd = z_;
      } else {
        z_ = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid = build_tree(t.depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck,
                           p_bck_fwd, p_bck_bck, h0, -1.0, lsw_subtree, t);
        z_bck = z_;
      }
      if (!valid) break;
      ++t.depth;
      if (lsw_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (rng_.uniform() < std::exp(lsw_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
      rho = rho_bck + rho_fwd;
      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
      persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
      if (!persist) break;
    }
    t.accept_stat = t.n_leapfrog > 0 ? sum_metro_prob_ / static_cast<double>(t.n_leapfrog) : 0;
    z_ = z_sample;
    return t;
  }

  Transition rwm_transition() {
    Transition t;
    const auto d = static_cast<Eigen::Index>(dim_);
    PhasePoint prop;
    prop.q.resize(d);
    prop.grad.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      prop.q[j] = z_.q[j] + eps_ * std::sqrt(inv_metric_[j]) * rng_.normal();
    }
    prop.log_density = eval(prop.q, prop.grad);
    prop.p = z_.p;
    const double log_ratio = prop.log_density - z_.log_density;
    t.accept_stat = std::isfinite(log_ratio) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
    if (rng_.uniform() < t.accept_stat) z_ = prop;
    t.n_leapfrog = 1;
    return t;
  }

  void run(std::vector<double>& out, ChainStats& stats) {
    initialize();
    const bool nuts = cfg_.algorithm == Algorithm::nuts;
    // Random-walk proposals start from the optimal Gaussian scale 2.38/sqrt(d)
    // and adapt toward an acceptance rate of 0.234.
    const double target = nuts ? cfg_.target_accept : 0.234;
    eps_ = nuts ? 1.0 : 2.38 / std::sqrt(static_cast<double>(dim_));
    if (nuts) init_step_size();

    DualAverage da(target);
    da.set_mu(std::log(10 * eps_));
    WindowSchedule schedule(cfg_.n_warmup);
    Welford welford(dim_);

    for (std::size_t it = 0; it < cfg_.n_warmup; ++it) {
      const Transition t = nuts ? nuts_transition() : rwm_transition();
      stats.leapfrog_steps += t.n_leapfrog;
      eps_ = da.learn(t.accept_stat);
      if (schedule.in_window()) welford.add(z_.q);
      if (schedule.window_end()) {
        const double n = static_cast<double>(welford.count());
        VectorXd var = welford.variance();
        var = (n / (n + 5.0)) * var +
              1e-3 * (5.0 / (n + 5.0)) * VectorXd::Ones(var.size());
        if (!var.allFinite()) throw SamplerError("metric adaptation produced non-finite variances");
        inv_metric_ = var;
        welford.restart();
        if (nuts) init_step_size();
        da.set_mu(std::log(10 * eps_));
        da.restart();
      }
      schedule.advance();
    }
    if (cfg_.n_warmup > 0) eps_ = da.final_step_size();

    double accept_sum = 0, depth_sum = 0;
    for (std::size_t it = 0; it < cfg_.n_samples; ++it) {
      const Transition t = nuts ? nuts_transition() : rwm_transition();
      stats.leapfrog_steps += t.n_leapfrog;
      accept_sum += t.accept_stat;
      depth_sum += t.depth;
      if (t.divergent) ++stats.divergences;
      out.insert(out.end(), z_.q.data(), z_.q.data() + z_.q.size());
    }
    stats.step_size = eps_;
    stats.inv_metric = inv_metric_;
    stats.mean_accept = accept_sum / static_cast<double>(cfg_.n_samples);
    stats.mean_tree_depth = depth_sum / static_cast<double>(cfg_.n_samples);
  }

 private:
  const LogDensity& f_;
  const SamplerConfig& cfg_;
  Rng rng_;
  VectorXd inv_metric_;
  std::size_t dim_;
  PhasePoint z_;
  double eps_ = 1.0;
  double sum_metro_prob_ = 0;
};

}  // namespace

PosteriorSamples run_chains(const LogDensity& log_density, std::size_t dim,
                            const SamplerConfig& config, std::vector<std::string> names) {
  config.validate();
  if (dim == 0) throw ValidationError("target dimension must be positive");
  if (!names.empty() && names.size() != dim) {
    throw ValidationError("parameter names do not match the target dimension");
  }
  if (names.empty()) {
    for (std::size_t j = 0; j < dim; ++j) names.push_back("theta[" + std::to_string(j + 1) + "]");
  }

  std::vector<std::vector<double>> per_chain(config.n_chains);
  std::vector<ChainStats> stats(config.n_chains);
  parallel_for(config.n_chains, config.workers, [&](std::size_t c) {
    Chain chain(log_density, dim, config, derive_seed(config.seed, {c}));
    per_chain[c].reserve(config.n_samples * dim);
    chain.run(per_chain[c], stats[c]);
  });

  PosteriorSamples out;
  out.n_chains = config.n_chains;
  out.n_samples = config.n_samples;
  out.dim = dim;
  out.names = std::move(names);
  out.draws.reserve(config.n_chains * config.n_samples * dim);
  for (const auto& c : per_chain) out.draws.insert(out.draws.end(), c.begin(), c.end());
  out.chains = std::move(stats);
  for (const auto& s : out.chains) out.divergences += s.divergences;
  const double rate = static_cast<double>(out.divergences) / static_cast<double>(out.total_draws());
  out.divergence_flag = rate > config.divergence_flag_rate;
  compute_diagnostics(out);
  return out;
}

}  // namespace saekit::sampler
