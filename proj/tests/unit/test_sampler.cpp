#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "saekit/diagnostics.hpp"
#include "saekit/error.hpp"
#include "saekit/sampler.hpp"

using namespace saekit;
using namespace saekit::sampler;

namespace {

LogDensity std_normal() {
  return [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = -x;
    return -0.5 * x.squaredNorm();
  };
}

SamplerConfig config(std::size_t chains, std::size_t warmup, std::size_t samples, std::uint64_t seed) {
  SamplerConfig c;
  c.n_chains = chains;
  c.n_warmup = warmup;
  c.n_samples = samples;
  c.seed = seed;
  return c;
}

std::vector<std::vector<double>> iid_chains(std::mt19937_64& gen, std::size_t chains, std::size_t n,
                                            double offset_first = 0) {
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> out(chains);
  for (std::size_t c = 0; c < chains; ++c) {
    for (std::size_t i = 0; i < n; ++i) out[c].push_back(z(gen) + (c == 0 ? offset_first : 0.0));
  }
  return out;
}

std::vector<double> column(const PosteriorSamples& s, std::size_t j) {
  std::vector<double> out;
  for (const auto& c : s.parameter_chains(j)) out.insert(out.end(), c.begin(), c.end());
  return out;
}

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("split R-hat") {
  std::mt19937_64 gen(1);
  const auto iid = iid_chains(gen, 4, 1000);
  const Diagnostic r = split_rhat(iid);
  CHECK(r.value >= 0.99);
  CHECK(r.value <= 1.02);
  CHECK_FALSE(r.flagged);

  const auto offset = iid_chains(gen, 4, 1000, 10.0);
  CHECK(split_rhat(offset).value > 1.5);

  const std::vector<std::vector<double>> flat(3, std::vector<double>(50, 2.0));
  const Diagnostic c = split_rhat(flat);
  CHECK(c.flagged);
  CHECK(c.value == 1.0);

  const std::vector<std::vector<double>> tiny(2, std::vector<double>(3, 0.0));
  CHECK_THROWS_AS(split_rhat(tiny), ValidationError);
}

TEST_CASE("effective sample size") {
  std::mt19937_64 gen(2);
  const auto iid = iid_chains(gen, 4, 1000);
  CHECK(effective_sample_size(iid).value == doctest::Approx(4000).epsilon(0.15));

  const double rho = 0.9;
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> ar(4);
  for (auto& c : ar) {
    double x = z(gen) / std::sqrt(1 - rho * rho);
    for (int i = 0; i < 5000; ++i) {
      x = rho * x + z(gen);
      c.push_back(x);
    }
  }
  CHECK(effective_sample_size(ar).value == doctest::Approx(20000 * (1 - rho) / (1 + rho)).epsilon(0.25));

  const std::vector<std::vector<double>> flat(2, std::vector<double>(40, 1.0));
  const Diagnostic e = effective_sample_size(flat);
  CHECK(e.flagged);
  CHECK(e.value == 80);
}

TEST_CASE("standard normal target") {
  const std::size_t dim = 5;
  const auto s = run_chains(std_normal(), dim, config(4, 1000, 1000, 11));
  CHECK(s.draws.size() == 4 * 1000 * dim);
  for (std::size_t j = 0; j < dim; ++j) {
    const auto x = column(s, j);
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double var = 0;
    for (double v : x) var += (v - mean) * (v - mean) / (n - 1);
    const double mcse = std::sqrt(var / s.ess[j].value);
    CHECK(std::abs(mean) < 3 * mcse);
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
  }
  CHECK(s.max_rhat() < 1.01);
  CHECK(s.divergences == 0);
  CHECK_FALSE(s.divergence_flag);
}

TEST_CASE("conjugate normal-normal posterior") {
  // y_i ~ N(theta, 4), theta ~ N(1, 9): posterior precision 1/9 + n/4.
  const std::vector<double> y{2.1, 3.4, 0.7, 2.9, 1.8, 2.2, 3.1, 2.6};
  const double n = static_cast<double>(y.size());
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / n;
  const double prec = 1.0 / 9 + n / 4;
  const double post_mean = (1.0 / 9 + n * ybar / 4) / prec;
  const double post_sd = std::sqrt(1 / prec);
  LogDensity f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double t = x(0);
    double lp = -0.5 * (t - 1) * (t - 1) / 9;
    double d = -(t - 1) / 9;
    for (double v : y) {
      lp += -0.5 * (v - t) * (v - t) / 4;
      d += (v - t) / 4;
    }
    g.resize(1);
    g(0) = d;
    return lp;
  };
  const auto s = run_chains(f, 1, config(4, 1000, 2000, 5));
  const auto x = column(s, 0);
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double var = 0;
  for (double v : x) var += (v - m) * (v - m) / static_cast<double>(x.size() - 1);
  CHECK(m == doctest::Approx(post_mean).epsilon(0.02));
  CHECK(std::sqrt(var) == doctest::Approx(post_sd).epsilon(0.02));
}

TEST_CASE("determinism and worker independence") {
  auto cfg = config(3, 200, 100, 99);
  const auto a = run_chains(std_normal(), 4, cfg);
  const auto b = run_chains(std_normal(), 4, cfg);
  cfg.workers = 3;
  const auto c = run_chains(std_normal(), 4, cfg);
  CHECK(a.draws == b.draws);
  CHECK(a.draws == c.draws);
  cfg.seed = 100;
  CHECK(run_chains(std_normal(), 4, cfg).draws != a.draws);
}

TEST_CASE("warmup draws are discarded") {
  // Inits lie in (-2, 2); the target sits at 50, so warmup iterates would stand out.
  LogDensity f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = -(x.array() - 50.0).matrix();
    return -0.5 * (x.array() - 50.0).square().sum();
  };
  const auto s = run_chains(f, 2, config(2, 150, 80, 3));
  CHECK(s.n_samples == 80);
  CHECK(s.draws.size() == 2 * 80 * 2);
  for (double v : s.draws) CHECK(std::abs(v - 50.0) < 7.0);
}

TEST_CASE("leapfrog is reversible") {
  const LogDensity f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = -x.cwiseProduct(Eigen::Vector3d(1.0, 4.0, 0.25));
    return 0.5 * x.dot(g);
  };
  const Eigen::VectorXd inv = Eigen::Vector3d(1.0, 0.5, 2.0);
  PhasePoint z;
  z.q = Eigen::Vector3d(0.3, -1.2, 2.0);
  z.p = Eigen::Vector3d(1.0, 0.4, -0.7);
  z.log_density = f(z.q, z.grad);
  const PhasePoint start = z;
  for (int i = 0; i < 40; ++i) leapfrog(f, inv, 0.1, z);
  for (int i = 0; i < 40; ++i) leapfrog(f, inv, -0.1, z);
  CHECK((z.q - start.q).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((z.p - start.p).cwiseAbs().maxCoeff() < 1e-8);

  // Energy error shrinks like eps^2.
  auto dh = [&](double eps) {
    PhasePoint w = start;
    const double h0 = hamiltonian(w, inv);
    for (int i = 0; i < static_cast<int>(std::lround(1.0 / eps)); ++i) leapfrog(f, inv, eps, w);
    return std::abs(hamiltonian(w, inv) - h0);
  };
  CHECK(dh(0.01) < dh(0.1) / 20);
}

TEST_CASE("acceptance statistic tracks the target on a Gaussian") {
  for (double target : {0.6, 0.8, 0.9}) {
    auto cfg = config(4, 1000, 1000, 21);
    cfg.target_accept = target;
    const auto s = run_chains(std_normal(), 100, cfg);
    double mean_accept = 0;
    for (const auto& c : s.chains) mean_accept += c.mean_accept / 4;
    CHECK(std::abs(mean_accept - target) < 0.1);
  }
}

TEST_CASE("dual averaging finds the target step size") {
  // Acceptance exp(-eps) hits 0.8 at eps = -log(0.8).
  DualAverage da(0.8);
  da.set_mu(std::log(10.0));
  double eps = 1.0;
  for (int i = 0; i < 5000; ++i) eps = da.learn(std::exp(-eps));
  CHECK(da.final_step_size() == doctest::Approx(-std::log(0.8)).epsilon(0.02));
}

TEST_CASE("window schedule closes windows at doubling points") {
  WindowSchedule w(1000);
  std::vector<std::size_t> ends;
  for (std::size_t i = 0; i < 1000; ++i) {
    if (w.window_end()) ends.push_back(i);
    w.advance();
  }
  CHECK(ends == std::vector<std::size_t>{99, 149, 249, 449, 949});
  CHECK_FALSE(WindowSchedule(19).enabled());
  // Short warmups shrink to 15% / 75% / 10%.
  WindowSchedule small(100);
  std::vector<std::size_t> small_ends;
  for (std::size_t i = 0; i < 100; ++i) {
    if (small.window_end()) small_ends.push_back(i);
    small.advance();
  }
  CHECK(small_ends == std::vector<std::size_t>{89});
}

TEST_CASE("random-walk fallback") {
  auto cfg = config(4, 2000, 4000, 8);
  cfg.algorithm = Algorithm::random_walk;
  const auto s = run_chains(std_normal(), 2, cfg);
  for (std::size_t j = 0; j < 2; ++j) {
    const auto x = column(s, j);
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    CHECK(std::abs(m) < 0.15);
  }
  CHECK(s.max_rhat() < 1.05);
}

TEST_CASE("failure modes") {
  LogDensity nowhere = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Zero(x.size());
    return -std::numeric_limits<double>::infinity();
  };
  CHECK_THROWS_AS(run_chains(nowhere, 2, config(1, 10, 10, 1)), SamplerError);
  CHECK_THROWS_AS(run_chains(std_normal(), 0, config(1, 10, 10, 1)), ValidationError);
  CHECK_THROWS_AS(run_chains(std_normal(), 2, config(0, 10, 10, 1)), ValidationError);
  CHECK_THROWS_AS(run_chains(std_normal(), 2, config(1, 10, 10, 1), {"only_one"}), ValidationError);

  // A wall the trajectory keeps hitting: everything past |x| > 1 is outside the support.
  LogDensity box = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = -1e-3 * x;
    if (x.cwiseAbs().maxCoeff() > 1) return -std::numeric_limits<double>::infinity();
    return -0.5e-3 * x.squaredNorm();
  };
  auto cfg = config(2, 100, 200, 4);
  cfg.init_radius = 0.5;
  const auto s = run_chains(box, 3, cfg);
  CHECK(s.divergences > 0);
}

}
