#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "saekit/error.hpp"
#include "saekit/fit.hpp"
#include "saekit/summary.hpp"

using namespace saekit;

namespace {

// Sort-and-index oracle for the type-7 rule: h = (n - 1) p, interpolate x[floor h], x[floor h + 1].
double oracle_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Posterior samples whose draws are given per parameter and chain.
sampler::PosteriorSamples fake_samples(const Eigen::MatrixXd& rows, std::size_t chains) {
  sampler::PosteriorSamples s;
  s.n_chains = chains;
  s.n_samples = static_cast<std::size_t>(rows.rows()) / chains;
  s.dim = static_cast<std::size_t>(rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) s.draws.push_back(rows(i, j));
  }
  return s;
}

}  // namespace

TEST_SUITE("summary") {

TEST_CASE("quantile rule") {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i / 100.0);
  CHECK(summary::quantile(v, 0.5) == doctest::Approx(0.505).epsilon(1e-14));
  CHECK(summary::quantile(v, 0.05) == doctest::Approx(oracle_quantile(v, 0.05)).epsilon(1e-14));
  CHECK(summary::quantile(v, 0.95) == doctest::Approx(oracle_quantile(v, 0.95)).epsilon(1e-14));
  CHECK(summary::quantile({3.0}, 0.3) == 3.0);
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u;
  std::vector<double> r(37);
  for (auto& x : r) x = u(gen);
  for (double p : {0.0, 0.01, 0.33, 0.9, 1.0}) {
    CHECK(summary::quantile(r, p) == doctest::Approx(oracle_quantile(r, p)).epsilon(1e-14));
  }
}

TEST_CASE("draw summaries") {
  Eigen::MatrixXd draws(100, 2);
  for (int i = 0; i < 100; ++i) {
    draws(i, 0) = 0.3;
    draws(i, 1) = (100 - i) / 100.0;  // reverse order
  }
  const auto est = summary::summarize_draws(draws, {"a", "b"}, "m", 0.9);
  CHECK(est[0].point == 0.3);
  CHECK(est[0].lower == 0.3);
  CHECK(est[0].upper == 0.3);
  CHECK(est[1].point == doctest::Approx(0.505));
  CHECK(est[1].interval_length == est[1].upper - est[1].lower);

  // Sorting invariance and nesting.
  Eigen::MatrixXd sorted = draws;
  std::sort(sorted.col(1).data(), sorted.col(1).data() + 100);
  const auto est2 = summary::summarize_draws(sorted, {"a", "b"}, "m", 0.9);
  CHECK(est2[1].lower == est[1].lower);
  CHECK(est2[1].upper == est[1].upper);
  const auto half = summary::summarize_draws(draws, {"a", "b"}, "m", 0.5);
  CHECK(half[1].lower >= est[1].lower);
  CHECK(half[1].upper <= est[1].upper);
  CHECK_THROWS_AS(summary::summarize_draws(Eigen::MatrixXd(0, 2), {"a", "b"}, "m"), ValidationError);
}

TEST_CASE("hyperparameter summaries") {
  std::mt19937_64 gen(8);
  const model::AreaModel m = testing::grid_model(gen, 2, 2, true, true);
  const auto dim = static_cast<Eigen::Index>(m.dimension());
  Eigen::MatrixXd rows(40, dim);
  std::normal_distribution<double> z;
  for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = 3 * z(gen);
  rows.col(static_cast<Eigen::Index>(m.layout().log_sigma_u)).setConstant(std::log(0.7));
  const auto s = fake_samples(rows, 2);
  const auto h = summary::summarize_hypers(s, m);
  CHECK(h.at("sigma_u").point == doctest::Approx(0.7).epsilon(1e-14));
  const auto& phi = h.at("phi");
  CHECK(phi.lower >= 0);
  CHECK(phi.upper <= 1);
  CHECK(phi.lower <= phi.point);
  CHECK(phi.point <= phi.upper);
  CHECK_NOTHROW(h.at("gamma2"));
  CHECK_NOTHROW(h.at("sigma_tau"));
  CHECK_THROWS(h.at("nope"));
  for (double x : {-3.0, 0.2, 5.0}) {
    const double back = model::logistic(x);
    CHECK(std::log(back / (1 - back)) == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("area summaries go through the latent proportions") {
  std::mt19937_64 gen(9);
  const model::AreaModel m = testing::grid_model(gen, 1, 3, false, false);
  Eigen::MatrixXd rows(30, static_cast<Eigen::Index>(m.dimension()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) rows.row(i) = testing::random_state(gen, m).transpose();
  const auto s = fake_samples(rows, 3);
  const Eigen::MatrixXd p = summary::proportion_draws(s, m);
  for (Eigen::Index i = 0; i < 30; ++i) {
    CHECK((p.row(i).transpose() - m.latent_proportions(rows.row(i).transpose())).norm() < 1e-15);
  }
  const auto est = summary::summarize_areas(s, m);
  CHECK(est.size() == 3);
  CHECK(est.method == "Unmatched MS");
  for (const auto& e : est.areas) {
    CHECK(e.lower <= e.point);
    CHECK(e.point <= e.upper);
  }
}

TEST_CASE("Hajek intervals") {
  survey::DirectEstimates d;
  d.areas = {{"a", 0.5, 0.0, 1, 20, 2, survey::AreaStatus::ok},
             {"b", 0.5, 0.01, 5, 60, 6, survey::AreaStatus::ok},
             {"c", 0.0, 0.0, 5, 60, 6, survey::AreaStatus::ok},
             {"d", 0.4, std::nan(""), 0, 10, 1, survey::AreaStatus::single_cluster}};
  const auto h = summary::hajek_intervals(d, 0.9);
  CHECK(h.method == "Hájek");
  CHECK(h[0].lower == 0.5);
  CHECK(h[0].upper == 0.5);
  CHECK(h[1].lower == doctest::Approx(0.3412).epsilon(1e-3));
  CHECK(h[1].upper == doctest::Approx(0.6588).epsilon(1e-3));
  const double z = 1.6448536269514722;
  CHECK(h[1].lower == doctest::Approx(1 / (1 + std::exp(z * 0.4))).epsilon(1e-12));
  CHECK(h[2].flagged);
  CHECK(h[2].interval_length == 0);
  CHECK(h[3].flagged);
  CHECK(std::isnan(h[3].lower));

  double prev = 1;
  for (double v : {0.02, 0.01, 0.005, 0.001}) {
    d.areas[1].v_hat = v;
    const double len = summary::hajek_intervals(d)[1].interval_length;
    CHECK(len < prev);
    prev = len;
  }
}

TEST_CASE("estimates table") {
  summary::AreaEstimates e;
  e.method = "Spatial Unmatched JS";
  e.areas = {{"x,y", 0.25, 0.1, 0.4, 0.3, false}};
  std::ostringstream out;
  const std::vector<summary::AreaEstimates> sets{e};
  summary::write_estimates_csv(out, sets);
  CHECK(out.str() ==
        "area,method,point,lower,upper,interval_length\n\"x,y\",Spatial Unmatched JS,0.25,0.1,0.4,0.3\n");
}

TEST_CASE("model shrinks an imprecise direct estimate") {
  std::mt19937_64 gen(12);
  auto direct = testing::random_direct(gen, 8);
  for (auto& a : direct.areas) {
    a.p_hat = 0.3;
    a.v_hat = 0.0005;
  }
  direct.areas[5].p_hat = 0.8;
  direct.areas[5].v_hat = 0.5;
  sampler::SamplerConfig sc;
  sc.n_chains = 2;
  sc.n_warmup = 300;
  sc.n_samples = 300;
  sc.seed = 3;
  const FitResult fit =
      fit_area_model(model::ModelConfig::intercept_only(8, false, false), {direct, std::nullopt}, sc);
  CHECK(fit.estimates[5].point < 0.6);
  CHECK(fit.estimates[5].point > 0.2);
}

}
