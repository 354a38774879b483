#include "saekit/geography.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "saekit/error.hpp"

namespace saekit::simulation {

namespace {

struct Point {
  double x;
  double y;
};

double pixel_centre(std::size_t i, std::size_t n) {
  return (static_cast<double>(i) + 0.5) / static_cast<double>(n);
}

// Nearest-seed labelling of every pixel.
std::vector<std::size_t> assign(const std::vector<Point>& seeds, std::size_t grid) {
  std::vector<std::size_t> label(grid * grid);
  for (std::size_t r = 0; r < grid; ++r) {
    const double y = pixel_centre(r, grid);
    for (std::size_t c = 0; c < grid; ++c) {
      const double x = pixel_centre(c, grid);
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t k = 0; k < seeds.size(); ++k) {
        const double dx = seeds[k].x - x, dy = seeds[k].y - y;
        const double d = dx * dx + dy * dy;
        if (d < best) {
          best = d;
          arg = k;
        }
      }
      label[r * grid + c] = arg;
    }
  }
  return label;
}

std::vector<std::size_t> lloyd(std::size_t n_seeds, std::size_t grid, std::size_t iterations,
                               Rng& rng) {
  std::vector<Point> seeds(n_seeds);
  for (auto& s : seeds) s = {rng.uniform(), rng.uniform()};
  std::vector<std::size_t> label = assign(seeds, grid);
  for (std::size_t it = 0; it < iterations; ++it) {
    std::vector<double> sx(n_seeds, 0), sy(n_seeds, 0), cnt(n_seeds, 0);
    for (std::size_t p = 0; p < label.size(); ++p) {
      sx[label[p]] += pixel_centre(p % grid, grid);
      sy[label[p]] += pixel_centre(p / grid, grid);
      cnt[label[p]] += 1;
    }
    for (std::size_t k = 0; k < n_seeds; ++k) {
      if (cnt[k] > 0) seeds[k] = {sx[k] / cnt[k], sy[k] / cnt[k]};
    }
    label = assign(seeds, grid);
  }
  return label;
}

// Renumbers the non-empty labels 0..k-1 in their original order; returns k.
std::size_t compact(std::vector<std::size_t>& label, std::size_t n_labels) {
  std::vector<std::size_t> map(n_labels, std::numeric_limits<std::size_t>::max());
  std::vector<bool> used(n_labels, false);
  for (auto l : label) used[l] = true;
  std::size_t next = 0;
  for (std::size_t k = 0; k < n_labels; ++k) {
    if (used[k]) map[k] = next++;
  }
  for (auto& l : label) l = map[l];
  return next;
}

std::vector<std::pair<std::size_t, std::size_t>> pixel_edges(const std::vector<std::size_t>& label,
                                                             std::size_t grid) {
  std::set<std::pair<std::size_t, std::size_t>> edges;
  auto add = [&](std::size_t a, std::size_t b) {
    if (a != b) edges.insert({std::min(a, b), std::max(a, b)});
  };
  for (std::size_t r = 0; r < grid; ++r) {
    for (std::size_t c = 0; c < grid; ++c) {
      const std::size_t p = r * grid + c;
      if (c + 1 < grid) add(label[p], label[p + 1]);
      if (r + 1 < grid) add(label[p], label[p + grid]);
    }
  }
  return {edges.begin(), edges.end()};
}

// Checks that each label forms one 4-connected pixel set.
bool contiguous(const std::vector<std::size_t>& label, std::size_t grid, std::size_t n_labels) {
  std::vector<bool> seen(label.size(), false);
  std::vector<int> pieces(n_labels, 0);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < label.size(); ++start) {
    if (seen[start]) continue;
    ++pieces[label[start]];
    seen[start] = true;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const std::size_t r = p / grid, c = p % grid;
      auto visit = [&](std::size_t q) {
        if (!seen[q] && label[q] == label[p]) {
          seen[q] = true;
          stack.push_back(q);
        }
      };
      if (c > 0) visit(p - 1);
      if (c + 1 < grid) visit(p + 1);
      if (r > 0) visit(p - grid);
      if (r + 1 < grid) visit(p + grid);
    }
  }
  return std::all_of(pieces.begin(), pieces.end(), [](int k) { return k == 1; });
}

std::string area_name(std::size_t a, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, n >= 100 ? "area%03zu" : "area%02zu", a + 1);
  return buf;
}

}  // namespace

void GeographyConfig::validate() const {
  if (grid_size < 4) throw ValidationError("grid_size must be at least 4");
  if (n_areas < 2) throw ValidationError("n_areas must be at least 2");
  if (single_stratum_areas > n_areas) {
    throw ValidationError("single_stratum_areas cannot exceed n_areas");
  }
  if (n_admin2 < 2) throw ValidationError("n_admin2 must be at least 2");
  if (frame_clusters_per_stratum < 1) {
    throw ValidationError("frame_clusters_per_stratum must be positive");
  }
  if (!(urban_fraction > 0 && urban_fraction < 1)) {
    throw ValidationError("urban_fraction must lie in (0, 1)");
  }
  if (!(log_population_sd >= 0) || !(log_population_noise_sd >= 0) ||
      !(log_population_range > 0)) {
    throw ValidationError("population surface parameters must be nonnegative with positive range");
  }
  if (population_lattice < 2) throw ValidationError("population_lattice must be at least 2");
  if (!(mean_cluster_size > 0)) throw ValidationError("mean_cluster_size must be positive");
}

double SyntheticGeography::total_population() const {
  return std::accumulate(population.begin(), population.end(), 0.0);
}

std::vector<std::vector<std::size_t>> SyntheticGeography::clusters_by_stratum() const {
  std::vector<std::vector<std::size_t>> out(n_strata());
  for (std::size_t c = 0; c < clusters.size(); ++c) out[clusters[c].stratum].push_back(c);
  return out;
}

double matern1_covariance(double h, double range, double variance) {
  if (h <= 0) return variance;
  const double kh = std::sqrt(8.0) / range * h;
  return variance * kh * std::cyl_bessel_k(1.0, kh);
}

MaternLattice::MaternLattice(std::size_t n, double range, double variance) : n_(n) {
  if (n < 2) throw ValidationError("Matern lattice needs at least 2 nodes per side");
  if (!(range > 0) || !(variance > 0)) {
    throw ValidationError("Matern range and variance must be positive");
  }
  const std::size_t m = n * n;
  Eigen::MatrixXd cov(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double h = std::hypot(node_x(i) - node_x(j), node_y(i) - node_y(j));
      const double c = matern1_covariance(h, range, variance);
      cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
      cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = c;
    }
  }
  // A tiny nugget keeps the factorization stable for long ranges.
  cov.diagonal().array() += 1e-8 * variance;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw SamplerError("Matern covariance is not positive definite");
  chol_ = llt.matrixL();
}

Eigen::VectorXd MaternLattice::draw(Rng& rng) const {
  Eigen::VectorXd z(chol_.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return chol_.triangularView<Eigen::Lower>() * z;
}

std::size_t MaternLattice::nearest(double x, double y) const {
  auto idx = [&](double v) {
    const double f = std::floor(v * static_cast<double>(n_));
    return static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(n_ - 1)));
  };
  return idx(y) * n_ + idx(x);
}

double MaternLattice::node_x(std::size_t k) const { return pixel_centre(k % n_, n_); }
double MaternLattice::node_y(std::size_t k) const { return pixel_centre(k / n_, n_); }

SyntheticGeography generate_geography(const GeographyConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t grid = cfg.grid_size;
  const std::size_t n_pix = grid * grid;
  SyntheticGeography geo;
  geo.grid_size = grid;

  // Population surface.
  {
    Rng rng(derive_seed(seed, {1}));
    const std::size_t L = cfg.population_lattice;
    const MaternLattice lattice(L, cfg.log_population_range, 1.0);
    const Eigen::VectorXd coarse = lattice.draw(rng);
    geo.population.resize(n_pix);
    for (std::size_t r = 0; r < grid; ++r) {
      for (std::size_t c = 0; c < grid; ++c) {
        // Bilinear interpolation between lattice node centres.
        const double gx = pixel_centre(c, grid) * static_cast<double>(L) - 0.5;
        const double gy = pixel_centre(r, grid) * static_cast<double>(L) - 0.5;
        const double fx = std::clamp(gx, 0.0, static_cast<double>(L - 1));
        const double fy = std::clamp(gy, 0.0, static_cast<double>(L - 1));
        const auto x0 = std::min(static_cast<std::size_t>(fx), L - 2);
        const auto y0 = std::min(static_cast<std::size_t>(fy), L - 2);
        const double tx = fx - static_cast<double>(x0), ty = fy - static_cast<double>(y0);
        auto at = [&](std::size_t yy, std::size_t xx) {
          return coarse[static_cast<Eigen::Index>(yy * L + xx)];
        };
        const double v = (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x0 + 1)) +
                         ty * ((1 - tx) * at(y0 + 1, x0) + tx * at(y0 + 1, x0 + 1));
        geo.population[r * grid + c] =
            std::exp(cfg.log_population_mean + cfg.log_population_sd * v +
                     cfg.log_population_noise_sd * rng.normal());
      }
    }
  }

  // Areas and sub-areas.
  {
    Rng rng(derive_seed(seed, {2}));
    geo.area = lloyd(cfg.n_areas, grid, cfg.lloyd_iterations, rng);
    if (compact(geo.area, cfg.n_areas) != cfg.n_areas) {
      throw ValidationError("grid too small: some areas received no pixels");
    }
    if (!contiguous(geo.area, grid, cfg.n_areas)) {
      throw ValidationError("generated areas are not contiguous; change grid size or seed");
    }
    for (std::size_t a = 0; a < cfg.n_areas; ++a) geo.area_names.push_back(area_name(a, cfg.n_areas));
    geo.area_graph = graph::graph_from_edges(geo.area_names, pixel_edges(geo.area, grid));
    if (!geo.area_graph->connected()) throw ValidationError("generated area graph is disconnected");

    Rng rng2(derive_seed(seed, {3}));
    geo.admin2 = lloyd(cfg.n_admin2, grid, cfg.admin2_lloyd_iterations, rng2);
    geo.n_admin2 = compact(geo.admin2, cfg.n_admin2);
    if (geo.n_admin2 < 2) throw ValidationError("too few non-empty sub-areas");
    std::vector<std::string> names;
    for (std::size_t k = 0; k < geo.n_admin2; ++k) names.push_back("sub" + std::to_string(k + 1));
    geo.admin2_graph = graph::graph_from_edges(std::move(names), pixel_edges(geo.admin2, grid));
  }

  // Strata: the densest pixels of an area form its urban stratum.
  {
    const std::size_t min_pixels = cfg.frame_clusters_per_stratum;
    std::vector<std::vector<std::size_t>> pixels(cfg.n_areas);
    for (std::size_t p = 0; p < n_pix; ++p) pixels[geo.area[p]].push_back(p);
    geo.stratum.assign(n_pix, 0);
    for (std::size_t a = 0; a < cfg.n_areas; ++a) {
      auto& px = pixels[a];
      const bool split = a >= cfg.single_stratum_areas;
      if (!split) {
        if (px.size() < min_pixels) {
          throw ValidationError(geo.area_names[a] + " has fewer pixels than frame clusters");
        }
        const std::size_t s = geo.n_strata();
        geo.stratum_area.push_back(a);
        geo.stratum_urban.push_back(false);
        for (auto p : px) geo.stratum[p] = s;
        continue;
      }
      std::stable_sort(px.begin(), px.end(), [&](std::size_t l, std::size_t r) {
        return geo.population[l] > geo.population[r];
      });
      const auto share = static_cast<std::size_t>(std::llround(cfg.urban_fraction * static_cast<double>(px.size())));
      const std::size_t n_urban = std::max(share, min_pixels);
      if (px.size() < n_urban + min_pixels) {
        throw ValidationError(geo.area_names[a] + " is too small for two strata of " +
                              std::to_string(min_pixels) + " frame clusters");
      }
      const std::size_t urban = geo.n_strata();
      geo.stratum_area.push_back(a);
      geo.stratum_urban.push_back(true);
      const std::size_t rural = geo.n_strata();
      geo.stratum_area.push_back(a);
      geo.stratum_urban.push_back(false);
      for (std::size_t k = 0; k < px.size(); ++k) geo.stratum[px[k]] = k < n_urban ? urban : rural;
    }
  }

  // Frame: PPS without replacement by exponential keys log(u) / size, then
  // Poisson cluster sizes.
  {
    Rng rng(derive_seed(seed, {4}));
    std::vector<std::vector<std::size_t>> pixels(geo.n_strata());
    for (std::size_t p = 0; p < n_pix; ++p) pixels[geo.stratum[p]].push_back(p);
    for (std::size_t s = 0; s < geo.n_strata(); ++s) {
      std::vector<std::pair<double, std::size_t>> keys;
      keys.reserve(pixels[s].size());
      for (auto p : pixels[s]) keys.push_back({std::log(rng.uniform()) / geo.population[p], p});
      const std::size_t take = cfg.frame_clusters_per_stratum;
      std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(take), keys.end(),
                        [](const auto& l, const auto& r) {
                          return l.first > r.first || (l.first == r.first && l.second < r.second);
                        });
      std::vector<std::size_t> chosen;
      for (std::size_t k = 0; k < take; ++k) chosen.push_back(keys[k].second);
      std::sort(chosen.begin(), chosen.end());
      for (auto p : chosen) {
        FrameCluster c;
        c.pixel = p;
        c.area = geo.area[p];
        c.stratum = s;
        c.admin2 = geo.admin2[p];
        c.x = pixel_centre(p % grid, grid);
        c.y = pixel_centre(p / grid, grid);
        c.size = rng.poisson(cfg.mean_cluster_size);
        geo.clusters.push_back(c);
      }
    }
  }
  return geo;
}

Covariates draw_covariates(const SyntheticGeography& geo, const CovariateConfig& config,
                           std::uint64_t seed) {
  if (!geo.area_graph || !geo.admin2_graph) throw ValidationError("geography has no graphs");
  Covariates cov;
  const std::size_t n = geo.clusters.size();
  const double A = static_cast<double>(geo.n_areas());
  cov.x.resize(static_cast<Eigen::Index>(n), 5);

  Rng rng_icar(derive_seed(seed, {3}));
  const auto area_prec = graph::scale_icar(graph::icar_precision(*geo.area_graph));
  cov.area_icar = graph::sample_constrained_icar(area_prec, rng_icar);
  const auto admin2_prec = graph::scale_icar(graph::icar_precision(*geo.admin2_graph),
                                             graph::ComponentPolicy::per_component);
  cov.admin2_icar = graph::sample_constrained_icar(admin2_prec, rng_icar);

  Rng rng_field(derive_seed(seed, {5}));
  const MaternLattice lattice(config.matern_lattice, config.matern_range, 1.0);
  const Eigen::VectorXd field = lattice.draw(rng_field);

  Rng rng(derive_seed(seed, {1}));
  for (std::size_t c = 0; c < n; ++c) {
    const FrameCluster& fc = geo.clusters[c];
    const auto i = static_cast<Eigen::Index>(c);
    const double p2 = 0.3 + 0.5 * (static_cast<double>(fc.area) + 1.0) / A;
    cov.x(i, 0) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    cov.x(i, 1) = rng.bernoulli(p2) ? 1.0 : 0.0;
    cov.x(i, 2) = cov.area_icar[static_cast<Eigen::Index>(fc.area)];
    cov.x(i, 3) = cov.admin2_icar[static_cast<Eigen::Index>(fc.admin2)];
    cov.x(i, 4) = field[static_cast<Eigen::Index>(lattice.nearest(fc.x, fc.y))];
  }
  return cov;
}

}  // namespace saekit::simulation
