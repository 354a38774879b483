#include "saekit/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "saekit/error.hpp"

namespace saekit::sampler {

namespace {

std::vector<std::vector<double>> split(std::span<const std::vector<double>> chains) {
  if (chains.empty()) throw ValidationError("diagnostics need at least one chain");
  const std::size_t n = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != n) throw ValidationError("chains must have equal length");
  }
  if (n < 4) throw ValidationError("diagnostics need at least 4 draws per chain");
  const std::size_t pieces = chains.size() == 1 ? 4 : 2;
  const std::size_t len = n / pieces;
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    // With an odd length the middle draw is dropped, as in the usual convention.
    for (std::size_t k = 0; k < pieces; ++k) {
      const std::size_t begin = k < pieces / 2 ? k * len : n - (pieces - k) * len;
      out.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(begin),
                       c.begin() + static_cast<std::ptrdiff_t>(begin + len));
    }
  }
  return out;
}

double mean(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

struct Moments {
  std::vector<double> means;
  std::vector<double> variances;  // unbiased per chain
  double within = 0;              // W
  double between_over_n = 0;      // B / N
};

Moments moments(const std::vector<std::vector<double>>& chains) {
  Moments m;
  const double n = static_cast<double>(chains.front().size());
  for (const auto& c : chains) {
    const double mu = mean(c);
    double ss = 0;
    for (double v : c) ss += (v - mu) * (v - mu);
    m.means.push_back(mu);
    m.variances.push_back(ss / (n - 1.0));
  }
  const double k = static_cast<double>(chains.size());
  m.within = 0;
  for (double v : m.variances) m.within += v;
  m.within /= k;
  if (chains.size() > 1) {
    double grand = 0;
    for (double mu : m.means) grand += mu;
    grand /= k;
    double ss = 0;
    for (double mu : m.means) ss += (mu - grand) * (mu - grand);
    m.between_over_n = ss / (k - 1.0);
  }
  return m;
}

bool degenerate(const Moments& m) {
  if (!(m.within > 0) || !std::isfinite(m.within)) return true;
  double scale = 0;
  for (double mu : m.means) scale = std::max(scale, std::abs(mu));
  // Variance at rounding level relative to the magnitude counts as constant.
  return m.within <= 1e-28 * std::max(1.0, scale * scale);
}

}  // namespace

Diagnostic split_rhat(std::span<const std::vector<double>> chains) {
  const auto pieces = split(chains);
  const Moments m = moments(pieces);
  if (degenerate(m)) return {1.0, true};
  const double n = static_cast<double>(pieces.front().size());
  const double var_plus = (n - 1.0) / n * m.within + m.between_over_n;
  return {std::sqrt(var_plus / m.within), false};
}

Diagnostic effective_sample_size(std::span<const std::vector<double>> chains) {
  const auto pieces = split(chains);
  const Moments m = moments(pieces);
  const std::size_t n = pieces.front().size();
  const double total = static_cast<double>(n * pieces.size());
  if (degenerate(m)) return {total, true};

  const double nd = static_cast<double>(n);
  const double var_plus = (nd - 1.0) / nd * m.within + m.between_over_n;

  // Mean over chains of the biased autocovariance at lag t, computed on demand.
  auto mean_acov = [&](std::size_t t) {
    double acc = 0;
    for (std::size_t c = 0; c < pieces.size(); ++c) {
      const auto& x = pieces[c];
      const double mu = m.means[c];
      double s = 0;
      for (std::size_t i = 0; i + t < n; ++i) s += (x[i] - mu) * (x[i + t] - mu);
      acc += s / nd;
    }
    return acc / static_cast<double>(pieces.size());
  };
  auto rho = [&](std::size_t t) { return 1.0 - (m.within - mean_acov(t)) / var_plus; };

  std::vector<double> rho_hat(n + 2, 0.0);
  double rho_even = 1.0;
  double rho_odd = rho(1);
  rho_hat[0] = rho_even;
  rho_hat[1] = rho_odd;
  std::size_t s = 1;
  while (s + 4 < n && rho_even + rho_odd > 0) {
    rho_even = rho(s + 1);
    rho_odd = rho(s + 2);
    if (rho_even + rho_odd >= 0) {
      rho_hat[s + 1] = rho_even;
      rho_hat[s + 2] = rho_odd;
    }
    s += 2;
  }
  const std::size_t max_s = s;
  if (rho_even > 0) rho_hat[max_s + 1] = rho_even;

  // Initial monotone sequence.
  for (std::size_t k = 1; k + 4 <= max_s; k += 2) {
    if (rho_hat[k + 1] + rho_hat[k + 2] > rho_hat[k - 1] + rho_hat[k]) {
      rho_hat[k + 1] = 0.5 * (rho_hat[k - 1] + rho_hat[k]);
      rho_hat[k + 2] = rho_hat[k + 1];
    }
  }

  double head = 0;
  for (std::size_t k = 0; k < max_s; ++k) head += rho_hat[k];
  const double tau = -1.0 + 2.0 * head + rho_hat[max_s + 1];
  const double ess = std::min(total / tau, total * std::log10(total));
  return {ess, false};
}

}  // namespace saekit::sampler
