#ifndef SAEKIT_DIAGNOSTICS_HPP
#define SAEKIT_DIAGNOSTICS_HPP

#include <span>
#include <vector>

namespace saekit::sampler {

/// A convergence statistic plus a flag for degenerate input (zero variance).
struct Diagnostic {
  double value = 1.0;
  bool flagged = false;
};

/// Each inner vector holds one chain's post-warmup draws of a scalar, all of
/// equal length. Chains are split in half (a single chain into quarters).
/// Requires at least 4 draws per chain; throws ValidationError otherwise.
Diagnostic split_rhat(std::span<const std::vector<double>> chains);

/// Multi-chain ESS with Geyer's initial positive monotone sequence on the
/// split chains, capped at N log10(N) as in common practice. A constant
/// series is flagged and reported as the total draw count.
Diagnostic effective_sample_size(std::span<const std::vector<double>> chains);

}  // namespace saekit::sampler

#endif  // SAEKIT_DIAGNOSTICS_HPP
