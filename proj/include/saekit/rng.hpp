#ifndef SAEKIT_RNG_HPP
#define SAEKIT_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace saekit {

/// Mixes a master seed with a path of integer tags into an independent stream
/// seed (SplitMix64 finalizer chained over the path). Used to give every
/// chain, replication and model fit its own reproducible stream.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

// Random number source with platform-independent variates: std::mt19937_64
// is fully specified by the standard and the boost.random distributions are
// header code, so draws are identical across standard libraries.
class Rng {
 public:
  using Engine = std::mt19937_64;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  bool bernoulli(double p);
  int poisson(double mean);
  int binomial(int trials, double p);
  double chi_squared(double dof);
  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n);

  Engine& engine() noexcept { return engine_; }

 private:
  Engine engine_;
};

}  // namespace saekit

#endif  // SAEKIT_RNG_HPP
