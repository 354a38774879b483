#include "saekit/rng.hpp"

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/binomial_distribution.hpp>
#include <boost/random/chi_squared_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace saekit {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t tag : path) {
    h = splitmix64(h ^ splitmix64(tag + 0x632BE59BD9B4E019ULL));
  }
  return h;
}

double Rng::uniform() {
  return boost::random::uniform_01<double>{}(engine_);
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double Rng::normal() {
  return boost::random::normal_distribution<double>{}(engine_);
}

bool Rng::bernoulli(double p) {
  return boost::random::bernoulli_distribution<double>{p}(engine_);
}

int Rng::poisson(double mean) {
  return boost::random::poisson_distribution<int, double>{mean}(engine_);
}

int Rng::binomial(int trials, double p) {
  if (trials <= 0) return 0;
  return boost::random::binomial_distribution<int, double>{trials, p}(engine_);
}

double Rng::chi_squared(double dof) {
  return boost::random::chi_squared_distribution<double>{dof}(engine_);
}

std::uint64_t Rng::index(std::uint64_t n) {
  return boost::random::uniform_int_distribution<std::uint64_t>{0, n - 1}(engine_);
}

}  // namespace saekit
