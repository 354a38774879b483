#ifndef SAEKIT_BENCHMARK_HPP
#define SAEKIT_BENCHMARK_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "saekit/geography.hpp"
#include "saekit/sampler.hpp"
#include "saekit/simulation.hpp"

namespace saekit::simulation {

/// One repeated-sampling experiment: fixed geography and covariates, fresh
/// population, sample and fits per replication.
struct ScenarioConfig {
  std::string name = "mu01";
  std::size_t clusters_per_stratum = 8;
  SizeMeasure pps_size = SizeMeasure::frame_population;
  std::size_t replications = 100;
  std::uint64_t seed = 2024;
  GeographyConfig geography;
  CovariateConfig covariates;
  PopulationConfig population;
  sampler::SamplerConfig sampler;
  double interval_level = 0.90;
  std::size_t workers = 1;

  /// mu01 (mu = 0.1), mu05 (mu = 0.5) or large_sample (mu = 0.5 with 25
  /// clusters per stratum); desk-scale sampler of 4 chains x 500 + 500.
  static ScenarioConfig preset(std::string_view name);
  void validate() const;
};

inline constexpr std::size_t kMethodCount = 5;

/// Hajek followed by model_methods() order.
std::array<model::Method, kMethodCount> benchmark_methods();

struct ReplicationResult {
  std::size_t index = 0;
  bool ok = false;
  std::string error;
  std::array<Metrics, kMethodCount> metrics{};
  double max_rhat = 1.0;          // across the four fits
  std::size_t divergences = 0;
  std::size_t excluded_areas = 0;  // areas without a usable direct estimate
};

struct MethodSummary {
  std::string method;
  Metrics mean;  // averages over completed replications
};

struct BenchmarkResult {
  std::string scenario;
  std::uint64_t seed = 0;
  std::size_t requested = 0;
  std::size_t completed = 0;
  std::vector<MethodSummary> methods;
  std::vector<ReplicationResult> replications;
};

/// Runs one replication; exposed for tests and the simulate command.
ReplicationResult run_replication(const ScenarioConfig& scenario, const SyntheticGeography& geo,
                                  const Covariates& covariates,
                                  const graph::ScaledIcarPrecision& icar, std::size_t index);

/// Fixed geography from derive_seed(seed, {0, 1}), covariates from
/// derive_seed(seed, {0, 2}), replication r from derive_seed(seed, {1, r, ...}).
/// Replications run on `workers` threads; a replication whose fit throws is
/// recorded and excluded from the averages. The result does not depend on
/// the worker count.
BenchmarkResult run_benchmark(const ScenarioConfig& scenario,
                              const std::function<void(const ReplicationResult&)>& progress = {});

/// Method,RMSE_x100,MAE_x100,Cov90_pct,MIL_x100
void write_benchmark_csv(std::ostream& out, const BenchmarkResult& result);
/// One row per replication and method.
void write_replications_csv(std::ostream& out, const BenchmarkResult& result);

}  // namespace saekit::simulation

#endif  // SAEKIT_BENCHMARK_HPP
