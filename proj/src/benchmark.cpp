#include "saekit/benchmark.hpp"

#include <mutex>
#include <ostream>

#include "saekit/csv.hpp"
#include "saekit/error.hpp"
#include "saekit/fit.hpp"
#include "saekit/parallel.hpp"

namespace saekit::simulation {

ScenarioConfig ScenarioConfig::preset(std::string_view name) {
  ScenarioConfig s;
  s.name = std::string(name);
  s.sampler.n_chains = 4;
  s.sampler.n_warmup = 500;
  s.sampler.n_samples = 500;
  if (name == "mu01") {
    s.population.mu = 0.1;
  } else if (name == "mu05") {
    s.population.mu = 0.5;
  } else if (name == "large_sample") {
    s.population.mu = 0.5;
    s.clusters_per_stratum = 25;
  } else {
    throw ValidationError("unknown scenario '" + std::string(name) +
                          "' (expected mu01, mu05 or large_sample)");
  }
  return s;
}

void ScenarioConfig::validate() const {
  if (replications < 1) throw ValidationError("replications must be positive");
  if (clusters_per_stratum < 2) {
    throw ValidationError("clusters_per_stratum must be at least 2 for variance estimation");
  }
  if (clusters_per_stratum > geography.frame_clusters_per_stratum) {
    throw ValidationError("clusters_per_stratum exceeds the frame size per stratum");
  }
  if (!(interval_level > 0 && interval_level < 1)) {
    throw ValidationError("interval_level must lie in (0, 1)");
  }
  geography.validate();
  population.validate();
  sampler.validate();
}

std::array<model::Method, kMethodCount> benchmark_methods() {
  const auto m = model::model_methods();
  return {model::Method::hajek, m[0], m[1], m[2], m[3]};
}

ReplicationResult run_replication(const ScenarioConfig& scenario, const SyntheticGeography& geo,
                                  const Covariates& covariates,
                                  const graph::ScaledIcarPrecision& icar, std::size_t index) {
  ReplicationResult r;
  r.index = index;
  const std::uint64_t seed = scenario.seed;
  try {
    const Population pop =
        draw_population(geo, covariates, scenario.population, derive_seed(seed, {1, index, 0}));
    const SurveySample sample = sample_survey(geo, pop, scenario.clusters_per_stratum,
                                              derive_seed(seed, {1, index, 1}), scenario.pps_size);
    const survey::DirectEstimates direct = survey::direct_estimates(sample.data);

    const summary::AreaEstimates hajek = summary::hajek_intervals(direct, scenario.interval_level);
    r.metrics[0] = compute_metrics(hajek, pop.truth);

    const auto methods = model::model_methods();
    for (std::size_t k = 0; k < methods.size(); ++k) {
      const bool spatial = methods[k] == model::Method::spatial_unmatched_ms ||
                           methods[k] == model::Method::spatial_unmatched_js;
      const bool smooth = methods[k] == model::Method::unmatched_js ||
                          methods[k] == model::Method::spatial_unmatched_js;
      model::ModelConfig cfg = model::ModelConfig::intercept_only(geo.n_areas(), spatial, smooth);
      cfg.interval_level = scenario.interval_level;
      model::ModelData data{direct, spatial ? std::optional(icar) : std::nullopt};
      sampler::SamplerConfig sc = scenario.sampler;
      sc.seed = derive_seed(seed, {1, index, 2, k});
      sc.workers = 1;
      const FitResult fit = fit_area_model(std::move(cfg), std::move(data), sc);
      r.metrics[k + 1] = compute_metrics(fit.estimates, pop.truth);
      r.max_rhat = std::max(r.max_rhat, fit.samples.max_rhat());
      r.divergences += fit.samples.divergences;
      if (k == 0) r.excluded_areas = geo.n_areas() - fit.model.observed_areas().size();
    }
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

BenchmarkResult run_benchmark(const ScenarioConfig& scenario,
                              const std::function<void(const ReplicationResult&)>& progress) {
  scenario.validate();
  const SyntheticGeography geo = generate_geography(scenario.geography, derive_seed(scenario.seed, {0, 1}));
  const Covariates cov = draw_covariates(geo, scenario.covariates, derive_seed(scenario.seed, {0, 2}));
  const graph::ScaledIcarPrecision icar = graph::scale_icar(graph::icar_precision(*geo.area_graph));

  BenchmarkResult out;
  out.scenario = scenario.name;
  out.seed = scenario.seed;
  out.requested = scenario.replications;
  out.replications.resize(scenario.replications);
  std::mutex progress_mutex;
  parallel_for(scenario.replications, scenario.workers, [&](std::size_t i) {
    out.replications[i] = run_replication(scenario, geo, cov, icar, i);
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(out.replications[i]);
    }
  });

  const auto methods = benchmark_methods();
  out.methods.resize(kMethodCount);
  for (std::size_t k = 0; k < kMethodCount; ++k) {
    out.methods[k].method = std::string(model::method_label(methods[k]));
  }
  for (const auto& r : out.replications) {
    if (!r.ok) continue;
    ++out.completed;
    for (std::size_t k = 0; k < kMethodCount; ++k) {
      out.methods[k].mean.rmse += r.metrics[k].rmse;
      out.methods[k].mean.mae += r.metrics[k].mae;
      out.methods[k].mean.cov90 += r.metrics[k].cov90;
      out.methods[k].mean.mil += r.metrics[k].mil;
    }
  }
  if (out.completed > 0) {
    const double n = static_cast<double>(out.completed);
    for (auto& m : out.methods) {
      m.mean.rmse /= n;
      m.mean.mae /= n;
      m.mean.cov90 /= n;
      m.mean.mil /= n;
    }
  }
  return out;
}

void write_benchmark_csv(std::ostream& out, const BenchmarkResult& result) {
  out << "Method,RMSE_x100,MAE_x100,Cov90_pct,MIL_x100\n";
  for (const auto& m : result.methods) {
    out << csv::quote(m.method) << ',' << csv::format_number(100 * m.mean.rmse) << ','
        << csv::format_number(100 * m.mean.mae) << ',' << csv::format_number(100 * m.mean.cov90)
        << ',' << csv::format_number(100 * m.mean.mil) << '\n';
  }
}

void write_replications_csv(std::ostream& out, const BenchmarkResult& result) {
  out << "replication,status,method,rmse,mae,cov90,mil,max_rhat,divergences,excluded_areas\n";
  const auto methods = benchmark_methods();
  for (const auto& r : result.replications) {
    if (!r.ok) {
      out << r.index << ",failed," << csv::quote(r.error) << ",NA,NA,NA,NA,NA,NA,NA\n";
      continue;
    }
    for (std::size_t k = 0; k < kMethodCount; ++k) {
      const Metrics& m = r.metrics[k];
      out << r.index << ",ok," << csv::quote(model::method_label(methods[k])) << ','
          << csv::format_number(m.rmse) << ',' << csv::format_number(m.mae) << ','
          << csv::format_number(m.cov90) << ',' << csv::format_number(m.mil) << ','
          << csv::format_number(r.max_rhat) << ',' << r.divergences << ',' << r.excluded_areas
          << '\n';
    }
  }
}

}  // namespace saekit::simulation
