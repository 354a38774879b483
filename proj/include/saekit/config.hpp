#ifndef SAEKIT_CONFIG_HPP
#define SAEKIT_CONFIG_HPP

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "saekit/benchmark.hpp"
#include "saekit/model.hpp"
#include "saekit/sampler.hpp"

namespace saekit::config {

/// Area-level covariates read from a CSV keyed by area name.
struct CovariateBinding {
  std::string file;
  std::string area_column = "area";
  std::vector<std::string> columns;      // linear predictor, after the intercept
  std::vector<std::string> gvf_columns;  // extra GVF terms z_a (joint smoothing)
};

/// Parsed model configuration file.
///
///   {
///     "variant": "ms" | "js",
///     "spatial": true,
///     "interval_level": 0.9,
///     "allow_disconnected": false,
///     "priors": {
///       "sigma_u":   {"upper": 1, "tail_prob": 0.01},
///       "sigma_tau": {"upper": 1, "tail_prob": 0.01},
///       "beta":  {"mean": 0, "sd": 31.6228},
///       "gamma": {"mean": [0, 1, -1], "sd": [1, 0.5, 0.5], "extra_sd": 1},
///       "phi":   {"a": 0.5, "b": 0.5}
///     },
///     "covariates": {"file": "cov.csv", "area_column": "area", "columns": ["x1"]},
///     "gvf_covariates": ["z1"],
///     "sampler": {"n_chains": 4, "n_warmup": 1000, "n_samples": 1000,
///                 "target_accept": 0.8, "max_tree_depth": 10,
///                 "init_radius": 2, "algorithm": "nuts"}
///   }
///
/// Every key is optional; unknown keys are rejected. Relative covariate
/// paths resolve against the config file's directory.
struct ModelFile {
  bool smooth_variance = true;
  bool spatial = true;
  double interval_level = 0.90;
  bool allow_disconnected = false;
  model::ModelConfig priors;  // prior fields only; design is built later
  std::optional<CovariateBinding> covariates;
  sampler::SamplerConfig sampler;
};

ModelFile parse_model_config(const nlohmann::json& j, const std::string& source = "config");
ModelFile read_model_config(const std::string& path);

/// Sampler block shared by the model and scenario files; `base` supplies
/// defaults for absent keys.
sampler::SamplerConfig parse_sampler(const nlohmann::json& j, const std::string& path,
                                     sampler::SamplerConfig base);

/// Builds the design and GVF matrices in the order of `areas`. An intercept
/// column always comes first. Throws ValidationError on missing areas,
/// columns or non-finite values.
void bind_covariates(model::ModelConfig& config, const CovariateBinding& binding,
                     const std::vector<std::string>& areas);

/// Scenario file:
///
///   {
///     "scenario": "mu01",            // preset the other keys modify
///     "replications": 100, "seed": 2024, "clusters_per_stratum": 8,
///     "interval_level": 0.9, "pps_size": "frame_population" | "cluster_size",
///     "mu": 0.1, "beta": [0.25, -0.25, 0.5, 0.25, 0.25],
///     "area_sd": 0.25, "cluster_sd": 0.5,
///     "geography": {"grid_size": 240, "n_areas": 37, "n_admin2": 774,
///                   "frame_clusters_per_stratum": 300, ...},
///     "covariates": {"matern_range": 0.3536, "matern_lattice": 40},
///     "sampler": {...}
///   }
simulation::ScenarioConfig parse_scenario(const nlohmann::json& j,
                                          const std::string& source = "scenario");
simulation::ScenarioConfig read_scenario(const std::string& path);

nlohmann::json read_json(const std::string& path);

nlohmann::json to_json(const sampler::SamplerConfig& config);
nlohmann::json to_json(const simulation::ScenarioConfig& scenario);
nlohmann::json to_json(const ModelFile& file);

}  // namespace saekit::config

#endif  // SAEKIT_CONFIG_HPP
