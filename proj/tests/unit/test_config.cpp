#include <doctest.h>

#include "helpers.hpp"
#include "saekit/config.hpp"
#include "saekit/error.hpp"

using namespace saekit;
using nlohmann::json;

TEST_SUITE("config") {

TEST_CASE("defaults") {
  const auto f = config::parse_model_config(json::object());
  CHECK(f.smooth_variance);
  CHECK(f.spatial);
  CHECK(f.interval_level == 0.9);
  CHECK_FALSE(f.covariates);
  CHECK(f.sampler.n_chains == 4);
  CHECK(f.sampler.n_warmup == 1000);
  CHECK(f.sampler.n_samples == 1000);
}

TEST_CASE("full model file") {
  const json j = json::parse(R"({
    "variant": "ms", "spatial": false, "interval_level": 0.8,
    "priors": {"sigma_u": {"upper": 0.5, "tail_prob": 0.05},
               "beta": {"mean": -1, "sd": 2},
               "gamma": {"mean": [0, 1, -1], "sd": [2, 1, 1], "extra_sd": 3},
               "phi": {"a": 1, "b": 1}},
    "sampler": {"n_chains": 2, "n_warmup": 50, "n_samples": 70, "algorithm": "random_walk"}
  })");
  const auto f = config::parse_model_config(j);
  CHECK_FALSE(f.smooth_variance);
  CHECK_FALSE(f.spatial);
  CHECK(f.interval_level == 0.8);
  CHECK(f.priors.sigma_u_prior.upper == 0.5);
  CHECK(f.priors.sigma_u_prior.tail_prob == 0.05);
  CHECK(f.priors.beta_prior_mean == -1);
  CHECK(f.priors.beta_prior_sd == 2);
  CHECK(f.priors.gamma_prior_sd[0] == 2);
  CHECK(f.priors.gamma_extra_prior_sd == 3);
  CHECK(f.priors.phi_prior_a == 1);
  CHECK(f.sampler.n_chains == 2);
  CHECK(f.sampler.algorithm == sampler::Algorithm::random_walk);
  // Round trip through the manifest form.
  const auto g = config::parse_model_config(config::to_json(f));
  CHECK(config::to_json(g) == config::to_json(f));
}

TEST_CASE("rejections") {
  for (const char* bad : {R"({"varient": "js"})", R"({"variant": "xs"})",
                          R"({"interval_level": 1.5})", R"({"priors": {"beta": {"sd": 0}}})",
                          R"({"priors": {"gamma": {"mean": [0, 1]}}})",
                          R"({"sampler": {"n_chains": 0}})", R"({"sampler": {"n_chains": -1}})",
                          R"({"sampler": {"target_accept": 1}})", R"({"gvf_covariates": ["z"]})",
                          R"({"covariates": {"columns": ["x"]}})", R"({"spatial": "yes"})", "[1]"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(config::parse_model_config(json::parse(bad)), ValidationError);
  }
  try {
    config::parse_model_config(json::parse(R"({"priors": {"sigma_u": {"uper": 1}}})"), "m.json");
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("m.json.priors.sigma_u.uper") != std::string::npos);
  }
}

TEST_CASE("covariate binding") {
  testing::TempDir dir;
  dir.write("cov.csv", "area,x1,z1\nb,2,0.5\na,1,-0.5\nc,3,0\n");
  dir.write("model.json", R"({"covariates": {"file": "cov.csv", "columns": ["x1"]},
                             "gvf_covariates": ["z1"]})");
  const auto f = config::read_model_config(dir.file("model.json"));
  REQUIRE(f.covariates);
  CHECK(f.covariates->file == dir.file("cov.csv"));
  model::ModelConfig cfg;
  config::bind_covariates(cfg, *f.covariates, {"a", "b", "c"});
  CHECK(cfg.design.rows() == 3);
  CHECK(cfg.design.cols() == 2);
  CHECK(cfg.design(0, 0) == 1);
  CHECK(cfg.design(0, 1) == 1);
  CHECK(cfg.design(1, 1) == 2);
  CHECK(cfg.gvf_extra.cols() == 1);
  CHECK(cfg.gvf_extra(0, 0) == -0.5);

  CHECK_THROWS_AS(config::bind_covariates(cfg, *f.covariates, {"a", "d"}), ValidationError);
  auto missing = *f.covariates;
  missing.columns = {"x9"};
  CHECK_THROWS_AS(config::bind_covariates(cfg, missing, {"a"}), Error);
  dir.write("dup.csv", "area,x1\na,1\na,2\n");
  auto dup = *f.covariates;
  dup.file = dir.file("dup.csv");
  dup.gvf_columns.clear();
  CHECK_THROWS_AS(config::bind_covariates(cfg, dup, {"a"}), ParseError);
  dir.write("na.csv", "area,x1\na,NA\n");
  dup.file = dir.file("na.csv");
  CHECK_THROWS_AS(config::bind_covariates(cfg, dup, {"a"}), Error);
}

TEST_CASE("scenario files") {
  const auto s = config::parse_scenario(json::parse(R"({
    "scenario": "mu05", "replications": 3, "seed": 9, "clusters_per_stratum": 4,
    "pps_size": "cluster_size", "mu": 0.3,
    "geography": {"grid_size": 30, "n_areas": 5, "n_admin2": 10, "frame_clusters_per_stratum": 20},
    "covariates": {"matern_lattice": 10},
    "sampler": {"n_chains": 2}
  })"));
  CHECK(s.name == "mu05");
  CHECK(s.replications == 3);
  CHECK(s.seed == 9);
  CHECK(s.clusters_per_stratum == 4);
  CHECK(s.pps_size == simulation::SizeMeasure::cluster_size);
  CHECK(s.population.mu == 0.3);
  CHECK(s.geography.n_areas == 5);
  CHECK(s.covariates.matern_lattice == 10);
  CHECK(s.sampler.n_chains == 2);
  CHECK(s.sampler.n_warmup == 500);
  const auto t = config::parse_scenario(config::to_json(s));
  CHECK(config::to_json(t) == config::to_json(s));

  for (const char* bad : {R"({"scenario": "mu02"})", R"({"clusters_per_stratum": 1})",
                          R"({"mu": 0})", R"({"beta": [1, 2]})", R"({"geography": {"grid": 10}})",
                          R"({"pps_size": "area"})", R"({"replication": 2})"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(config::parse_scenario(json::parse(bad)), ValidationError);
  }
}

TEST_CASE("json files") {
  testing::TempDir dir;
  dir.write("bad.json", "{\"a\": ");
  CHECK_THROWS_AS(config::read_json(dir.file("bad.json")), ValidationError);
  CHECK_THROWS_AS(config::read_json(dir.file("absent.json")), ValidationError);
}

}
