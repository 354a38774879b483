#include "saekit/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_map>

#include "saekit/csv.hpp"
#include "saekit/error.hpp"

namespace saekit::config {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and remembers which were used, so the
// remainder can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ValidationError(where + ": " + what);
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

  const json* find(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, double fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) fail(where(key), "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) fail(where(key), "must be finite");
    return x;
  }

  double positive(const std::string& key, double fallback) {
    const double x = number(key, fallback);
    if (!(x > 0)) fail(where(key), "must be positive");
    return x;
  }

  double open_unit(const std::string& key, double fallback) {
    const double x = number(key, fallback);
    if (!(x > 0 && x < 1)) fail(where(key), "must lie in (0, 1)");
    return x;
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback, std::uint64_t min = 0) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<long long>() < 0)) {
      fail(where(key), "expected a nonnegative integer");
    }
    const auto x = v->get<std::uint64_t>();
    if (x < min) fail(where(key), "must be at least " + std::to_string(min));
    return x;
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(where(key), "expected true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, std::string fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_string()) fail(where(key), "expected a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_array()) fail(where(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const json& e = (*v)[i];
      if (!e.is_number() || !std::isfinite(e.get<double>())) {
        fail(where(key) + "[" + std::to_string(i) + "]", "expected a finite number");
      }
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& key) {
    const json* v = find(key);
    if (!v) return {};
    if (!v->is_array()) fail(where(key), "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_string()) fail(where(key) + "[" + std::to_string(i) + "]", "expected a string");
      out.push_back((*v)[i].get<std::string>());
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) fail(where(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

model::PcPrior parse_pc(const json& j, const std::string& path, model::PcPrior base) {
  ObjectReader r(j, path);
  base.upper = r.positive("upper", base.upper);
  base.tail_prob = r.open_unit("tail_prob", base.tail_prob);
  r.finish();
  return base;
}

void parse_priors(const json& j, const std::string& path, model::ModelConfig& c) {
  ObjectReader r(j, path);
  if (const json* v = r.find("sigma_u")) c.sigma_u_prior = parse_pc(*v, r.where("sigma_u"), c.sigma_u_prior);
  if (const json* v = r.find("sigma_tau")) {
    c.sigma_tau_prior = parse_pc(*v, r.where("sigma_tau"), c.sigma_tau_prior);
  }
  if (const json* v = r.find("beta")) {
    ObjectReader b(*v, r.where("beta"));
    c.beta_prior_mean = b.number("mean", c.beta_prior_mean);
    c.beta_prior_sd = b.positive("sd", c.beta_prior_sd);
    b.finish();
  }
  if (const json* v = r.find("gamma")) {
    ObjectReader g(*v, r.where("gamma"));
    const auto mean = g.numbers("mean", {c.gamma_prior_mean.begin(), c.gamma_prior_mean.end()});
    const auto sd = g.numbers("sd", {c.gamma_prior_sd.begin(), c.gamma_prior_sd.end()});
    if (mean.size() != 3) ObjectReader::fail(g.where("mean"), "expected 3 entries (gamma0, gamma1, gamma2)");
    if (sd.size() != 3) ObjectReader::fail(g.where("sd"), "expected 3 entries (gamma0, gamma1, gamma2)");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!(sd[i] > 0)) ObjectReader::fail(g.where("sd"), "entries must be positive");
      c.gamma_prior_mean[i] = mean[i];
      c.gamma_prior_sd[i] = sd[i];
    }
    c.gamma_extra_prior_sd = g.positive("extra_sd", c.gamma_extra_prior_sd);
    g.finish();
  }
  if (const json* v = r.find("phi")) {
    ObjectReader p(*v, r.where("phi"));
    c.phi_prior_a = p.positive("a", c.phi_prior_a);
    c.phi_prior_b = p.positive("b", c.phi_prior_b);
    p.finish();
  }
  r.finish();
}

std::filesystem::path directory_of(const std::string& path) {
  return std::filesystem::path(path).parent_path();
}

}  // namespace

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": invalid JSON (" + e.what() + ")");
  }
}

sampler::SamplerConfig parse_sampler(const json& j, const std::string& path,
                                     sampler::SamplerConfig base) {
  ObjectReader r(j, path);
  base.n_chains = r.count("n_chains", base.n_chains, 1);
  base.n_warmup = r.count("n_warmup", base.n_warmup);
  base.n_samples = r.count("n_samples", base.n_samples, 1);
  base.target_accept = r.open_unit("target_accept", base.target_accept);
  base.max_tree_depth = static_cast<int>(r.count("max_tree_depth", static_cast<std::uint64_t>(base.max_tree_depth), 1));
  base.init_radius = r.positive("init_radius", base.init_radius);
  const std::string algo = r.string("algorithm", base.algorithm == sampler::Algorithm::nuts ? "nuts" : "random_walk");
  if (algo == "nuts") {
    base.algorithm = sampler::Algorithm::nuts;
  } else if (algo == "random_walk") {
    base.algorithm = sampler::Algorithm::random_walk;
  } else {
    ObjectReader::fail(r.where("algorithm"), "expected \"nuts\" or \"random_walk\"");
  }
  r.finish();
  base.validate();
  return base;
}

ModelFile parse_model_config(const json& j, const std::string& source) {
  ModelFile f;
  ObjectReader r(j, source);
  const std::string variant = r.string("variant", "js");
  if (variant == "js") {
    f.smooth_variance = true;
  } else if (variant == "ms") {
    f.smooth_variance = false;
  } else {
    ObjectReader::fail(r.where("variant"), "expected \"ms\" or \"js\"");
  }
  f.spatial = r.boolean("spatial", f.spatial);
  f.interval_level = r.open_unit("interval_level", f.interval_level);
  f.allow_disconnected = r.boolean("allow_disconnected", f.allow_disconnected);
  if (const json* v = r.find("priors")) parse_priors(*v, r.where("priors"), f.priors);
  std::vector<std::string> gvf = r.strings("gvf_covariates");
  if (const json* v = r.find("covariates")) {
    ObjectReader c(*v, r.where("covariates"));
    CovariateBinding b;
    b.file = c.string("file", "");
    if (b.file.empty()) ObjectReader::fail(c.where("file"), "is required");
    b.area_column = c.string("area_column", b.area_column);
    b.columns = c.strings("columns");
    c.finish();
    f.covariates = std::move(b);
  }
  if (!gvf.empty()) {
    if (!f.covariates) {
      ObjectReader::fail(r.where("gvf_covariates"), "needs a covariates file to read columns from");
    }
    f.covariates->gvf_columns = std::move(gvf);
  }
  if (const json* v = r.find("sampler")) f.sampler = parse_sampler(*v, r.where("sampler"), f.sampler);
  r.finish();
  return f;
}

ModelFile read_model_config(const std::string& path) {
  ModelFile f = parse_model_config(read_json(path), path);
  if (f.covariates) {
    std::filesystem::path p(f.covariates->file);
    if (p.is_relative()) f.covariates->file = (directory_of(path) / p).string();
  }
  return f;
}

void bind_covariates(model::ModelConfig& config, const CovariateBinding& binding,
                     const std::vector<std::string>& areas) {
  const csv::Table table = csv::read_file(binding.file);
  const std::size_t c_area = table.column(binding.area_column);
  std::unordered_map<std::string, const csv::Row*> by_area;
  for (const csv::Row& row : table.rows()) {
    if (!by_area.emplace(row.fields[c_area], &row).second) {
      throw ParseError(binding.file, row.line, "duplicate area '" + row.fields[c_area] + "'");
    }
  }
  auto fill = [&](const std::vector<std::string>& cols, Eigen::MatrixXd& m, Eigen::Index offset) {
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const std::size_t col = table.column(cols[k]);
      for (std::size_t a = 0; a < areas.size(); ++a) {
        auto it = by_area.find(areas[a]);
        if (it == by_area.end()) {
          throw ValidationError(binding.file + ": no covariate row for area '" + areas[a] + "'");
        }
        const double x = csv::parse_double(*it->second, col, binding.file, cols[k]);
        if (!std::isfinite(x)) {
          throw ParseError(binding.file, it->second->line, cols[k] + " must be finite");
        }
        m(static_cast<Eigen::Index>(a), offset + static_cast<Eigen::Index>(k)) = x;
      }
    }
  };
  const auto A = static_cast<Eigen::Index>(areas.size());
  config.design.resize(A, 1 + static_cast<Eigen::Index>(binding.columns.size()));
  config.design.col(0).setOnes();
  fill(binding.columns, config.design, 1);
  config.gvf_extra.resize(A, static_cast<Eigen::Index>(binding.gvf_columns.size()));
  fill(binding.gvf_columns, config.gvf_extra, 0);
}

simulation::ScenarioConfig parse_scenario(const json& j, const std::string& source) {
  ObjectReader r(j, source);
  simulation::ScenarioConfig s = simulation::ScenarioConfig::preset(r.string("scenario", "mu01"));
  s.replications = r.count("replications", s.replications, 1);
  s.seed = r.count("seed", s.seed);
  s.clusters_per_stratum = r.count("clusters_per_stratum", s.clusters_per_stratum, 2);
  s.interval_level = r.open_unit("interval_level", s.interval_level);
  {
    const std::string size = r.string("pps_size", s.pps_size == simulation::SizeMeasure::cluster_size
                                                      ? "cluster_size"
                                                      : "frame_population");
    if (size == "frame_population") {
      s.pps_size = simulation::SizeMeasure::frame_population;
    } else if (size == "cluster_size") {
      s.pps_size = simulation::SizeMeasure::cluster_size;
    } else {
      ObjectReader::fail(r.where("pps_size"), "expected \"frame_population\" or \"cluster_size\"");
    }
  }
  s.population.mu = r.open_unit("mu", s.population.mu);
  {
    const auto beta = r.numbers("beta", {s.population.beta.begin(), s.population.beta.end()});
    if (beta.size() != 5) ObjectReader::fail(r.where("beta"), "expected 5 coefficients");
    std::copy(beta.begin(), beta.end(), s.population.beta.begin());
  }
  s.population.area_sd = r.number("area_sd", s.population.area_sd);
  s.population.cluster_sd = r.number("cluster_sd", s.population.cluster_sd);
  if (const json* v = r.find("geography")) {
    ObjectReader g(*v, r.where("geography"));
    auto& G = s.geography;
    G.grid_size = g.count("grid_size", G.grid_size, 4);
    G.n_areas = g.count("n_areas", G.n_areas, 2);
    G.single_stratum_areas = g.count("single_stratum_areas", G.single_stratum_areas);
    G.n_admin2 = g.count("n_admin2", G.n_admin2, 2);
    G.frame_clusters_per_stratum = g.count("frame_clusters_per_stratum", G.frame_clusters_per_stratum, 2);
    G.urban_fraction = g.open_unit("urban_fraction", G.urban_fraction);
    G.lloyd_iterations = g.count("lloyd_iterations", G.lloyd_iterations);
    G.admin2_lloyd_iterations = g.count("admin2_lloyd_iterations", G.admin2_lloyd_iterations);
    G.log_population_mean = g.number("log_population_mean", G.log_population_mean);
    G.log_population_sd = g.number("log_population_sd", G.log_population_sd);
    G.log_population_range = g.positive("log_population_range", G.log_population_range);
    G.log_population_noise_sd = g.number("log_population_noise_sd", G.log_population_noise_sd);
    G.population_lattice = g.count("population_lattice", G.population_lattice, 2);
    G.mean_cluster_size = g.positive("mean_cluster_size", G.mean_cluster_size);
    g.finish();
  }
  if (const json* v = r.find("covariates")) {
    ObjectReader c(*v, r.where("covariates"));
    s.covariates.matern_range = c.positive("matern_range", s.covariates.matern_range);
    s.covariates.matern_lattice = c.count("matern_lattice", s.covariates.matern_lattice, 2);
    c.finish();
  }
  if (const json* v = r.find("sampler")) s.sampler = parse_sampler(*v, r.where("sampler"), s.sampler);
  r.finish();
  s.validate();
  return s;
}

simulation::ScenarioConfig read_scenario(const std::string& path) {
  return parse_scenario(read_json(path), path);
}

json to_json(const sampler::SamplerConfig& c) {
  return {{"n_chains", c.n_chains},
          {"n_warmup", c.n_warmup},
          {"n_samples", c.n_samples},
          {"target_accept", c.target_accept},
          {"max_tree_depth", c.max_tree_depth},
          {"init_radius", c.init_radius},
          {"algorithm", c.algorithm == sampler::Algorithm::nuts ? "nuts" : "random_walk"}};
}

json to_json(const simulation::ScenarioConfig& s) {
  const auto& G = s.geography;
  return {{"scenario", s.name},
          {"replications", s.replications},
          {"seed", s.seed},
          {"clusters_per_stratum", s.clusters_per_stratum},
          {"interval_level", s.interval_level},
          {"pps_size", s.pps_size == simulation::SizeMeasure::cluster_size ? "cluster_size"
                                                                           : "frame_population"},
          {"mu", s.population.mu},
          {"beta", s.population.beta},
          {"area_sd", s.population.area_sd},
          {"cluster_sd", s.population.cluster_sd},
          {"geography",
           {{"grid_size", G.grid_size},
            {"n_areas", G.n_areas},
            {"single_stratum_areas", G.single_stratum_areas},
            {"n_admin2", G.n_admin2},
            {"frame_clusters_per_stratum", G.frame_clusters_per_stratum},
            {"urban_fraction", G.urban_fraction},
            {"lloyd_iterations", G.lloyd_iterations},
            {"admin2_lloyd_iterations", G.admin2_lloyd_iterations},
            {"log_population_mean", G.log_population_mean},
            {"log_population_sd", G.log_population_sd},
            {"log_population_range", G.log_population_range},
            {"log_population_noise_sd", G.log_population_noise_sd},
            {"population_lattice", G.population_lattice},
            {"mean_cluster_size", G.mean_cluster_size}}},
          {"covariates",
           {{"matern_range", s.covariates.matern_range},
            {"matern_lattice", s.covariates.matern_lattice}}},
          {"sampler", to_json(s.sampler)}};
}

json to_json(const ModelFile& f) {
  const auto& p = f.priors;
  json j = {{"variant", f.smooth_variance ? "js" : "ms"},
            {"spatial", f.spatial},
            {"interval_level", f.interval_level},
            {"allow_disconnected", f.allow_disconnected},
            {"priors",
             {{"sigma_u", {{"upper", p.sigma_u_prior.upper}, {"tail_prob", p.sigma_u_prior.tail_prob}}},
              {"sigma_tau",
               {{"upper", p.sigma_tau_prior.upper}, {"tail_prob", p.sigma_tau_prior.tail_prob}}},
              {"beta", {{"mean", p.beta_prior_mean}, {"sd", p.beta_prior_sd}}},
              {"gamma",
               {{"mean", p.gamma_prior_mean},
                {"sd", p.gamma_prior_sd},
                {"extra_sd", p.gamma_extra_prior_sd}}},
              {"phi", {{"a", p.phi_prior_a}, {"b", p.phi_prior_b}}}}},
            {"sampler", to_json(f.sampler)}};
  if (f.covariates) {
    j["covariates"] = {{"file", f.covariates->file},
                       {"area_column", f.covariates->area_column},
                       {"columns", f.covariates->columns}};
    if (!f.covariates->gvf_columns.empty()) j["gvf_covariates"] = f.covariates->gvf_columns;
  }
  return j;
}

}  // namespace saekit::config
