#include "saekit/cli.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <span>
#include <sstream>

#include "saekit/benchmark.hpp"
#include "saekit/config.hpp"
#include "saekit/csv.hpp"
#include "saekit/error.hpp"
#include "saekit/fit.hpp"
#include "saekit/graph.hpp"
#include "saekit/log.hpp"
#include "saekit/summary.hpp"
#include "saekit/survey.hpp"

namespace saekit::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
  return os.str();
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

namespace {

// UTC time in ISO 8601. SOURCE_DATE_EPOCH, when set, pins it so manifests
// can be compared byte for byte.
std::string timestamp() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  if (const char* fixed = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::atoll(fixed));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Collects a command's outputs and writes them together with the manifest.
class RunRecord {
 public:
  RunRecord(std::string command, std::vector<std::string> args, std::string out_dir)
      : command_(std::move(command)), args_(std::move(args)), out_dir_(std::move(out_dir)),
        started_(timestamp()) {}

  void input(const std::string& path) {
    inputs_.push_back({{"path", path}, {"sha256", sha256_file(path)}});
  }
  void set_config(json config, std::uint64_t seed) {
    config_ = std::move(config);
    seed_ = seed;
  }
  void warn(const std::string& message) { warnings_.push_back(message); }

  void file(const std::string& name, const std::string& contents) {
    fs::create_directories(out_dir_);
    const fs::path p = fs::path(out_dir_) / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + p.string());
    out << contents;
    if (!out) throw Error("write failed for " + p.string());
    outputs_.push_back({{"path", name}, {"sha256", sha256_hex(contents)}});
  }

  void finish(int exit_code) {
    json m = {{"command", command_},
              {"arguments", args_},
              {"seed", seed_},
              {"software_version", SAEKIT_VERSION},
              {"config", config_},
              {"config_hash", sha256_hex(config_.dump())},
              {"started_at", started_},
              {"finished_at", timestamp()},
              {"inputs", inputs_},
              {"outputs", outputs_},
              {"warnings", warnings_},
              {"conventions",
               {{"model_point", "posterior median"},
                {"model_interval", "equal-tailed posterior quantiles, linear interpolation"},
                {"hajek_interval", "logit-scale delta method, back-transformed"},
                {"coverage", "closed interval, lower <= truth <= upper"}}},
              {"exit_code", exit_code}};
    fs::create_directories(out_dir_);
    std::ofstream out(fs::path(out_dir_) / "manifest.json", std::ios::binary);
    out << m.dump(2) << '\n';
    if (!out) throw Error("write failed for manifest.json");
  }

 private:
  std::string command_;
  std::vector<std::string> args_;
  std::string out_dir_;
  std::string started_;
  json config_ = json::object();
  std::uint64_t seed_ = 0;
  json inputs_ = json::array();
  json outputs_ = json::array();
  json warnings_ = json::array();
};

json estimates_json(std::span<const summary::AreaEstimates> sets) {
  json j = json::object();
  for (const auto& set : sets) {
    for (const auto& e : set.areas) {
      auto num = [](double x) { return std::isnan(x) ? json(nullptr) : json(x); };
      j[e.area][set.method] = {{"point", num(e.point)},
                               {"lower", num(e.lower)},
                               {"upper", num(e.upper)},
                               {"interval_length", num(e.interval_length)},
                               {"flagged", e.flagged}};
    }
  }
  return j;
}

std::string estimates_csv(std::span<const summary::AreaEstimates> sets) {
  std::ostringstream os;
  summary::write_estimates_csv(os, sets);
  return os.str();
}

json diagnostics_json(const sampler::PosteriorSamples& s) {
  json params = json::array();
  for (std::size_t j = 0; j < s.dim; ++j) {
    params.push_back({{"name", s.names[j]},
                      {"rhat", s.rhat[j].value},
                      {"ess", s.ess[j].value},
                      {"flagged", s.rhat[j].flagged || s.ess[j].flagged}});
  }
  json chains = json::array();
  for (const auto& c : s.chains) {
    chains.push_back({{"step_size", c.step_size},
                      {"divergences", c.divergences},
                      {"mean_accept", c.mean_accept},
                      {"mean_tree_depth", c.mean_tree_depth},
                      {"leapfrog_steps", c.leapfrog_steps}});
  }
  return {{"max_rhat", s.max_rhat()},
          {"min_ess", s.min_ess()},
          {"rhat_threshold", kRhatThreshold},
          {"converged", s.max_rhat() <= kRhatThreshold},
          {"divergences", s.divergences},
          {"divergence_flag", s.divergence_flag},
          {"n_chains", s.n_chains},
          {"n_samples", s.n_samples},
          {"chains", chains},
          {"parameters", params}};
}

std::string draws_csv(const sampler::PosteriorSamples& s) {
  std::ostringstream os;
  os << "chain,iteration";
  for (const auto& n : s.names) os << ',' << csv::quote(n);
  os << '\n';
  char buf[40];
  for (std::size_t c = 0; c < s.n_chains; ++c) {
    for (std::size_t i = 0; i < s.n_samples; ++i) {
      os << c + 1 << ',' << i + 1;
      const auto row = s.draw(c, i);
      for (Eigen::Index j = 0; j < row.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", row[j]);
        os << ',' << buf;
      }
      os << '\n';
    }
  }
  return os.str();
}

std::vector<std::string> area_universe(const std::string& areas_path,
                                       const survey::DirectEstimates& direct) {
  if (!areas_path.empty()) return survey::read_area_list(areas_path);
  std::vector<std::string> names;
  for (const auto& e : direct.areas) names.push_back(e.area);
  return names;
}

// First-seen order of the area column, used when no area list is given.
std::vector<std::string> areas_in_file(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  const std::size_t col = table.column("area");
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto& row : table.rows()) {
    if (seen.insert(row.fields[col]).second) names.push_back(row.fields[col]);
  }
  return names;
}

struct Common {
  std::uint64_t seed = 2024;
  std::size_t workers = 1;
  std::string out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Master random seed")->capture_default_str();
  app->add_option("--workers", c.workers, "Maximum concurrent threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--out", c.out, "Output directory")->required();
}

struct DirectArgs {
  std::string microdata;
  std::string areas;
  double level = 0.90;
};

int cmd_direct(const DirectArgs& a, const Common& c, const std::vector<std::string>& args,
               std::ostream& err) {
  RunRecord rec("direct", args, c.out);
  rec.input(a.microdata);
  if (!a.areas.empty()) rec.input(a.areas);
  rec.set_config({{"interval_level", a.level}}, c.seed);
  std::vector<std::string> areas =
      a.areas.empty() ? areas_in_file(a.microdata) : survey::read_area_list(a.areas);
  const survey::SurveyDataset data = survey::read_microdata(a.microdata, std::move(areas));
  const survey::DirectEstimates direct = survey::direct_estimates(data);
  const summary::AreaEstimates hajek = summary::hajek_intervals(direct, a.level);

  std::ostringstream d;
  survey::write_direct_csv(d, direct);
  rec.file("direct.csv", d.str());
  const std::vector<summary::AreaEstimates> sets{hajek};
  rec.file("estimates.csv", estimates_csv(sets));
  rec.file("estimates.json", estimates_json(sets).dump(2) + "\n");
  std::size_t flagged = 0;
  for (const auto& e : hajek.areas) flagged += e.flagged;
  if (flagged) rec.warn(std::to_string(flagged) + " areas have undefined or degenerate intervals");
  rec.finish(kExitOk);
  err << "direct: " << direct.size() << " areas written to " << c.out << '\n';
  return kExitOk;
}

struct FitArgs {
  std::string direct;
  std::string areas;
  std::string adjacency;
  std::string config;
  std::string variant;
  std::string spatial;
  bool draws = false;
};

int cmd_fit(const FitArgs& a, const Common& c, const std::vector<std::string>& args,
            std::ostream& err) {
  RunRecord rec("fit", args, c.out);
  log::ScopedSink sink([&](const std::string& m) {
    rec.warn(m);
    err << "warning: " << m << '\n';
  });

  config::ModelFile file;
  if (!a.config.empty()) {
    rec.input(a.config);
    file = config::read_model_config(a.config);
  }
  if (!a.variant.empty()) file.smooth_variance = a.variant == "js";
  if (!a.spatial.empty()) file.spatial = a.spatial == "on";
  file.sampler.seed = c.seed;
  file.sampler.workers = c.workers;
  rec.set_config(config::to_json(file), c.seed);

  rec.input(a.direct);
  if (!a.areas.empty()) rec.input(a.areas);
  survey::DirectEstimates direct = survey::read_direct_csv(a.direct);
  const std::vector<std::string> areas = area_universe(a.areas, direct);
  direct = survey::read_direct_csv(a.direct, areas);

  if (file.smooth_variance) {
    bool any = false;
    for (const auto& e : direct.areas) any = any || e.has_variance();
    if (!any) throw ValidationError("joint smoothing needs v_hat for at least one area");
  }

  std::optional<graph::ScaledIcarPrecision> icar;
  if (file.spatial) {
    if (a.adjacency.empty()) throw ValidationError("spatial models need --adjacency");
    rec.input(a.adjacency);
    const graph::AreaGraph g = graph::build_graph(graph::read_adjacency(a.adjacency, areas));
    if (!g.connected() && !file.allow_disconnected) {
      throw ValidationError("adjacency graph has " + std::to_string(g.component_count()) +
                            " components; set allow_disconnected to scale each separately");
    }
    icar = graph::scale_icar(graph::icar_precision(g), file.allow_disconnected
                                                           ? graph::ComponentPolicy::per_component
                                                           : graph::ComponentPolicy::reject);
  }

  model::ModelConfig cfg = file.priors;
  cfg.spatial = file.spatial;
  cfg.smooth_variance = file.smooth_variance;
  cfg.interval_level = file.interval_level;
  if (file.covariates) {
    rec.input(file.covariates->file);
    config::bind_covariates(cfg, *file.covariates, areas);
  } else {
    const model::ModelConfig base = model::ModelConfig::intercept_only(areas.size(), cfg.spatial,
                                                                         cfg.smooth_variance);
    cfg.design = base.design;
    cfg.gvf_extra = base.gvf_extra;
  }

  const FitResult fit = fit_area_model(std::move(cfg), model::ModelData{direct, icar}, file.sampler);

  const std::vector<summary::AreaEstimates> sets{fit.estimates};
  rec.file("estimates.csv", estimates_csv(sets));
  rec.file("estimates.json", estimates_json(sets).dump(2) + "\n");
  json hypers = {{"method", fit.estimates.method}, {"level", fit.hypers.level}};
  for (const auto& h : fit.hypers.entries) {
    hypers["parameters"].push_back(
        {{"name", h.name}, {"point", h.point}, {"lower", h.lower}, {"upper", h.upper}});
  }
  rec.file("hyperparameters.json", hypers.dump(2) + "\n");
  rec.file("diagnostics.json", diagnostics_json(fit.samples).dump(2) + "\n");
  if (a.draws) rec.file("draws.csv", draws_csv(fit.samples));

  int code = kExitOk;
  const double rhat = fit.samples.max_rhat();
  if (rhat > kRhatThreshold) {
    std::ostringstream m;
    m << "max split R-hat " << csv::format_number(rhat) << " exceeds " << kRhatThreshold;
    rec.warn(m.str());
    err << "warning: " << m.str() << '\n';
    code = kExitConvergence;
  }
  if (fit.samples.divergence_flag) {
    rec.warn(std::to_string(fit.samples.divergences) + " divergent transitions");
    err << "warning: " << fit.samples.divergences << " divergent transitions\n";
  }
  rec.finish(code);
  err << "fit: " << fit.estimates.method << ", max R-hat " << csv::format_number(rhat)
      << ", results in " << c.out << '\n';
  return code;
}

struct ScenarioArgs {
  std::string scenario = "mu01";
  std::string config;
  std::optional<std::size_t> replications;
};

simulation::ScenarioConfig load_scenario(const ScenarioArgs& a, const Common& c, RunRecord& rec,
                                         bool seed_given) {
  simulation::ScenarioConfig s;
  if (!a.config.empty()) {
    rec.input(a.config);
    s = config::read_scenario(a.config);
  } else {
    s = simulation::ScenarioConfig::preset(a.scenario);
  }
  if (a.replications) s.replications = *a.replications;
  if (seed_given || a.config.empty()) s.seed = c.seed;
  s.workers = c.workers;
  s.validate();
  rec.set_config(config::to_json(s), s.seed);
  return s;
}

int cmd_benchmark(const ScenarioArgs& a, const Common& c, bool seed_given,
                  const std::vector<std::string>& args, std::ostream& err) {
  RunRecord rec("benchmark", args, c.out);
  const simulation::ScenarioConfig s = load_scenario(a, c, rec, seed_given);
  std::size_t done = 0;
  const simulation::BenchmarkResult r =
      simulation::run_benchmark(s, [&](const simulation::ReplicationResult& rr) {
        ++done;
        err << "replication " << done << "/" << s.replications
            << (rr.ok ? "" : " failed: " + rr.error) << '\n';
      });
  std::ostringstream table, reps;
  simulation::write_benchmark_csv(table, r);
  simulation::write_replications_csv(reps, r);
  rec.file("benchmark.csv", table.str());
  rec.file("replications.csv", reps.str());
  std::size_t unconverged = 0;
  for (const auto& rr : r.replications) {
    if (!rr.ok) rec.warn("replication " + std::to_string(rr.index) + " failed: " + rr.error);
    if (rr.ok && rr.max_rhat > kRhatThreshold) ++unconverged;
  }
  if (unconverged) {
    rec.warn(std::to_string(unconverged) + " replications had a fit with R-hat above " +
             csv::format_number(kRhatThreshold));
  }
  rec.finish(kExitOk);
  err << "benchmark: " << r.completed << " of " << r.requested << " replications completed\n";
  return r.completed > 0 ? kExitOk : kExitInternal;
}

int cmd_simulate(const ScenarioArgs& a, std::size_t replication, const Common& c, bool seed_given,
                 const std::vector<std::string>& args, std::ostream& err) {
  RunRecord rec("simulate", args, c.out);
  const simulation::ScenarioConfig s = load_scenario(a, c, rec, seed_given);
  using namespace simulation;
  const SyntheticGeography geo = generate_geography(s.geography, derive_seed(s.seed, {0, 1}));
  const Covariates cov = draw_covariates(geo, s.covariates, derive_seed(s.seed, {0, 2}));
  const Population pop =
      draw_population(geo, cov, s.population, derive_seed(s.seed, {1, replication, 0}));
  const SurveySample sample =
      sample_survey(geo, pop, s.clusters_per_stratum, derive_seed(s.seed, {1, replication, 1}),
                    s.pps_size);

  std::ostringstream micro, areas, adj, truth;
  micro << "response,weight,stratum,cluster,area\n";
  const auto& d = sample.data;
  for (const auto& u : d.units()) {
    micro << u.response << ',' << csv::format_number(u.weight) << ',' << csv::quote(d.stratum_name(u.stratum))
          << ',' << csv::quote(d.cluster_name(u.cluster)) << ',' << csv::quote(d.areas()[u.area]) << '\n';
  }
  for (const auto& n : geo.area_names) areas << n << '\n';
  const auto& g = *geo.area_graph;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (auto j : g.neighbors(i)) {
      if (i < j) adj << g.names()[i] << '\t' << g.names()[j] << '\n';
    }
  }
  truth << "area,truth\n";
  for (std::size_t i = 0; i < geo.n_areas(); ++i) {
    truth << csv::quote(geo.area_names[i]) << ',' << csv::format_number(pop.truth[i]) << '\n';
  }
  rec.file("microdata.csv", micro.str());
  rec.file("areas.txt", areas.str());
  rec.file("adjacency.tsv", adj.str());
  rec.file("truth.csv", truth.str());
  rec.finish(kExitOk);
  err << "simulate: " << d.units().size() << " respondents in " << sample.clusters.size()
      << " clusters written to " << c.out << '\n';
  return kExitOk;
}

int cmd_replay(const std::string& manifest_path, const std::string& out_dir, std::ostream& out,
               std::ostream& err) {
  const json m = config::read_json(manifest_path);
  if (!m.contains("inputs") || !m.contains("outputs")) {
    throw ValidationError(manifest_path + ": not a run manifest");
  }
  for (const auto& in : m["inputs"]) {
    const std::string path = in.at("path").get<std::string>();
    if (sha256_file(path) != in.at("sha256").get<std::string>()) {
      throw ValidationError("input " + path + " changed since the recorded run");
    }
  }
  const std::vector<std::string> args = replay_arguments(m, out_dir);
  const int code = run(args, out, err);
  if (code != m.value("exit_code", 0)) {
    err << "replay: exit code " << code << " differs from recorded " << m.value("exit_code", 0) << '\n';
    return kExitInternal;
  }
  std::string dir;
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--out") dir = args[i + 1];
  }
  std::size_t mismatched = 0;
  for (const auto& o : m["outputs"]) {
    const std::string name = o.at("path").get<std::string>();
    if (sha256_file((fs::path(dir) / name).string()) != o.at("sha256").get<std::string>()) {
      err << "replay: " << name << " differs from the recorded output\n";
      ++mismatched;
    }
  }
  if (mismatched) return kExitInternal;
  err << "replay: all " << m["outputs"].size() << " outputs reproduced\n";
  return kExitOk;
}

}  // namespace

std::vector<std::string> replay_arguments(const json& manifest, const std::string& out_dir) {
  if (!manifest.contains("arguments") || !manifest["arguments"].is_array()) {
    throw ValidationError("manifest has no argument list");
  }
  std::vector<std::string> args = manifest["arguments"].get<std::vector<std::string>>();
  if (!out_dir.empty()) {
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
      if (args[i] == "--out") args[i + 1] = out_dir;
    }
  }
  return args;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Small area estimation with smoothed direct estimates", "saekit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SAEKIT_VERSION);

  Common common;
  DirectArgs direct;
  auto* c_direct = app.add_subcommand("direct", "Weighted direct estimates and design-based intervals");
  c_direct->add_option("--microdata", direct.microdata, "CSV with response,weight,stratum,cluster,area")
      ->required()
      ->check(CLI::ExistingFile);
  c_direct->add_option("--areas", direct.areas, "Area list, one name per line")->check(CLI::ExistingFile);
  c_direct->add_option("--level", direct.level, "Interval level")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  add_common(c_direct, common);

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Fit an area-level model to direct estimates");
  c_fit->add_option("--direct", fit.direct, "direct.csv from the direct command")
      ->required()
      ->check(CLI::ExistingFile);
  c_fit->add_option("--areas", fit.areas, "Area list; defaults to the order of --direct")
      ->check(CLI::ExistingFile);
  c_fit->add_option("--adjacency", fit.adjacency, "Tab-separated neighbor pairs")
      ->check(CLI::ExistingFile);
  c_fit->add_option("--config", fit.config, "Model configuration JSON")->check(CLI::ExistingFile);
  c_fit->add_option("--variant", fit.variant, "ms (variances fixed) or js (joint smoothing)")
      ->check(CLI::IsMember({"ms", "js"}));
  c_fit->add_option("--spatial", fit.spatial, "BYM2 linking prior")->check(CLI::IsMember({"on", "off"}));
  c_fit->add_flag("--draws", fit.draws, "Also write draws.csv");
  add_common(c_fit, common);

  ScenarioArgs scen;
  std::size_t replications = 0;
  auto* c_bench = app.add_subcommand("benchmark", "Repeated-sampling comparison of the five estimators");
  auto* c_sim = app.add_subcommand("simulate", "Write one simulated survey with its true proportions");
  std::size_t replication = 0;
  for (auto* c : {c_bench, c_sim}) {
    c->add_option("--scenario", scen.scenario, "mu01, mu05 or large_sample")
        ->check(CLI::IsMember({"mu01", "mu05", "large_sample"}))
        ->capture_default_str();
    c->add_option("--config", scen.config, "Scenario JSON (overrides --scenario)")
        ->check(CLI::ExistingFile);
    add_common(c, common);
  }
  c_bench->add_option("--replications", replications, "Number of replications")
      ->check(CLI::PositiveNumber);
  c_sim->add_option("--replication", replication, "Replication index to draw")->capture_default_str();

  std::string manifest;
  std::string replay_out;
  auto* c_replay = app.add_subcommand("replay", "Re-run a recorded command and compare outputs");
  c_replay->add_option("manifest", manifest, "manifest.json of the run")->required()->check(CLI::ExistingFile);
  c_replay->add_option("--out", replay_out, "Output directory (default: the recorded one)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*c_direct) return cmd_direct(direct, common, args, err);
    if (*c_fit) return cmd_fit(fit, common, args, err);
    if (*c_bench) {
      if (c_bench->count("--replications")) scen.replications = replications;
      return cmd_benchmark(scen, common, c_bench->count("--seed") > 0, args, err);
    }
    if (*c_sim) return cmd_simulate(scen, replication, common, c_sim->count("--seed") > 0, args, err);
    if (*c_replay) return cmd_replay(manifest, replay_out, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace saekit::cli
