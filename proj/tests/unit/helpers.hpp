#ifndef SAEKIT_TEST_HELPERS_HPP
#define SAEKIT_TEST_HELPERS_HPP

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("saekit-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

  std::string write(const std::string& name, const std::string& contents) const {
    std::ofstream out(file(name), std::ios::binary);
    out << contents;
    return file(name);
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing

#include <Eigen/Dense>

#include "saekit/graph.hpp"
#include "saekit/model.hpp"
#include "saekit/survey.hpp"

namespace testing {

inline saekit::graph::AreaGraph grid_graph(std::size_t rows, std::size_t cols) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < rows * cols; ++i) names.push_back("g" + std::to_string(i));
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (j + 1 < cols) e.emplace_back(i * cols + j, i * cols + j + 1);
      if (i + 1 < rows) e.emplace_back(i * cols + j, (i + 1) * cols + j);
    }
  }
  return saekit::graph::graph_from_edges(names, e);
}

// Plausible direct estimates for `n` areas named like grid_graph's nodes.
inline saekit::survey::DirectEstimates random_direct(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> p(0.05, 0.6);
  std::uniform_int_distribution<int> m(2, 16);
  std::uniform_int_distribution<int> per_cluster(5, 15);
  saekit::survey::DirectEstimates out;
  for (std::size_t a = 0; a < n; ++a) {
    saekit::survey::DirectEstimate e;
    e.area = "g" + std::to_string(a);
    e.status = saekit::survey::AreaStatus::ok;
    e.m = m(gen);
    e.n = e.m * per_cluster(gen);
    e.dof = e.m - 1;
    e.p_hat = p(gen);
    e.v_hat = e.p_hat * (1 - e.p_hat) / e.n * std::uniform_real_distribution<double>(0.8, 3.0)(gen);
    out.areas.push_back(e);
  }
  return out;
}

// Model on a rows x cols grid with one covariate column, optionally spatial / JS.
inline saekit::model::AreaModel grid_model(std::mt19937_64& gen, std::size_t rows, std::size_t cols,
                                           bool spatial, bool smooth, std::size_t gvf_extra = 0) {
  const std::size_t n = rows * cols;
  saekit::model::ModelConfig cfg = saekit::model::ModelConfig::intercept_only(n, spatial, smooth);
  std::normal_distribution<double> z;
  cfg.design.conservativeResize(Eigen::NoChange, 2);
  for (std::size_t a = 0; a < n; ++a) cfg.design(static_cast<Eigen::Index>(a), 1) = z(gen);
  cfg.gvf_extra = Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(gvf_extra));
  for (Eigen::Index i = 0; i < cfg.gvf_extra.size(); ++i) cfg.gvf_extra.data()[i] = z(gen);
  saekit::model::ModelData data{random_direct(gen, n), std::nullopt};
  if (spatial) {
    data.icar = saekit::graph::scale_icar(saekit::graph::icar_precision(grid_graph(rows, cols)));
  }
  return saekit::model::AreaModel(std::move(cfg), std::move(data));
}

// A state near the bulk: small latent effects, log V near log V-hat.
inline Eigen::VectorXd random_state(std::mt19937_64& gen, const saekit::model::AreaModel& m) {
  std::normal_distribution<double> z;
  const auto& L = m.layout();
  Eigen::VectorXd theta(static_cast<Eigen::Index>(m.dimension()));
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = z(gen);
  theta(static_cast<Eigen::Index>(L.beta)) = -1.0 + 0.3 * z(gen);
  theta(static_cast<Eigen::Index>(L.log_sigma_u)) = std::log(0.3) + 0.3 * z(gen);
  if (L.smooth_variance) {
    const auto& obs = m.observed_areas();
    for (std::size_t k = 0; k < obs.size(); ++k) {
      theta(static_cast<Eigen::Index>(L.log_v + k)) =
          std::log(m.data().direct[obs[k]].v_hat) + 0.3 * z(gen);
    }
    theta(static_cast<Eigen::Index>(L.gamma + 1)) = 1.0 + 0.2 * z(gen);
    theta(static_cast<Eigen::Index>(L.gamma + 2)) = -1.0 + 0.2 * z(gen);
    theta(static_cast<Eigen::Index>(L.log_sigma_tau)) = std::log(0.3) + 0.3 * z(gen);
  }
  return theta;
}

}  // namespace testing

#endif  // SAEKIT_TEST_HELPERS_HPP
