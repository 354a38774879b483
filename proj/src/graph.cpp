#include "saekit/graph.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include "saekit/error.hpp"
#include "saekit/log.hpp"

namespace saekit::graph {

AreaGraph::AreaGraph(std::vector<std::string> names,
                     std::vector<std::vector<std::size_t>> neighbors)
    : names_(std::move(names)), neighbors_(std::move(neighbors)) {
  const std::size_t n = names_.size();
  if (n < 2) throw ValidationError("an area graph needs at least two areas");
  if (neighbors_.size() != n) throw ValidationError("neighbor lists do not match area count");
  for (std::size_t a = 0; a < n; ++a) {
    auto& nb = neighbors_[a];
    std::sort(nb.begin(), nb.end());
    if (std::adjacent_find(nb.begin(), nb.end()) != nb.end()) {
      throw ValidationError("duplicate neighbor for area '" + names_[a] + "'");
    }
    for (std::size_t b : nb) {
      if (b >= n) throw ValidationError("neighbor index out of range");
      if (b == a) throw ValidationError("self-loop at area '" + names_[a] + "'");
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b : neighbors_[a]) {
      if (!std::binary_search(neighbors_[b].begin(), neighbors_[b].end(), a)) {
        throw ValidationError("asymmetric adjacency between '" + names_[a] + "' and '" +
                              names_[b] + "'");
      }
    }
  }

  constexpr std::size_t unset = static_cast<std::size_t>(-1);
  component_.assign(n, unset);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n; ++start) {
    if (component_[start] != unset) continue;
    const std::size_t label = n_components_++;
    component_[start] = label;
    stack.push_back(start);
    while (!stack.empty()) {
      std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t b : neighbors_[a]) {
        if (component_[b] == unset) {
          component_[b] = label;
          stack.push_back(b);
        }
      }
    }
  }
}

std::size_t AreaGraph::edge_count() const {
  std::size_t twice = 0;
  for (const auto& nb : neighbors_) twice += nb.size();
  return twice / 2;
}

AreaGraph build_graph(const AdjacencySpec& spec) {
  const std::size_t n = spec.names.size();
  if (n < 2) throw ValidationError("an area graph needs at least two areas");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t a = 0; a < n; ++a) {
    if (!index.emplace(spec.names[a], a).second) {
      throw ValidationError("duplicate area '" + spec.names[a] + "'");
    }
  }
  auto lookup = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw ValidationError("unknown area '" + name + "' in adjacency");
    return it->second;
  };

  std::set<std::pair<std::size_t, std::size_t>> declared;
  for (const auto& [from, to] : spec.neighbor_pairs) {
    const std::size_t a = lookup(from);
    const std::size_t b = lookup(to);
    if (a == b) throw ValidationError("self-loop at area '" + from + "'");
    declared.emplace(a, b);
  }
  std::size_t one_sided = 0;
  std::vector<std::vector<std::size_t>> neighbors(n);
  for (const auto& [a, b] : declared) {
    if (!declared.count({b, a})) ++one_sided;
    if (a < b || !declared.count({b, a})) {
      neighbors[a].push_back(b);
      neighbors[b].push_back(a);
    }
  }
  if (one_sided > 0) {
    log::warn("adjacency was asymmetric: symmetrized " + std::to_string(one_sided) +
              " one-sided neighbor declaration(s)");
  }
  for (auto& nb : neighbors) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return AreaGraph(spec.names, std::move(neighbors));
}

AreaGraph graph_from_edges(std::vector<std::string> names,
                           const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::vector<std::size_t>> neighbors(names.size());
  for (const auto& [a, b] : edges) {
    if (a >= names.size() || b >= names.size()) {
      throw ValidationError("edge index out of range");
    }
    if (a == b) throw ValidationError("self-loop in edge list");
    neighbors[a].push_back(b);
    neighbors[b].push_back(a);
  }
  for (auto& nb : neighbors) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return AreaGraph(std::move(names), std::move(neighbors));
}

Eigen::MatrixXd icar_precision(const AreaGraph& graph) {
  const auto n = static_cast<Eigen::Index>(graph.size());
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto& nb = graph.neighbors(static_cast<std::size_t>(a));
    q(a, a) = static_cast<double>(nb.size());
    for (std::size_t b : nb) q(a, static_cast<Eigen::Index>(b)) = -1.0;
  }
  return q;
}

namespace {

std::vector<std::size_t> components_of(const Eigen::MatrixXd& q) {
  const std::size_t n = static_cast<std::size_t>(q.rows());
  constexpr std::size_t unset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> label(n, unset);
  std::size_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (label[s] != unset) continue;
    label[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t b = 0; b < n; ++b) {
        if (b != a && q(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) != 0.0 &&
            label[b] == unset) {
          label[b] = next;
          stack.push_back(b);
        }
      }
    }
    ++next;
  }
  return label;
}

}  // namespace

Eigen::MatrixXd ScaledIcarPrecision::generalized_inverse() const {
  return basis * eigenvalues.cwiseInverse().asDiagonal() * basis.transpose();
}

ScaledIcarPrecision scale_icar(const Eigen::MatrixXd& q, ComponentPolicy policy) {
  const Eigen::Index n = q.rows();
  if (n < 2 || q.cols() != n) throw ValidationError("ICAR precision must be square, size >= 2");
  if (!q.isApprox(q.transpose(), 1e-12)) throw ValidationError("ICAR precision is not symmetric");
  for (Eigen::Index a = 0; a < n; ++a) {
    if (std::abs(q.row(a).sum()) > 1e-9 * std::max(1.0, q(a, a))) {
      throw ValidationError("ICAR precision rows must sum to zero");
    }
  }

  ScaledIcarPrecision out;
  out.component = components_of(q);
  const std::size_t n_comp =
      1 + *std::max_element(out.component.begin(), out.component.end());
  if (n_comp > 1 && policy == ComponentPolicy::reject) {
    throw ValidationError("adjacency graph has " + std::to_string(n_comp) +
                          " connected components; drop disconnected areas or enable "
                          "per-component handling");
  }

  out.q_star = Eigen::MatrixXd::Zero(n, n);
  out.marginal_variances = Eigen::VectorXd::Zero(n);
  out.rank_deficiency = static_cast<int>(n_comp);
  std::vector<Eigen::VectorXd> vectors;
  std::vector<double> values;

  for (std::size_t c = 0; c < n_comp; ++c) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index a = 0; a < n; ++a) {
      if (out.component[static_cast<std::size_t>(a)] == c) members.push_back(a);
    }
    const auto k = static_cast<Eigen::Index>(members.size());
    if (k == 1) {
      log::warn("singleton component at index " + std::to_string(members[0]) +
                ": its spatial effect is identically zero");
      out.scale_factors.push_back(1.0);
      continue;
    }
    Eigen::MatrixXd block(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) block(i, j) = q(members[i], members[j]);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block);
    if (eig.info() != Eigen::Success) throw ValidationError("eigendecomposition failed");
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const double cutoff = kZeroEigenTolerance * lambda.cwiseAbs().maxCoeff();
    int zeros = 0;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      if (std::abs(lambda(i)) < cutoff) {
        ++zeros;
        continue;
      }
      if (lambda(i) < 0) throw ValidationError("ICAR precision is not positive semidefinite");
      var += eig.eigenvectors().col(i).cwiseAbs2() / lambda(i);
    }
    if (zeros != 1) {
      throw ValidationError("malformed graph: component has " + std::to_string(zeros) +
                            " zero eigenvalues, expected 1");
    }
    // Geometric mean of the raw marginal variances is the scale factor.
    const double scale = std::exp(var.array().log().mean());
    out.scale_factors.push_back(scale);
    for (Eigen::Index i = 0; i < k; ++i) {
      out.marginal_variances(members[i]) = var(i) / scale;
      for (Eigen::Index j = 0; j < k; ++j) {
        out.q_star(members[i], members[j]) = scale * block(i, j);
      }
    }
    for (Eigen::Index i = 0; i < k; ++i) {
      if (std::abs(lambda(i)) < cutoff) continue;
      Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
      for (Eigen::Index j = 0; j < k; ++j) v(members[j]) = eig.eigenvectors()(j, i);
      vectors.push_back(std::move(v));
      values.push_back(scale * lambda(i));
    }
  }

  out.basis.resize(n, static_cast<Eigen::Index>(vectors.size()));
  out.eigenvalues.resize(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    out.basis.col(static_cast<Eigen::Index>(i)) = vectors[i];
    out.eigenvalues(static_cast<Eigen::Index>(i)) = values[i];
  }
  return out;
}

Eigen::VectorXd sample_constrained_icar(const ScaledIcarPrecision& prec, Rng& rng) {
  Eigen::VectorXd z(prec.eigenvalues.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z(i) = rng.normal() / std::sqrt(prec.eigenvalues(i));
  }
  return prec.basis * z;
}

AdjacencySpec read_adjacency(const std::string& path, std::vector<std::string> names) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  AdjacencySpec spec;
  spec.names = std::move(names);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError(path, line_no, "expected 'areaA<TAB>areaB'");
    }
    std::string a = line.substr(0, tab);
    std::string b = line.substr(tab + 1);
    if (a.empty() || b.empty()) throw ParseError(path, line_no, "empty area name");
    spec.neighbor_pairs.emplace_back(a, b);
    spec.neighbor_pairs.emplace_back(b, a);
  }
  return spec;
}

}  // namespace saekit::graph
