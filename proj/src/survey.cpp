#include "saekit/survey.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "saekit/csv.hpp"
#include "saekit/error.hpp"

namespace saekit::survey {

SurveyDataset::SurveyDataset(std::vector<std::string> areas) : areas_(std::move(areas)) {
  for (std::size_t a = 0; a < areas_.size(); ++a) {
    if (areas_[a].empty()) throw ValidationError("area names must be non-empty");
    if (!area_lookup_.emplace(areas_[a], a).second) {
      throw ValidationError("duplicate area '" + areas_[a] + "' in area universe");
    }
  }
  units_by_area_.resize(areas_.size());
  clusters_by_area_.resize(areas_.size());
}

std::size_t SurveyDataset::area_index(std::string_view name) const {
  auto it = area_lookup_.find(std::string(name));
  if (it == area_lookup_.end()) {
    throw ValidationError("unknown area '" + std::string(name) + "'");
  }
  return it->second;
}

std::size_t SurveyDataset::intern_stratum(std::string_view name) {
  auto [it, inserted] = stratum_lookup_.emplace(std::string(name), stratum_names_.size());
  if (inserted) stratum_names_.emplace_back(name);
  return it->second;
}

void SurveyDataset::add_unit(int response, double weight, std::string_view stratum,
                             std::string_view cluster, std::string_view area) {
  if (response != 0 && response != 1) {
    throw ValidationError("response must be 0 or 1, got " + std::to_string(response));
  }
  if (!(weight > 0) || !std::isfinite(weight)) {
    throw ValidationError("weight must be positive and finite");
  }
  const std::size_t a = area_index(area);
  const std::size_t s = intern_stratum(stratum);

  std::size_t c = 0;
  auto it = cluster_lookup_.find(std::string(cluster));
  if (it == cluster_lookup_.end()) {
    c = cluster_names_.size();
    cluster_lookup_.emplace(std::string(cluster), c);
    cluster_names_.emplace_back(cluster);
    cluster_stratum_.push_back(s);
    cluster_area_.push_back(a);
    clusters_by_area_[a].push_back(c);
  } else {
    c = it->second;
    if (cluster_stratum_[c] != s) {
      throw ValidationError("cluster '" + std::string(cluster) + "' appears in strata '" +
                            stratum_names_[cluster_stratum_[c]] + "' and '" +
                            std::string(stratum) + "'");
    }
    if (cluster_area_[c] != a) {
      throw ValidationError("cluster '" + std::string(cluster) + "' appears in areas '" +
                            areas_[cluster_area_[c]] + "' and '" + std::string(area) + "'");
    }
  }
  units_by_area_[a].push_back(units_.size());
  units_.push_back(SurveyUnit{response, weight, s, c, a});
}

std::span<const std::size_t> SurveyDataset::units_in_area(std::size_t area) const {
  return units_by_area_.at(area);
}

std::span<const std::size_t> SurveyDataset::clusters_in_area(std::size_t area) const {
  return clusters_by_area_.at(area);
}

double hajek_estimate(const SurveyDataset& data, std::size_t area) {
  auto idx = data.units_in_area(area);
  if (idx.empty()) throw NoDataError("no data for area '" + data.areas()[area] + "'");
  double wy = 0;
  double w = 0;
  for (std::size_t i : idx) {
    const SurveyUnit& u = data.units()[i];
    wy += u.weight * u.response;
    w += u.weight;
  }
  return wy / w;
}

VarianceEstimate hajek_variance(const SurveyDataset& data, std::size_t area) {
  auto clusters = data.clusters_in_area(area);
  const std::size_t m = clusters.size();
  if (m < 2) {
    throw InestimableVarianceError("variance inestimable for area '" + data.areas()[area] +
                                   "': " + std::to_string(m) + " sampled cluster(s)");
  }
  const double p_hat = hajek_estimate(data, area);

  // Position of each global cluster index within this area's list.
  std::unordered_map<std::size_t, std::size_t> slot;
  slot.reserve(m);
  for (std::size_t j = 0; j < m; ++j) slot.emplace(clusters[j], j);

  std::vector<double> z(m, 0.0);
  double total_weight = 0;
  for (std::size_t i : data.units_in_area(area)) {
    const SurveyUnit& u = data.units()[i];
    z[slot.at(u.cluster)] += u.weight * (u.response - p_hat);
    total_weight += u.weight;
  }
  double zbar = 0;
  for (double v : z) zbar += v;
  zbar /= static_cast<double>(m);
  double ss = 0;
  for (double v : z) ss += (v - zbar) * (v - zbar);

  const double md = static_cast<double>(m);
  VarianceEstimate out;
  out.v_hat = md / (md - 1.0) * ss / (total_weight * total_weight);
  out.dof = static_cast<int>(m) - 1;
  return out;
}

std::string_view to_string(AreaStatus status) {
  switch (status) {
    case AreaStatus::ok:
      return "ok";
    case AreaStatus::single_cluster:
      return "single_cluster";
    case AreaStatus::unsampled:
      return "unsampled";
  }
  return "unsampled";
}

AreaStatus area_status_from_string(std::string_view text) {
  if (text == "ok") return AreaStatus::ok;
  if (text == "single_cluster") return AreaStatus::single_cluster;
  if (text == "unsampled") return AreaStatus::unsampled;
  throw ValidationError("unknown area status '" + std::string(text) + "'");
}

DirectEstimates direct_estimates(const SurveyDataset& data) {
  DirectEstimates out;
  out.areas.reserve(data.area_count());
  const double nan = std::nan("");
  for (std::size_t a = 0; a < data.area_count(); ++a) {
    DirectEstimate e;
    e.area = data.areas()[a];
    e.n = static_cast<int>(data.units_in_area(a).size());
    e.m = static_cast<int>(data.clusters_in_area(a).size());
    e.p_hat = nan;
    e.v_hat = nan;
    if (e.n == 0) {
      e.status = AreaStatus::unsampled;
    } else {
      e.p_hat = hajek_estimate(data, a);
      if (e.m >= 2) {
        VarianceEstimate v = hajek_variance(data, a);
        e.v_hat = v.v_hat;
        e.dof = v.dof;
        e.status = AreaStatus::ok;
      } else {
        e.status = AreaStatus::single_cluster;
      }
    }
    out.areas.push_back(std::move(e));
  }
  return out;
}

std::vector<std::string> read_area_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::vector<std::string> names;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line = line.substr(3);
    if (line.empty() || line[0] == '#') continue;
    names.push_back(line);
  }
  if (names.empty()) throw ValidationError(path + ": area list is empty");
  return names;
}

SurveyDataset read_microdata(const std::string& path, std::vector<std::string> areas) {
  csv::Table table = csv::read_file(path);
  const std::size_t c_resp = table.column("response");
  const std::size_t c_weight = table.column("weight");
  const std::size_t c_stratum = table.column("stratum");
  const std::size_t c_cluster = table.column("cluster");
  const std::size_t c_area = table.column("area");

  SurveyDataset data(std::move(areas));
  for (const csv::Row& row : table.rows()) {
    const std::string& r = row.fields[c_resp];
    int response = -1;
    if (r == "0" || r == "0.0") response = 0;
    if (r == "1" || r == "1.0") response = 1;
    if (response < 0) {
      throw ParseError(path, row.line, "response must be 0 or 1, got '" + r + "'");
    }
    const double weight = csv::parse_double(row, c_weight, path, "weight");
    try {
      data.add_unit(response, weight, row.fields[c_stratum], row.fields[c_cluster],
                    row.fields[c_area]);
    } catch (const ValidationError& e) {
      throw ParseError(path, row.line, e.what());
    }
  }
  return data;
}

void write_direct_csv(std::ostream& out, const DirectEstimates& direct) {
  out << "area,status,n,m,p_hat,v_hat,dof\n";
  for (const DirectEstimate& e : direct.areas) {
    out << csv::quote(e.area) << ',' << to_string(e.status) << ',' << e.n << ',' << e.m << ','
        << csv::format_number(e.p_hat) << ',' << csv::format_number(e.v_hat) << ',' << e.dof
        << '\n';
  }
}

DirectEstimates read_direct_csv(const std::string& path, const std::vector<std::string>& areas) {
  csv::Table table = csv::read_file(path);
  const std::size_t c_area = table.column("area");
  const std::size_t c_status = table.column("status");
  const std::size_t c_n = table.column("n");
  const std::size_t c_m = table.column("m");
  const std::size_t c_p = table.column("p_hat");
  const std::size_t c_v = table.column("v_hat");
  const std::size_t c_dof = table.column("dof");
  const double nan = std::nan("");
  auto number = [&](const csv::Row& row, std::size_t col, const std::string& name) {
    return row.fields[col] == "NA" ? nan : csv::parse_double(row, col, path, name);
  };

  std::vector<DirectEstimate> rows;
  std::unordered_map<std::string, std::size_t> seen;
  for (const csv::Row& row : table.rows()) {
    DirectEstimate e;
    e.area = row.fields[c_area];
    if (!seen.emplace(e.area, rows.size()).second) {
      throw ParseError(path, row.line, "duplicate area '" + e.area + "'");
    }
    try {
      e.status = area_status_from_string(row.fields[c_status]);
    } catch (const ValidationError& err) {
      throw ParseError(path, row.line, err.what());
    }
    e.n = static_cast<int>(csv::parse_integer(row, c_n, path, "n"));
    e.m = static_cast<int>(csv::parse_integer(row, c_m, path, "m"));
    e.dof = static_cast<int>(csv::parse_integer(row, c_dof, path, "dof"));
    e.p_hat = number(row, c_p, "p_hat");
    e.v_hat = number(row, c_v, "v_hat");
    if (e.n < 0 || e.m < 0 || e.dof < 0) throw ParseError(path, row.line, "counts must be nonnegative");
    if (e.sampled() && !std::isfinite(e.p_hat)) {
      throw ParseError(path, row.line, "sampled area needs a finite p_hat");
    }
    if (e.has_variance() && !(std::isfinite(e.v_hat) && e.v_hat >= 0)) {
      throw ParseError(path, row.line, "area with status ok needs a nonnegative v_hat");
    }
    if (e.has_variance() && e.dof < 1) {
      throw ParseError(path, row.line, "area with status ok needs dof >= 1");
    }
    rows.push_back(std::move(e));
  }

  DirectEstimates out;
  if (areas.empty()) {
    out.areas = std::move(rows);
    return out;
  }
  out.areas.reserve(areas.size());
  for (const std::string& name : areas) {
    auto it = seen.find(name);
    if (it == seen.end()) throw ValidationError(path + ": no row for area '" + name + "'");
    out.areas.push_back(rows[it->second]);
  }
  if (rows.size() != areas.size()) {
    for (const auto& e : rows) {
      if (std::find(areas.begin(), areas.end(), e.area) == areas.end()) {
        throw ValidationError(path + ": area '" + e.area + "' is not in the area list");
      }
    }
  }
  return out;
}

}  // namespace saekit::survey
