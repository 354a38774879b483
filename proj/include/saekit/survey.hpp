#ifndef SAEKIT_SURVEY_HPP
#define SAEKIT_SURVEY_HPP

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace saekit::survey {

/// One respondent. Identifiers are indices into the owning dataset's tables.
struct SurveyUnit {
  int response = 0;   // 0 or 1
  double weight = 1;  // final weight, inverse inclusion probability
  std::size_t stratum = 0;
  std::size_t cluster = 0;
  std::size_t area = 0;
};

/// Unit-level records of a stratified two-stage cluster sample.
///
/// The area universe is fixed at construction and may include areas with no
/// sampled units. Every cluster belongs to exactly one stratum and one area;
/// add_unit enforces that and rejects non-binary responses or non-positive
/// weights with a ValidationError.
class SurveyDataset {
 public:
  explicit SurveyDataset(std::vector<std::string> areas);

  void add_unit(int response, double weight, std::string_view stratum,
                std::string_view cluster, std::string_view area);

  const std::vector<std::string>& areas() const noexcept { return areas_; }
  std::size_t area_count() const noexcept { return areas_.size(); }
  std::size_t area_index(std::string_view name) const;

  std::span<const SurveyUnit> units() const noexcept { return units_; }
  /// Indices into units() of the records in `area`, in insertion order.
  std::span<const std::size_t> units_in_area(std::size_t area) const;
  /// Distinct cluster indices sampled in `area`, in first-seen order.
  std::span<const std::size_t> clusters_in_area(std::size_t area) const;

  std::size_t cluster_count() const noexcept { return cluster_names_.size(); }
  std::size_t stratum_count() const noexcept { return stratum_names_.size(); }
  const std::string& cluster_name(std::size_t c) const { return cluster_names_.at(c); }
  const std::string& stratum_name(std::size_t s) const { return stratum_names_.at(s); }

 private:
  std::size_t intern_stratum(std::string_view name);

  std::vector<std::string> areas_;
  std::unordered_map<std::string, std::size_t> area_lookup_;
  std::vector<std::string> stratum_names_;
  std::unordered_map<std::string, std::size_t> stratum_lookup_;
  std::vector<std::string> cluster_names_;
  std::unordered_map<std::string, std::size_t> cluster_lookup_;
  std::vector<std::size_t> cluster_stratum_;
  std::vector<std::size_t> cluster_area_;
  std::vector<SurveyUnit> units_;
  std::vector<std::vector<std::size_t>> units_by_area_;
  std::vector<std::vector<std::size_t>> clusters_by_area_;
};

/// Weighted ratio mean sum(w y) / sum(w) over the units of `area`.
/// Throws NoDataError if the area has no units.
double hajek_estimate(const SurveyDataset& data, std::size_t area);

struct VarianceEstimate {
  double v_hat = 0;
  int dof = 0;
};

/// With-replacement ultimate-cluster variance of the Hajek ratio.
///
/// Residuals e_i = y_i - p_hat are totalled per cluster, z_j = sum w_i e_i,
/// and the between-cluster estimator m/(m-1) sum_j (z_j - zbar)^2 is divided
/// by (sum w_i)^2. Stratification within the area is not used. dof = m - 1.
/// Throws InestimableVarianceError when fewer than two clusters were sampled.
VarianceEstimate hajek_variance(const SurveyDataset& data, std::size_t area);

enum class AreaStatus {
  ok,              // estimate and variance available
  single_cluster,  // estimate available, variance missing (m < 2)
  unsampled,       // no units
};

std::string_view to_string(AreaStatus status);
AreaStatus area_status_from_string(std::string_view text);

struct DirectEstimate {
  std::string area;
  double p_hat = 0;  // NaN when unsampled
  double v_hat = 0;  // NaN unless status == ok
  int dof = 0;       // 0 unless status == ok
  int n = 0;         // units
  int m = 0;         // sampled clusters
  AreaStatus status = AreaStatus::unsampled;

  bool sampled() const noexcept { return status != AreaStatus::unsampled; }
  bool has_variance() const noexcept { return status == AreaStatus::ok; }
};

/// One record per area of the dataset's universe, in canonical order.
struct DirectEstimates {
  std::vector<DirectEstimate> areas;

  std::size_t size() const noexcept { return areas.size(); }
  const DirectEstimate& operator[](std::size_t a) const { return areas[a]; }
};

DirectEstimates direct_estimates(const SurveyDataset& data);

/// Area universe file: one name per line, blank lines and '#' comments skipped.
std::vector<std::string> read_area_list(const std::string& path);

/// Microdata CSV with columns response, weight, stratum, cluster, area.
SurveyDataset read_microdata(const std::string& path, std::vector<std::string> areas);

/// Direct estimates table: area,status,n,m,p_hat,v_hat,dof (6 significant
/// digits, NA for missing values).
void write_direct_csv(std::ostream& out, const DirectEstimates& direct);
/// Reads a table written by write_direct_csv. With a nonempty `areas` the
/// rows are reordered to that universe and every area must appear exactly
/// once; otherwise file order is kept.
DirectEstimates read_direct_csv(const std::string& path, const std::vector<std::string>& areas = {});

}  // namespace saekit::survey

#endif  // SAEKIT_SURVEY_HPP
