#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace jpo {

// Row view used for construction in tests and small fixtures; storage is
// columnar (Dataset).
struct Observation {
  int a = 0;
  int y = 0;
  std::vector<double> v;
  int s = 0;  // 0 = unassigned
  std::optional<std::string> cluster;
};

struct Dataset {
  Eigen::ArrayXi a;  // treatment, 0/1
  Eigen::ArrayXi y;  // outcome, 0/1
  Eigen::ArrayXi s;  // stratum label in 1..n_strata, 0 = unassigned
  Eigen::MatrixXd v;
  std::vector<std::string> v_names;
  std::vector<int> cluster;  // cluster index per row; identity when none given
  std::vector<std::string> cluster_labels;
  bool has_clusters = false;
  int n_strata = 0;

  int n() const { return static_cast<int>(a.size()); }
  int col(const std::string& name) const;  // throws UnknownColumn
  bool has_col(const std::string& name) const;
  void add_column(const std::string& name, const Eigen::VectorXd& values);
  Dataset subset(const std::vector<int>& rows) const;
};

Dataset dataset_from_rows(const std::vector<Observation>& rows,
                          const std::vector<std::string>& v_names = {});

// Immutable after construction; safe to share across threads.
struct ValidatedDataset {
  Dataset data;
  Eigen::MatrixXi cell_counts;  // n_strata x 2, (stratum, arm) observation counts

  int n() const { return data.n(); }
  int n_strata() const { return data.n_strata; }
};

ValidatedDataset validate_dataset(Dataset d);
ValidatedDataset validate_dataset(const std::vector<Observation>& rows,
                                  const std::vector<std::string>& v_names = {});

struct StratumSpec {
  enum class Mode { existing_column, quantile_bins, factor_cross };
  Mode mode = Mode::existing_column;
  std::string column;                       // existing_column / quantile_bins
  int bins = 4;                             // quantile_bins
  std::vector<std::string> cross_columns;   // factor_cross
};

// Fitted level mapping, reusable on new data.
struct StratumMap {
  StratumSpec spec;
  std::vector<double> edges;                     // quantile mode: interior bin edges
  std::vector<std::vector<double>> level_codes;  // cross/existing: value combo per level
  std::vector<std::string> labels;

  int n_levels() const { return static_cast<int>(labels.size()); }
  // Stratum label in 1..n_levels for one row of covariates.
  int assign(const Dataset& d, int row) const;
};

struct StratumResult {
  Dataset data;
  StratumMap map;
};

StratumResult construct_stratum(Dataset d, const StratumSpec& spec);

struct CsvBindings {
  std::string treatment;
  std::string outcome;
  std::optional<std::string> stratum;
  std::optional<std::string> cluster;
};

// Header row required; all non-bound columns are kept as real covariates.
Dataset read_csv(const std::string& path, const CsvBindings& bindings);
void write_csv(const std::string& path, const Dataset& d);

}  // namespace jpo
