#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "jpo/dataset.hpp"
#include "jpo/inference.hpp"
#include "jpo/ls_core.hpp"
#include "jpo/nuisance.hpp"
#include "jpo/orthogonal.hpp"

namespace jpo {

enum class EstimatorKind { ls, ls_adjusted, orthogonal_linear, orthogonal_logistic };

const char* estimator_name(EstimatorKind k);
EstimatorKind parse_estimator(const std::string& name);

struct RunConfig {
  std::string input_path;
  CsvBindings bindings;
  std::optional<StratumSpec> stratum_spec;  // absent: use the bound stratum column
  EstimatorKind estimator = EstimatorKind::ls;

  // V_S source (required for ls-adjusted and orthogonal-*).
  std::optional<std::string> vs_column;
  std::vector<std::string> prognostic_predictors;  // nonempty: fit score, use as V_S

  // Nuisance model (ls-adjusted / orthogonal-*).
  int folds = 5;
  double clip = 0.01;
  int spline_degree = 3;
  std::vector<double> knot_probs = {0.25, 0.5, 0.75};
  bool interact_stratum = true;
  double ridge = 1e-6;
  std::optional<double> known_propensity;

  bool do_bootstrap = true;
  int boot_reps = 500;
  bool cluster_bootstrap = false;
  std::uint64_t seed = 0;
  double level = 0.95;

  std::vector<Eigen::MatrixXd> gamma_grid;  // each |S| x 2
  bool clamp_report = false;
  std::optional<std::string> pseudo_outcome_path;  // CSV audit export
  double rank_tol = 1e-8;
  ExecMode exec = ExecMode::parallel;
};

// Throws InvalidConfig; called before any data is read.
void validate_config(const RunConfig& config);

struct SensitivityRow {
  Eigen::MatrixXd gamma;
  double theta1 = 0.0;
  double theta2 = 0.0;
  bool boundary = false;
};

struct XiReport {
  Eigen::VectorXd beta, lambda;
  Eigen::VectorXd se;  // 2p
  int iterations = 0;
  bool converged = false;
  double score_norm = 0.0;
  double min_design_eigenvalue = 0.0;
  double extreme_q_share = 0.0;
};

struct RunReport {
  std::string schema = "jpo-report/1";
  std::string estimator;
  std::uint64_t seed = 0;
  std::string input_path;
  int n = 0;
  int n_strata = 0;
  std::vector<std::string> config_echo;  // key=value lines sufficient to reproduce

  RankDiagnostic rank;
  double theta1 = 0.0, theta2 = 0.0;
  bool theta_boundary = false;
  double mu0 = 0.0, mu1 = 0.0;
  Eigen::Vector4d cells = Eigen::Vector4d::Zero();  // (00, 01, 10, 11)
  bool cell_boundary = false;
  bool clamped_for_reporting = false;

  std::vector<TargetInterval> sandwich_intervals;
  std::vector<TargetInterval> bootstrap_intervals;
  int bootstrap_replicates = 0;
  int bootstrap_failures = 0;

  std::optional<XiReport> xi;
  std::optional<ConsistencyCheck> consistency;
  std::optional<std::string> consistency_note;  // set when theta1 == theta2
  std::vector<SensitivityRow> sensitivity;
  std::vector<std::string> warnings;
};

// Estimation pipeline on an already validated dataset (stratum assigned).
RunReport run_pipeline(const ValidatedDataset& data, const RunConfig& config);

// Full CLI path: read CSV, construct stratum, prognostic score, pipeline.
RunReport run(const RunConfig& config);

// Names and targets used by the bootstrap: theta1, theta2, the four cells,
// and mu1.
std::vector<std::string> pipeline_target_names();
Eigen::VectorXd pipeline_targets(const ValidatedDataset& data, const RunConfig& config);

std::string render_table(const RunReport& report);
std::string render_json(const RunReport& report);
RunReport parse_json(const std::string& text);
bool report_equal(const RunReport& a, const RunReport& b, double tol = 0.0);

}  // namespace jpo
