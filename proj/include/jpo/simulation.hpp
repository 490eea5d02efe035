#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "jpo/dataset.hpp"
#include "jpo/nuisance.hpp"
#include "jpo/orthogonal.hpp"
#include "jpo/parallel.hpp"

namespace jpo {

// Synthetic data-generating process: truncated-normal effect modifier, a
// correlated auxiliary covariate quartile-binned into strata, randomized (or
// covariate-tilted) treatment, logistic untreated outcome, and a linear
// structural model for the treated outcome given the untreated one.
struct DGPConfig {
  int n = 10000;
  std::uint64_t seed = 1;
  double beta0 = 0.3, beta1 = 0.1;      // P(Y(1)=1 | Y(0)=0, v) = beta0 + beta1 v
  double lambda0 = 0.7, lambda1 = -0.05;  // P(Y(1)=1 | Y(0)=1, v) = lambda0 + lambda1 v
  double y0_intercept = -0.5;
  double y0_s_slope = 0.3;   // on (S - 2)
  double y0_v_slope = 0.2;
  double x_other_slope = 0.25;
  double vs_lo = -2.0, vs_hi = 2.0;
  double treat_prob = 0.5;
  double confound_slope = 0.0;  // logit tilt of treatment in v; 0 = randomized
  int n_strata = 4;
};

struct SimData {
  ValidatedDataset data;        // columns "vs", "x_other"
  Eigen::ArrayXi y0_latent, y1_latent;
};

SimData generate(const DGPConfig& config);

struct OracleTargets {
  double beta0, beta1, lambda0, lambda1;
  double theta1, theta2;
  double e_vs;  // mean of the truncated effect modifier

  Eigen::VectorXd vec() const {
    Eigen::VectorXd v(6);
    v << beta0, beta1, lambda0, lambda1, theta1, theta2;
    return v;
  }
};

OracleTargets oracle_targets(const DGPConfig& config);

// True nuisance functions evaluated on a generated sample, plus the true xi;
// used by the score and orthogonality probes.
struct OracleNuisance {
  OrthogonalData data;
  Eigen::VectorXd xi_true;
};
OracleNuisance oracle_nuisance(const SimData& sim, const DGPConfig& config);

// Symmetric-difference Gateaux derivative of the mean score at (xi, eta) in
// a nuisance direction (dq, dr, dpi; null pointers = unperturbed) or in a
// xi direction. Common draws across +t/-t; SE from per-row differences.
struct ProbeResult {
  Eigen::VectorXd derivative;  // per component of psi
  Eigen::VectorXd se;
  double max_ratio = 0.0;      // max_j |derivative_j| / se_j
};
ProbeResult gateaux_probe_nuisance(const OrthogonalData& data, LinkKind link,
                                   const Eigen::VectorXd& xi, const Eigen::VectorXd* dq,
                                   const Eigen::VectorXd* dr, const Eigen::VectorXd* dpi,
                                   double t, double clip = 0.01);
ProbeResult gateaux_probe_xi(const OrthogonalData& data, LinkKind link, const Eigen::VectorXd& xi,
                             const Eigen::VectorXd& direction, double t);

struct StudyConfig {
  DGPConfig dgp;
  int reps = 200;
  std::uint64_t seed = 2024;  // replication substream seed
  LinkKind link = LinkKind::linear;
  int folds = 1;  // no-split default: parametric nuisances on randomized data
  double clip = 0.01;
  int spline_degree = 3;
  std::vector<double> knot_probs = {0.25, 0.5, 0.75};
  double ridge = 1e-6;
  bool bootstrap_ci = true;
  int boot_reps = 500;
  double level = 0.95;
  ExecMode exec = ExecMode::parallel;
};

struct MCParamReport {
  std::string name;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double empirical_se = 0.0;
  double coverage_percentile = 0.0;
  double coverage_normal = 0.0;
};

struct MCReport {
  std::vector<MCParamReport> params;
  int replications = 0;
  int failures = 0;
  Eigen::MatrixXd estimates;  // kept replications x 6, for histogram export
};

// One pipeline evaluation (nuisances -> initializer -> Newton -> standardize)
// returning (beta0, beta1, lambda0, lambda1, theta1, theta2).
Eigen::VectorXd study_estimator(const ValidatedDataset& data, const StudyConfig& cfg);

MCReport run_study(const StudyConfig& cfg);

std::vector<std::string> study_target_names();
std::string mc_table(const MCReport& report);
void write_mc_csv(const std::string& path, const MCReport& report);
void write_estimates_csv(const std::string& path, const MCReport& report);

}  // namespace jpo
