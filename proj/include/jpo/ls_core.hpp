#pragma once

#include <Eigen/Core>

#include "jpo/risks.hpp"

namespace jpo {

struct RankDiagnostic {
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double condition = 0.0;  // sigma_max / sigma_min
  bool deficient = false;
};

// Smallest/largest singular values of the |S| x 2 matrix with rows
// (1 - p0(s), p0(s)); deficient iff sigma_min <= tol * sigma_max.
RankDiagnostic check_rank(const StratumRiskTable& risks, double tol = 1e-8);

struct ThetaEstimate {
  double theta1 = 0.0;  // P(Y(1)=1 | Y(0)=0)
  double theta2 = 0.0;  // P(Y(1)=1 | Y(0)=1)
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  bool has_cov = false;
  bool boundary = false;  // some estimate outside [0,1]

  Eigen::Vector2d vec() const { return {theta1, theta2}; }
};

ThetaEstimate solve_theta(const StratumRiskTable& risks, double rank_tol = 1e-8);

// Per-row estimating-function contributions Z_S [U1 - p1(S) + (theta1 -
// theta2)(U0 - p0(S))]; rows align with the table's row order.
Eigen::MatrixXd theta_psi_rows(const StratumRiskTable& risks, const ThetaEstimate& theta);

// Sandwich covariance C^{-1} Var(psi) C^{-1} / n with C the stratum-average
// of Z_s Z_s^T. Requires pseudo-outcomes on the table.
Eigen::Matrix2d theta_variance(const StratumRiskTable& risks, const ThetaEstimate& theta);

// Covariance of the stacked influence functions of (theta1, theta2, mu0,
// mu1), used by the delta method for the joint cells.
Eigen::Matrix4d influence_covariance(const StratumRiskTable& risks, const ThetaEstimate& theta);

struct JointPODistribution {
  // Cells indexed [y0][y1]: P(Y(0)=y0, Y(1)=y1).
  double cell[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();  // order (00, 01, 10, 11)
  bool has_cov = false;
  bool boundary = false;

  Eigen::Vector4d vec() const { return {cell[0][0], cell[0][1], cell[1][0], cell[1][1]}; }
};

// Gradient of cell (y0, y1) with respect to (theta1, theta2, mu0, mu1).
Eigen::Vector4d cell_gradient(int y0, int y1, double theta1, double theta2, double mu0, double mu1);

JointPODistribution joint_distribution(const ThetaEstimate& theta, const MarginalY0& mu,
                                       const Eigen::Matrix4d* omega = nullptr);

// Offsets gamma_{s,y}: col 0 holds gamma_{s,0}, col 1 gamma_{s,1}.
struct SensitivitySpec {
  Eigen::MatrixXd gamma;  // n_strata x 2

  static SensitivitySpec zero(int n_strata) {
    return {Eigen::MatrixXd::Zero(n_strata, 2)};
  }
};

ThetaEstimate solve_theta_sensitivity(const StratumRiskTable& risks, const SensitivitySpec& gamma,
                                      double rank_tol = 1e-8);

struct ConsistencyCheck {
  double p1_marginal = 0.0;
  double implied_mu1 = 0.0;
  double direct_mu1 = 0.0;
  double discrepancy = 0.0;  // implied - direct
};

ConsistencyCheck consistency_check(const ThetaEstimate& theta, const MarginalY0& mu,
                                   double p1_marginal);

}  // namespace jpo
