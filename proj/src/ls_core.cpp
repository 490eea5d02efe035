#include "jpo/ls_core.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "jpo/common.hpp"

namespace jpo {

namespace {

Eigen::MatrixXd z_matrix(const StratumRiskTable& risks) {
  Eigen::MatrixXd Z(risks.n_strata, 2);
  for (int s = 0; s < risks.n_strata; ++s) {
    Z(s, 0) = 1.0 - risks.p0[s];
    Z(s, 1) = risks.p0[s];
  }
  return Z;
}

ThetaEstimate solve_system(const StratumRiskTable& risks, const Eigen::VectorXd& target,
                           double rank_tol) {
  const auto diag = check_rank(risks, rank_tol);
  if (diag.deficient)
    fail(errc::rank_deficient,
         "ls-core: stratum risk matrix rank-deficient (condition " + std::to_string(diag.condition) +
             ")");
  const Eigen::MatrixXd Z = z_matrix(risks);
  const Eigen::Matrix2d A = Z.transpose() * Z;
  const Eigen::Vector2d b = Z.transpose() * target;
  const Eigen::Vector2d sol = A.ldlt().solve(b);
  ThetaEstimate est;
  est.theta1 = sol[0];
  est.theta2 = sol[1];
  est.boundary = std::min(est.theta1, est.theta2) < 0.0 || std::max(est.theta1, est.theta2) > 1.0;
  return est;
}

}  // namespace

RankDiagnostic check_rank(const StratumRiskTable& risks, double tol) {
  if (risks.n_strata < 2) fail(errc::invalid_config, "ls-core: need at least two strata");
  const Eigen::MatrixXd Z = z_matrix(risks);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Z);
  RankDiagnostic d;
  d.sigma_max = svd.singularValues()[0];
  d.sigma_min = svd.singularValues()[svd.singularValues().size() - 1];
  d.condition = d.sigma_min > 0.0 ? d.sigma_max / d.sigma_min
                                  : std::numeric_limits<double>::infinity();
  d.deficient = d.sigma_min <= tol * d.sigma_max;
  return d;
}

ThetaEstimate solve_theta(const StratumRiskTable& risks, double rank_tol) {
  return solve_system(risks, risks.p1, rank_tol);
}

Eigen::MatrixXd theta_psi_rows(const StratumRiskTable& risks, const ThetaEstimate& theta) {
  if (!risks.has_pseudo())
    fail(errc::missing_nuisance, "ls-core: pseudo-outcomes required for variance estimation");
  const int n = risks.n();
  Eigen::MatrixXd psi(n, 2);
  const double spread = theta.theta1 - theta.theta2;
  for (int i = 0; i < n; ++i) {
    const int s = risks.s_row[i] - 1;
    const double resid =
        risks.U1[i] - risks.p1[s] + spread * (risks.U0[i] - risks.p0[s]);
    psi(i, 0) = (1.0 - risks.p0[s]) * resid;
    psi(i, 1) = risks.p0[s] * resid;
  }
  return psi;
}

Eigen::Matrix2d theta_variance(const StratumRiskTable& risks, const ThetaEstimate& theta) {
  const Eigen::MatrixXd psi = theta_psi_rows(risks, theta);
  const int n = psi.rows();
  const Eigen::MatrixXd Z = z_matrix(risks);
  const Eigen::Matrix2d C = (Z.transpose() * Z) / risks.n_strata;
  const Eigen::RowVector2d mean = psi.colwise().mean();
  const Eigen::MatrixXd centered = psi.rowwise() - mean;
  const Eigen::Matrix2d var = (centered.transpose() * centered) / n;
  const Eigen::Matrix2d cinv = C.inverse();
  return cinv * var * cinv / n;
}

Eigen::Matrix4d influence_covariance(const StratumRiskTable& risks, const ThetaEstimate& theta) {
  const Eigen::MatrixXd psi = theta_psi_rows(risks, theta);
  const int n = psi.rows();
  const Eigen::MatrixXd Z = z_matrix(risks);
  const Eigen::Matrix2d C = (Z.transpose() * Z) / risks.n_strata;
  const Eigen::Matrix2d cinv = C.inverse();
  const double mu1 = risks.pi_s.dot(risks.p0);
  Eigen::MatrixXd inf(n, 4);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d t = cinv * psi.row(i).transpose();
    inf(i, 0) = t[0];
    inf(i, 1) = t[1];
    inf(i, 3) = risks.U0[i] - mu1;   // mu1 = overall mean of U0
    inf(i, 2) = -inf(i, 3);
  }
  const Eigen::RowVector4d mean = inf.colwise().mean();
  const Eigen::MatrixXd centered = inf.rowwise() - mean;
  return (centered.transpose() * centered) / n / n;
}

Eigen::Vector4d cell_gradient(int y0, int y1, double theta1, double theta2, double mu0,
                              double mu1) {
  if (y0 == 0 && y1 == 0) return {-mu0, 0.0, 1.0 - theta1, 0.0};
  if (y0 == 0 && y1 == 1) return {mu0, 0.0, theta1, 0.0};
  if (y0 == 1 && y1 == 0) return {0.0, -mu1, 0.0, 1.0 - theta2};
  return {0.0, mu1, 0.0, theta2};
}

JointPODistribution joint_distribution(const ThetaEstimate& theta, const MarginalY0& mu,
                                       const Eigen::Matrix4d* omega) {
  JointPODistribution j;
  j.cell[0][0] = (1.0 - theta.theta1) * mu.mu0;
  j.cell[0][1] = theta.theta1 * mu.mu0;
  j.cell[1][0] = (1.0 - theta.theta2) * mu.mu1;
  j.cell[1][1] = theta.theta2 * mu.mu1;
  j.boundary = theta.boundary;
  for (int y0 = 0; y0 < 2; ++y0)
    for (int y1 = 0; y1 < 2; ++y1)
      if (j.cell[y0][y1] < 0.0 || j.cell[y0][y1] > 1.0) j.boundary = true;
  if (omega) {
    Eigen::Matrix4d grads;  // column j = gradient of cell j
    int col = 0;
    for (int y0 = 0; y0 < 2; ++y0)
      for (int y1 = 0; y1 < 2; ++y1)
        grads.col(col++) = cell_gradient(y0, y1, theta.theta1, theta.theta2, mu.mu0, mu.mu1);
    j.cov = grads.transpose() * (*omega) * grads;
    j.has_cov = true;
  }
  return j;
}

ThetaEstimate solve_theta_sensitivity(const StratumRiskTable& risks, const SensitivitySpec& gamma,
                                      double rank_tol) {
  if (gamma.gamma.rows() != risks.n_strata || gamma.gamma.cols() != 2)
    fail(errc::dimension_mismatch, "ls-core: sensitivity grid must be |S| x 2");
  Eigen::VectorXd adjusted(risks.n_strata);
  for (int s = 0; s < risks.n_strata; ++s)
    adjusted[s] = risks.p1[s] -
                  (gamma.gamma(s, 0) * (1.0 - risks.p0[s]) + gamma.gamma(s, 1) * risks.p0[s]);
  return solve_system(risks, adjusted, rank_tol);
}

ConsistencyCheck consistency_check(const ThetaEstimate& theta, const MarginalY0& mu,
                                   double p1_marginal) {
  if (theta.theta1 == theta.theta2)
    fail(errc::degenerate_theta, "ls-core: theta1 = theta2, mu1 not identified from this relation");
  ConsistencyCheck c;
  c.p1_marginal = p1_marginal;
  c.implied_mu1 = (p1_marginal - theta.theta1) / (theta.theta2 - theta.theta1);
  c.direct_mu1 = mu.mu1;
  c.discrepancy = c.implied_mu1 - c.direct_mu1;
  return c;
}

}  // namespace jpo
