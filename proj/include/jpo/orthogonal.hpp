#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "jpo/dataset.hpp"
#include "jpo/nuisance.hpp"
#include "jpo/parallel.hpp"

namespace jpo {

enum class LinkKind { linear, logistic };

// Mean link and its first two derivatives in the linear predictor.
struct LinkValue {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

LinkValue link_eval(LinkKind kind, double eta);

// Per-row inputs to the conditional estimating equations: basis rows b(v),
// outcome regressions q = p^(0)(s,v), r = p^(1)(s,v), treatment propensity,
// and the observed (a, y).
struct OrthogonalData {
  Eigen::MatrixXd basis;  // n x p
  Eigen::VectorXd q, r, pi1;
  Eigen::ArrayXi a, y;

  int n() const { return static_cast<int>(q.size()); }
  int p() const { return static_cast<int>(basis.cols()); }
  int dim() const { return 2 * p(); }
};

OrthogonalData make_orthogonal_data(const ValidatedDataset& data, const NuisanceSet& nuisance,
                                    const std::string& vs_column);

// Least-squares initializer over the (s, v) grid of per-row nuisance
// estimates: minimizes sum_i {r_i - g(v_i; beta)(1 - q_i) - h(v_i; lambda) q_i}^2.
// Linear link solves in closed form; logistic runs Gauss-Newton.
Eigen::VectorXd ls_initializer(const OrthogonalData& data, LinkKind link, int max_iter = 50);

// Per-row score vector psi(O_i; xi, eta): the design-weighted treated-arm
// residual plus the control-arm orthogonality correction.
Eigen::VectorXd psi_score_row(const OrthogonalData& data, int row, LinkKind link,
                              const Eigen::VectorXd& xi);

// n x 2p matrix of per-row scores (slot-parallel; bit-identical across modes).
Eigen::MatrixXd psi_matrix(const OrthogonalData& data, LinkKind link, const Eigen::VectorXd& xi,
                           ExecMode exec = ExecMode::parallel);

Eigen::VectorXd psi_mean(const OrthogonalData& data, LinkKind link, const Eigen::VectorXd& xi,
                         ExecMode exec = ExecMode::parallel);

// Analytic Jacobian of the mean score in xi (2p x 2p): -P_n[Z Z^T] plus the
// residual-weighted curvature blocks and the correction-term derivatives.
Eigen::MatrixXd score_jacobian(const OrthogonalData& data, LinkKind link,
                               const Eigen::VectorXd& xi, ExecMode exec = ExecMode::parallel);

struct XiSolveOptions {
  double score_tol = 1e-10;
  int max_iter = 100;
  int max_halvings = 20;
  ExecMode exec = ExecMode::parallel;
};

struct XiEstimate {
  Eigen::VectorXd beta, lambda;
  Eigen::MatrixXd cov;  // 2p x 2p, empty until xi_variance
  int iterations = 0;
  bool converged = false;
  double score_norm = 0.0;  // ||P_n psi||_inf at the returned iterate

  Eigen::VectorXd vec() const {
    Eigen::VectorXd xi(beta.size() + lambda.size());
    xi << beta, lambda;
    return xi;
  }
};

// Damped Newton on P_n psi = 0 with step-halving on score-norm increases.
// The linear link lands in one step (score affine in xi).
XiEstimate solve_xi(const OrthogonalData& data, LinkKind link, const Eigen::VectorXd& xi0,
                    const XiSolveOptions& opts = {});

// Sandwich J^{-1} Var(psi) J^{-T} / n with J the analytic empirical Jacobian.
Eigen::MatrixXd xi_variance(const OrthogonalData& data, LinkKind link, const XiEstimate& xi,
                            ExecMode exec = ExecMode::parallel);

// Smallest eigenvalue of P_n[Z Z^T] and the share of rows with q within 0.01
// of {0,1} (weak identification of one design block).
struct IdentificationDiagnostic {
  double min_eigenvalue = 0.0;
  double extreme_q_share = 0.0;
  bool weak = false;
};
IdentificationDiagnostic identification_diagnostic(const OrthogonalData& data, LinkKind link,
                                                   const Eigen::VectorXd& xi);

struct StandardizedTheta {
  double theta1 = 0.0;
  double theta2 = 0.0;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  Eigen::MatrixXd if_rows;  // n x 2 influence contributions, for joint-cell propagation
};

// theta_1 = P_n g(v; beta), theta_2 = P_n h(v; lambda).
std::pair<double, double> standardize_theta(const Eigen::MatrixXd& basis, LinkKind link,
                                            const Eigen::VectorXd& beta,
                                            const Eigen::VectorXd& lambda);

// Standardization with influence functions combining the plug-in average and
// the xi estimation error.
StandardizedTheta standardize_theta_with_if(const OrthogonalData& data, LinkKind link,
                                            const XiEstimate& xi,
                                            ExecMode exec = ExecMode::parallel);

}  // namespace jpo
