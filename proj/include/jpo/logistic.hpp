#pragma once

#include <Eigen/Core>
#include <vector>

namespace jpo {

struct LogisticFitOptions {
  double ridge = 1e-6;
  double grad_tol = 1e-8;
  int max_iter = 100;
  const Eigen::VectorXd* warm_start = nullptr;
};

struct LogisticModel {
  Eigen::VectorXd coef;
  bool converged = false;
  bool separation = false;  // unpenalized fit diverging (max |coef| > 30 with ridge = 0)
  int iterations = 0;
  std::vector<double> ll_trace;  // penalized log-likelihood after each accepted step

  Eigen::VectorXd predict(const Eigen::MatrixXd& design) const;
};

// Ridge-penalized logistic regression by IRLS with step-halving; the
// penalized log-likelihood is non-decreasing across accepted steps.
LogisticModel fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                           const LogisticFitOptions& opts = {});

}  // namespace jpo
