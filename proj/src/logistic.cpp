#include "jpo/logistic.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

#include "jpo/common.hpp"

namespace jpo {

namespace {

double penalized_loglik(const Eigen::VectorXd& eta, const Eigen::VectorXd& y, double ridge,
                        const Eigen::VectorXd& beta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - log1pexp(eta[i]);
  return ll - 0.5 * ridge * beta.squaredNorm();
}

}  // namespace

Eigen::VectorXd LogisticModel::predict(const Eigen::MatrixXd& design) const {
  Eigen::VectorXd eta = design * coef;
  for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = expit(eta[i]);
  return eta;
}

LogisticModel fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                           const LogisticFitOptions& opts) {
  const Eigen::Index n = design.rows(), p = design.cols();
  if (n == 0 || p == 0) fail(errc::invalid_config, "nuisance-regression: empty logistic design");
  if (y.size() != n) fail(errc::dimension_mismatch, "nuisance-regression: y/design row mismatch");
  for (Eigen::Index i = 0; i < n; ++i)
    if (y[i] != 0.0 && y[i] != 1.0)
      fail(errc::non_binary_value, "nuisance-regression: logistic outcome must be 0/1");

  LogisticModel model;
  model.coef = opts.warm_start ? *opts.warm_start : Eigen::VectorXd::Zero(p);
  if (opts.warm_start && opts.warm_start->size() != p)
    fail(errc::dimension_mismatch, "nuisance-regression: warm start dimension");

  Eigen::VectorXd eta = design * model.coef;
  double ll = penalized_loglik(eta, y, opts.ridge, model.coef);
  model.ll_trace.push_back(ll);

  Eigen::VectorXd mu(n), w(n);
  for (int it = 1; it <= opts.max_iter; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = expit(eta[i]);
      w[i] = mu[i] * (1.0 - mu[i]);
    }
    Eigen::VectorXd grad = design.transpose() * (y - mu) - opts.ridge * model.coef;
    if (grad.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
      model.converged = true;
      // An essentially perfect unpenalized fit has no interior optimum:
      // the gradient only vanishes along a diverging coefficient path.
      if (opts.ridge == 0.0 && ll > -1e-6) model.separation = true;
      break;
    }
    Eigen::MatrixXd hess = design.transpose() * w.asDiagonal() * design;
    hess.diagonal().array() += opts.ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    Eigen::VectorXd step = ldlt.solve(grad);
    if (!step.allFinite()) {
      if (opts.ridge == 0.0) fail(errc::singular_normal_equations,
                                  "nuisance-regression: singular IRLS system (ridge = 0)");
      break;
    }
    // Step-halving ascent; keeps the penalized log-likelihood monotone.
    double t = 1.0;
    Eigen::VectorXd cand;
    Eigen::VectorXd cand_eta;
    double cand_ll = -std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int h = 0; h < 30; ++h) {
      cand = model.coef + t * step;
      cand_eta = design * cand;
      cand_ll = penalized_loglik(cand_eta, y, opts.ridge, cand);
      if (cand_ll >= ll - 1e-12) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    model.iterations = it;
    if (!accepted) break;  // numerically stuck; report non-convergence
    model.coef = cand;
    eta = cand_eta;
    ll = cand_ll;
    model.ll_trace.push_back(ll);
    if (opts.ridge == 0.0 && model.coef.cwiseAbs().maxCoeff() > 30.0) {
      model.separation = true;
      break;
    }
  }
  return model;
}

}  // namespace jpo
