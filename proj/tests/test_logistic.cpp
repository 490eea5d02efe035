#include <Eigen/Core>
#include <cmath>

#include "doctest.h"
#include "jpo/common.hpp"
#include "jpo/logistic.hpp"
#include "jpo/rng.hpp"

using namespace jpo;

TEST_CASE("intercept-only fit recovers the closed-form MLE") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(8, 1);
  Eigen::VectorXd y(8);
  y << 1, 1, 0, 0, 0, 0, 0, 0;  // mean 0.25
  LogisticFitOptions opts;
  opts.ridge = 0.0;
  const auto model = fit_logistic(X, y, opts);
  CHECK(model.converged);
  CHECK(model.coef[0] == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-8));
}

TEST_CASE("all-equal outcomes with ridge 0 flag separation") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(12, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(12);
  LogisticFitOptions opts;
  opts.ridge = 0.0;
  const auto model = fit_logistic(X, y, opts);
  CHECK(model.separation);
}

TEST_CASE("balanced outcome on symmetric design gives a zero intercept") {
  Eigen::MatrixXd X(4, 2);
  X << 1, -1, 1, -0.5, 1, 0.5, 1, 1;
  Eigen::VectorXd y(4);
  y << 0, 1, 0, 1;  // symmetric: flipping x sign swaps labels
  LogisticFitOptions opts;
  opts.ridge = 0.0;
  const auto model = fit_logistic(X, y, opts);
  CHECK(model.coef[0] == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("penalized log-likelihood is non-decreasing across iterations") {
  Substream rng(5, 0);
  const int n = 400;
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = rng.next_normal();
    X(i, 2) = rng.next_normal();
    const double p = expit(-0.3 + 1.2 * X(i, 1) - 0.7 * X(i, 2));
    y[i] = rng.next_bernoulli(p) ? 1.0 : 0.0;
  }
  const auto model = fit_logistic(X, y);
  CHECK(model.converged);
  for (std::size_t i = 1; i < model.ll_trace.size(); ++i)
    CHECK(model.ll_trace[i] >= model.ll_trace[i - 1] - 1e-12);
  // Gradient at the solution is tiny.
  Eigen::VectorXd mu = model.predict(X);
  Eigen::VectorXd grad = X.transpose() * (y - mu) - 1e-6 * model.coef;
  CHECK(grad.lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("warm start converges to the same solution") {
  Substream rng(6, 0);
  const int n = 200;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = rng.next_normal();
    y[i] = rng.next_bernoulli(expit(0.4 * X(i, 1))) ? 1.0 : 0.0;
  }
  const auto cold = fit_logistic(X, y);
  LogisticFitOptions opts;
  opts.warm_start = &cold.coef;
  const auto warm = fit_logistic(X, y, opts);
  CHECK(warm.converged);
  CHECK((warm.coef - cold.coef).lpNorm<Eigen::Infinity>() <= 1e-7);
  CHECK(warm.iterations <= cold.iterations);
}
