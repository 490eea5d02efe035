#include <Eigen/Core>

#include "doctest.h"
#include "jpo/common.hpp"
#include "jpo/rng.hpp"
#include "jpo/splines.hpp"

using namespace jpo;

TEST_CASE("cubic basis with no interior knots: 4 columns summing to 1") {
  SplineBasis basis(0.0, 1.0, 3, {});
  CHECK(basis.n_basis() == 4);
  const auto row = basis.eval(0.5);
  CHECK(row.sum() == doctest::Approx(1.0).epsilon(1e-14));
  // Bernstein cubics at x = 0.5.
  CHECK(row[0] == doctest::Approx(0.125));
  CHECK(row[1] == doctest::Approx(0.375));
  CHECK(row[2] == doctest::Approx(0.375));
  CHECK(row[3] == doctest::Approx(0.125));
}

TEST_CASE("degree-1 hats with a knot at 0.5") {
  SplineBasis basis(0.0, 1.0, 1, {0.5});
  CHECK(basis.n_basis() == 3);
  const auto row = basis.eval(0.25);
  CHECK(row[0] == doctest::Approx(0.5));
  CHECK(row[1] == doctest::Approx(0.5));
  CHECK(row[2] == doctest::Approx(0.0));
}

TEST_CASE("unsorted or out-of-range knots are rejected") {
  CHECK_THROWS_AS(SplineBasis(0.0, 1.0, 3, {0.7, 0.3}), Error);
  CHECK_THROWS_AS(SplineBasis(0.0, 1.0, 3, {1.5}), Error);
  CHECK_THROWS_AS(SplineBasis(1.0, 0.0, 3, {}), Error);
  try {
    SplineBasis(0.0, 1.0, 3, {0.7, 0.3});
  } catch (const Error& e) {
    CHECK(e.code() == errc::knot_order);
  }
}

TEST_CASE("partition of unity at 100 random interior points") {
  Substream rng(99, 0);
  SplineBasis basis(-2.0, 3.0, 3, {-1.0, 0.0, 0.5, 2.0});
  for (int i = 0; i < 100; ++i) {
    const double x = rng.next_uniform(-2.0, 3.0);
    CHECK(std::abs(basis.eval(x).sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("out-of-support evaluation clamps and flags") {
  SplineBasis basis(0.0, 1.0, 3, {0.5});
  bool clamped = false;
  const auto row = basis.eval(1.7, &clamped);
  CHECK(clamped);
  CHECK(row.isApprox(basis.eval(1.0)));
  clamped = false;
  basis.eval(0.5, &clamped);
  CHECK_FALSE(clamped);
}

TEST_CASE("quantile knot rule drops duplicates and stays inside the range") {
  Eigen::VectorXd x(8);
  x << 0, 0, 0, 0, 1, 1, 1, 2;
  const auto basis = SplineBasis::from_quantiles(x, 3, {0.25, 0.5, 0.75});
  for (std::size_t i = 1; i < basis.interior().size(); ++i)
    CHECK(basis.interior()[i] > basis.interior()[i - 1]);
  for (double k : basis.interior()) {
    CHECK(k > basis.lo());
    CHECK(k < basis.hi());
  }
  Eigen::VectorXd constant = Eigen::VectorXd::Ones(5);
  CHECK_THROWS_AS(SplineBasis::from_quantiles(constant, 3, {0.5}), Error);
}
