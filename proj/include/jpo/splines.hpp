#pragma once

#include <Eigen/Core>
#include <vector>

namespace jpo {

// Clamped B-spline basis on [lo, hi]. Columns form a partition of unity
// inside the boundary; evaluation outside is clamped to the boundary and
// flagged.
class SplineBasis {
 public:
  // interior knots must be strictly increasing and lie in (lo, hi).
  SplineBasis(double lo, double hi, int degree, const std::vector<double>& interior_knots);

  // Knot rule used by the nuisance layer: interior knots at the given
  // quantiles of x (duplicates and boundary collisions dropped).
  static SplineBasis from_quantiles(const Eigen::VectorXd& x, int degree,
                                    const std::vector<double>& probs);

  int n_basis() const { return n_basis_; }
  int degree() const { return degree_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<double>& interior() const { return interior_; }

  // Row of all basis values at x. Sets *clamped when x fell outside [lo, hi].
  Eigen::RowVectorXd eval(double x, bool* clamped = nullptr) const;

  // n x n_basis design matrix; any_clamped ORs the per-point flags.
  Eigen::MatrixXd design(const Eigen::VectorXd& x, bool* any_clamped = nullptr) const;

 private:
  int degree_;
  double lo_, hi_;
  std::vector<double> interior_;
  Eigen::VectorXd knots_;  // clamped vector, size n_basis_ + degree_ + 1
  int n_basis_;
};

}  // namespace jpo
