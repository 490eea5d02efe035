#include "jpo/splines.hpp"

#include <algorithm>
#include <cmath>

#include "jpo/common.hpp"

namespace jpo {

SplineBasis::SplineBasis(double lo, double hi, int degree,
                         const std::vector<double>& interior_knots)
    : degree_(degree), lo_(lo), hi_(hi), interior_(interior_knots) {
  if (!(lo < hi)) fail(errc::knot_order, "spline boundary requires lo < hi");
  if (degree < 0) fail(errc::knot_order, "spline degree must be >= 0");
  for (std::size_t i = 0; i < interior_.size(); ++i) {
    if (!(interior_[i] > lo && interior_[i] < hi))
      fail(errc::knot_order, "interior knot outside (lo, hi)");
    if (i > 0 && !(interior_[i] > interior_[i - 1]))
      fail(errc::knot_order, "interior knots must be strictly increasing");
  }
  const int m = static_cast<int>(interior_.size());
  n_basis_ = m + degree_ + 1;
  knots_.resize(n_basis_ + degree_ + 1);
  for (int i = 0; i <= degree_; ++i) knots_[i] = lo;
  for (int i = 0; i < m; ++i) knots_[degree_ + 1 + i] = interior_[i];
  for (int i = 0; i <= degree_; ++i) knots_[degree_ + 1 + m + i] = hi;
}

SplineBasis SplineBasis::from_quantiles(const Eigen::VectorXd& x, int degree,
                                        const std::vector<double>& probs) {
  if (x.size() == 0) fail(errc::knot_order, "empty regressor for spline knot rule");
  std::vector<double> values(x.data(), x.data() + x.size());
  std::sort(values.begin(), values.end());
  const double lo = values.front(), hi = values.back();
  if (!(lo < hi)) fail(errc::degenerate_bins, "constant regressor, spline basis undefined");
  std::vector<double> interior;
  for (double p : probs) {
    const double k = quantile_type7_sorted(values, p);
    if (k > lo && k < hi && (interior.empty() || k > interior.back())) interior.push_back(k);
  }
  return SplineBasis(lo, hi, degree, interior);
}

Eigen::RowVectorXd SplineBasis::eval(double x, bool* clamped) const {
  if (x < lo_ || x > hi_) {
    if (clamped) *clamped = true;
    x = std::clamp(x, lo_, hi_);
  }
  const int k = degree_ + 1;  // order
  const int n_knots = static_cast<int>(knots_.size());
  // Knot span index i with knots_[i] <= x < knots_[i+1], clamped at the top.
  int i;
  if (x >= knots_[n_knots - k]) {
    i = n_knots - k - 1;
  } else {
    i = static_cast<int>(std::upper_bound(knots_.data() + k - 1, knots_.data() + n_knots - k, x) -
                         knots_.data()) -
        1;
  }
  // Cox-de Boor: the k nonzero basis values on this span.
  std::vector<double> vals(k, 0.0), left(k), right(k);
  vals[0] = 1.0;
  for (int j = 1; j < k; ++j) {
    left[j] = x - knots_[i + 1 - j];
    right[j] = knots_[i + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom != 0.0 ? vals[r] / denom : 0.0;
      vals[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    vals[j] = saved;
  }
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n_basis_);
  const int first = i - degree_;
  for (int j = 0; j < k; ++j) {
    const int col = first + j;
    if (col >= 0 && col < n_basis_) row[col] = vals[j];
  }
  return row;
}

Eigen::MatrixXd SplineBasis::design(const Eigen::VectorXd& x, bool* any_clamped) const {
  Eigen::MatrixXd out(x.size(), n_basis_);
  bool clamped = false;
  for (Eigen::Index r = 0; r < x.size(); ++r) {
    bool c = false;
    out.row(r) = eval(x[r], &c);
    clamped = clamped || c;
  }
  if (any_clamped) *any_clamped = clamped;
  return out;
}

}  // namespace jpo
