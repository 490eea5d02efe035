#include "jpo/common.hpp"

#include <algorithm>
#include <cmath>

namespace jpo {

const char* errc_name(errc c) {
  switch (c) {
    case errc::non_binary_value: return "NonBinaryValue";
    case errc::ragged_covariates: return "RaggedCovariates";
    case errc::empty_stratum_arm: return "EmptyStratumArm";
    case errc::degenerate_bins: return "DegenerateBins";
    case errc::unknown_column: return "UnknownColumn";
    case errc::knot_order: return "KnotOrderError";
    case errc::out_of_support: return "OutOfSupportEvaluation";
    case errc::fold_arm_empty: return "FoldArmEmpty";
    case errc::missing_nuisance: return "MissingNuisance";
    case errc::rank_deficient: return "RankDeficient";
    case errc::degenerate_theta: return "DegenerateTheta";
    case errc::insufficient_grid: return "InsufficientGrid";
    case errc::singular_normal_equations: return "SingularNormalEquations";
    case errc::non_convergence: return "NonConvergence";
    case errc::singular_jacobian: return "SingularJacobian";
    case errc::too_many_failed_replicates: return "TooManyFailedReplicates";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::structural_probability_out_of_range: return "StructuralProbabilityOutOfRange";
    case errc::invalid_config: return "InvalidConfig";
    case errc::parse_error: return "ParseError";
    case errc::io_error: return "IoError";
  }
  return "UnknownError";
}

double norm_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014327;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) fail(errc::invalid_config, "norm_quantile: p must be in (0,1)");
  // Acklam's approximation.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= phigh) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley refinement against the exact CDF.
  double e = norm_cdf(x) - p;
  double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

double quantile_type7_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) fail(errc::invalid_config, "quantile of empty vector");
  if (p <= 0.0) return sorted.front();
  if (p >= 1.0) return sorted.back();
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<double> quantiles_type7(std::vector<double> values, const std::vector<double>& probs) {
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  out.reserve(probs.size());
  for (double p : probs) out.push_back(quantile_type7_sorted(values, p));
  return out;
}

}  // namespace jpo
