#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace jpo {

enum class errc {
  non_binary_value,
  ragged_covariates,
  empty_stratum_arm,
  degenerate_bins,
  unknown_column,
  knot_order,
  out_of_support,
  fold_arm_empty,
  missing_nuisance,
  rank_deficient,
  degenerate_theta,
  insufficient_grid,
  singular_normal_equations,
  non_convergence,
  singular_jacobian,
  too_many_failed_replicates,
  dimension_mismatch,
  structural_probability_out_of_range,
  invalid_config,
  parse_error,
  io_error,
};

const char* errc_name(errc c);

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw Error(code, msg); }

inline double expit(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// log(1 + exp(x)) without overflow
inline double log1pexp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double norm_pdf(double x);
double norm_cdf(double x);
// Inverse standard normal CDF (Acklam's rational approximation, refined by one
// Halley step; good to ~1e-15 over (0,1)).
double norm_quantile(double p);

// Type-7 empirical quantile on an already sorted vector.
double quantile_type7_sorted(const std::vector<double>& sorted, double p);
// Convenience: copies, sorts, evaluates each requested probability.
std::vector<double> quantiles_type7(std::vector<double> values, const std::vector<double>& probs);

}  // namespace jpo
