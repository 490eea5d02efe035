#pragma once

#include <Eigen/Core>
#include <optional>

#include "jpo/dataset.hpp"
#include "jpo/nuisance.hpp"

namespace jpo {

// Stratum-specific counterfactual risk estimates with the per-observation
// pseudo-outcomes used by the variance machinery.
struct StratumRiskTable {
  enum class Method { proportions, aipw };
  Method method = Method::proportions;
  int n_strata = 0;
  Eigen::VectorXd p0, p1;   // per-stratum risk estimates
  Eigen::VectorXi n_s;      // stratum counts
  Eigen::VectorXd pi_s;     // stratum shares n_s / n
  Eigen::ArrayXi s_row;     // stratum label per row (1-based)
  Eigen::VectorXd U0, U1;   // per-row pseudo-outcomes (empty until attached)

  bool has_pseudo() const { return U0.size() > 0; }
  int n() const { return static_cast<int>(s_row.size()); }
};

StratumRiskTable risks_by_proportion(const ValidatedDataset& data);

// Populates U0/U1 on a proportions table using mu_a(V,S) := p_s^(a) and
// either a known treatment probability or the within-stratum arm share
// (default; makes the stratum means of U_a reproduce the proportions
// exactly).
void attach_proportion_pseudo_outcomes(StratumRiskTable& table, const ValidatedDataset& data,
                                       std::optional<double> known_pi1 = std::nullopt);

StratumRiskTable risks_by_aipw(const ValidatedDataset& data, const NuisanceSet& nuisance);

struct MarginalY0 {
  double mu0 = 0.0;  // P(Y(0)=0)
  double mu1 = 0.0;  // P(Y(0)=1)
};

// mu1 = stratum-share weighted average of p_s^(0).
MarginalY0 estimate_mu(const StratumRiskTable& table);

}  // namespace jpo
