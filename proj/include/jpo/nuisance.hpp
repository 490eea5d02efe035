#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jpo/dataset.hpp"
#include "jpo/logistic.hpp"
#include "jpo/splines.hpp"

namespace jpo {

struct OutcomeModelSpec {
  enum class Kind {
    logistic_spline,      // logistic on stratum x spline(vs) design
    stratum_proportions,  // saturated in s: per-cell sample means
  };
  Kind kind = Kind::logistic_spline;
  std::string vs_column;
  int degree = 3;
  std::vector<double> knot_probs = {0.25, 0.5, 0.75};
  bool interact_stratum = true;  // per-stratum spline curves (full interaction)
  double ridge = 1e-6;
  std::vector<std::string> extra_linear_columns;
};

struct PropensitySpec {
  enum class Kind {
    known,              // constant, not estimated
    stratum_arm_share,  // P(A=1|S=s) by sample share
    logistic,           // logistic on the outcome model's design
  };
  Kind kind = Kind::known;
  double value = 0.5;
};

struct NuisanceOptions {
  int folds = 5;  // 1 = no-split mode
  double clip = 0.01;
  std::uint64_t seed = 0;
  const class NuisanceSet* warm_start = nullptr;  // reuse coefficients as IRLS starts
};

// One fitted outcome regression (single training set, single arm).
struct FittedOutcomeModel {
  OutcomeModelSpec spec;
  bool blocked = false;                       // per-stratum fits (full-interaction fast path)
  std::optional<SplineBasis> basis;
  std::vector<LogisticModel> stratum_models;  // blocked path, index s-1
  LogisticModel joint_model;                  // dense path
  std::vector<int> extra_cols;
  int vs_col = -1;
  int n_strata = 0;
  Eigen::VectorXd stratum_means;              // stratum_proportions path

  double predict(const Dataset& d, int row) const;
};

struct FittedPropensity {
  PropensitySpec::Kind kind = PropensitySpec::Kind::known;
  double value = 0.5;
  Eigen::VectorXd stratum_share;  // stratum_arm_share path
  FittedOutcomeModel model;       // logistic path

  double predict(const Dataset& d, int row) const;
};

// Cross-fitted nuisance bundle: per-row predictions come from models fit
// without the row's fold.
struct NuisanceSet {
  Eigen::VectorXd p0, p1;   // outcome regressions per arm, evaluated per row
  Eigen::VectorXd pi1;      // P(A=1|S,V), clipped into [clip, 1-clip]
  std::vector<int> fold;    // 0-based fold index per row
  int n_folds = 1;
  double clip = 0.01;
  bool any_separation = false;
  bool all_converged = true;
  std::vector<FittedOutcomeModel> fold_models0, fold_models1;  // index = fold
  std::vector<FittedPropensity> fold_propensity;

  // Fold-averaged prediction for audit / new data.
  double predict_outcome(int arm, const Dataset& d, int row) const;
};

std::vector<int> make_folds(const ValidatedDataset& data, int K, std::uint64_t seed);

NuisanceSet fit_nuisances(const ValidatedDataset& data, const OutcomeModelSpec& outcome,
                          const PropensitySpec& propensity, const NuisanceOptions& opts = {});

struct PrognosticScore {
  LogisticModel model;           // fit exclusively on control-arm rows
  std::vector<std::string> predictors;
  Eigen::VectorXd score;         // per-row score in (0,1), both arms
};

PrognosticScore prognostic_score(const ValidatedDataset& data,
                                 const std::vector<std::string>& predictors,
                                 double ridge = 1e-6);

}  // namespace jpo
