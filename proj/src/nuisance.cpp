#include "jpo/nuisance.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "jpo/common.hpp"
#include "jpo/rng.hpp"

namespace jpo {

namespace {

// Dense design: [stratum one-hots x basis] when interacted, else
// [one-hots, basis minus its first column]; extra columns appended linearly.
struct DesignLayout {
  const SplineBasis* basis;
  bool interact;
  int n_strata;
  std::vector<int> extra_cols;

  int cols() const {
    const int m = basis->n_basis();
    const int core = interact ? n_strata * m : n_strata + (m - 1);
    return core + static_cast<int>(extra_cols.size());
  }

  void fill_row(const Dataset& d, int row, int vs_col, Eigen::RowVectorXd& out) const {
    out.setZero();
    const Eigen::RowVectorXd b = basis->eval(d.v(row, vs_col));
    const int m = basis->n_basis();
    const int s = d.s[row] - 1;
    if (interact) {
      out.segment(s * m, m) = b;
    } else {
      out[s] = 1.0;
      out.segment(n_strata, m - 1) = b.tail(m - 1);
    }
    const int base = interact ? n_strata * m : n_strata + (m - 1);
    for (std::size_t j = 0; j < extra_cols.size(); ++j)
      out[base + static_cast<int>(j)] = d.v(row, extra_cols[j]);
  }

  Eigen::MatrixXd matrix(const Dataset& d, const std::vector<int>& rows, int vs_col) const {
    Eigen::MatrixXd X(rows.size(), cols());
    Eigen::RowVectorXd r(cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      fill_row(d, rows[i], vs_col, r);
      X.row(static_cast<int>(i)) = r;
    }
    return X;
  }
};

Eigen::VectorXd gather(const Eigen::ArrayXi& x, const std::vector<int>& rows) {
  Eigen::VectorXd out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<int>(i)] = x[rows[i]];
  return out;
}

FittedOutcomeModel fit_outcome_on(const Dataset& d, const std::vector<int>& rows,
                                  const Eigen::VectorXd& response, const OutcomeModelSpec& spec,
                                  int n_strata, const FittedOutcomeModel* warm) {
  FittedOutcomeModel fit;
  fit.spec = spec;
  fit.n_strata = n_strata;
  if (spec.kind == OutcomeModelSpec::Kind::stratum_proportions) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n_strata);
    Eigen::VectorXd cnt = Eigen::VectorXd::Zero(n_strata);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      sum[d.s[rows[i]] - 1] += response[static_cast<int>(i)];
      cnt[d.s[rows[i]] - 1] += 1.0;
    }
    for (int s = 0; s < n_strata; ++s)
      if (cnt[s] == 0.0)
        fail(errc::fold_arm_empty,
             "nuisance-regression: stratum " + std::to_string(s + 1) + " empty in training set");
    fit.stratum_means = sum.cwiseQuotient(cnt);
    return fit;
  }

  fit.vs_col = d.col(spec.vs_column);
  for (const auto& c : spec.extra_linear_columns) fit.extra_cols.push_back(d.col(c));
  Eigen::VectorXd vs(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) vs[static_cast<int>(i)] = d.v(rows[i], fit.vs_col);
  fit.basis = SplineBasis::from_quantiles(vs, spec.degree, spec.knot_probs);

  fit.blocked = spec.interact_stratum && fit.extra_cols.empty();
  LogisticFitOptions lopts;
  lopts.ridge = spec.ridge;
  if (fit.blocked) {
    // Full interaction separates the likelihood by stratum; fit each block
    // independently (identical estimates, much smaller systems).
    fit.stratum_models.resize(n_strata);
    for (int s = 1; s <= n_strata; ++s) {
      std::vector<int> block;
      std::vector<int> block_local;
      for (std::size_t i = 0; i < rows.size(); ++i)
        if (d.s[rows[i]] == s) {
          block.push_back(rows[i]);
          block_local.push_back(static_cast<int>(i));
        }
      if (block.empty())
        fail(errc::fold_arm_empty,
             "nuisance-regression: stratum " + std::to_string(s) + " empty in training set");
      Eigen::MatrixXd X(block.size(), fit.basis->n_basis());
      Eigen::VectorXd yb(block.size());
      for (std::size_t i = 0; i < block.size(); ++i) {
        X.row(static_cast<int>(i)) = fit.basis->eval(d.v(block[i], fit.vs_col));
        yb[static_cast<int>(i)] = response[block_local[i]];
      }
      if (warm && warm->blocked && static_cast<int>(warm->stratum_models.size()) == n_strata &&
          warm->stratum_models[s - 1].coef.size() == X.cols())
        lopts.warm_start = &warm->stratum_models[s - 1].coef;
      else
        lopts.warm_start = nullptr;
      fit.stratum_models[s - 1] = fit_logistic(X, yb, lopts);
    }
  } else {
    DesignLayout layout{&*fit.basis, spec.interact_stratum, n_strata, fit.extra_cols};
    Eigen::MatrixXd X = layout.matrix(d, rows, fit.vs_col);
    if (warm && !warm->blocked && warm->joint_model.coef.size() == X.cols())
      lopts.warm_start = &warm->joint_model.coef;
    fit.joint_model = fit_logistic(X, response, lopts);
  }
  return fit;
}

}  // namespace

double FittedOutcomeModel::predict(const Dataset& d, int row) const {
  if (spec.kind == OutcomeModelSpec::Kind::stratum_proportions)
    return stratum_means[d.s[row] - 1];
  if (blocked) {
    const auto& m = stratum_models[d.s[row] - 1];
    return expit(basis->eval(d.v(row, vs_col)).dot(m.coef));
  }
  DesignLayout layout{&*basis, spec.interact_stratum, n_strata, extra_cols};
  Eigen::RowVectorXd x(layout.cols());
  layout.fill_row(d, row, vs_col, x);
  return expit(x.dot(joint_model.coef));
}

double FittedPropensity::predict(const Dataset& d, int row) const {
  switch (kind) {
    case PropensitySpec::Kind::known: return value;
    case PropensitySpec::Kind::stratum_arm_share: return stratum_share[d.s[row] - 1];
    case PropensitySpec::Kind::logistic: return model.predict(d, row);
  }
  return value;
}

double NuisanceSet::predict_outcome(int arm, const Dataset& d, int row) const {
  const auto& models = arm == 0 ? fold_models0 : fold_models1;
  double sum = 0.0;
  for (const auto& m : models) sum += m.predict(d, row);
  return sum / static_cast<double>(models.size());
}

std::vector<int> make_folds(const ValidatedDataset& data, int K, std::uint64_t seed) {
  const int n = data.n();
  std::vector<int> fold(n, 0);
  if (K <= 1) return fold;
  // Stratified by (s, a): shuffle each cell, deal round-robin.
  const int n_cells = data.n_strata() * 2;
  std::vector<std::vector<int>> cells(n_cells);
  for (int i = 0; i < n; ++i) cells[(data.data.s[i] - 1) * 2 + data.data.a[i]].push_back(i);
  for (int c = 0; c < n_cells; ++c) {
    auto& rows = cells[c];
    Substream rng(seed, 0x464f4c44ULL + static_cast<std::uint64_t>(c));
    for (std::size_t i = rows.size(); i > 1; --i)
      std::swap(rows[i - 1], rows[rng.next_below(i)]);
    for (std::size_t i = 0; i < rows.size(); ++i)
      fold[rows[i]] = static_cast<int>(i % static_cast<std::size_t>(K));
  }
  // Every fold must contain both arms.
  std::vector<std::array<int, 2>> arm_counts(K, {0, 0});
  for (int i = 0; i < n; ++i) arm_counts[fold[i]][data.data.a[i]]++;
  for (int f = 0; f < K; ++f)
    if (arm_counts[f][0] == 0 || arm_counts[f][1] == 0)
      fail(errc::fold_arm_empty, "nuisance-regression: fold " + std::to_string(f) +
                                     " is missing a treatment arm");
  return fold;
}

NuisanceSet fit_nuisances(const ValidatedDataset& data, const OutcomeModelSpec& outcome,
                          const PropensitySpec& propensity, const NuisanceOptions& opts) {
  if (opts.folds < 1) fail(errc::invalid_config, "nuisance-regression: folds must be >= 1");
  const int n = data.n();
  const int K = opts.folds;
  const Dataset& d = data.data;

  NuisanceSet out;
  out.n_folds = K;
  out.clip = opts.clip;
  out.fold = make_folds(data, K, opts.seed);
  out.p0.resize(n);
  out.p1.resize(n);
  out.pi1.resize(n);

  const int n_model_sets = K == 1 ? 1 : K;
  for (int f = 0; f < n_model_sets; ++f) {
    std::vector<int> train, eval;
    for (int i = 0; i < n; ++i) {
      if (K == 1 || out.fold[i] != f)
        train.push_back(i);
      if (K == 1 || out.fold[i] == f)
        eval.push_back(i);
    }
    std::vector<int> train0, train1;
    for (int i : train) (d.a[i] == 0 ? train0 : train1).push_back(i);
    if (train0.empty() || train1.empty())
      fail(errc::fold_arm_empty, "nuisance-regression: training set missing an arm");

    const FittedOutcomeModel* warm0 = nullptr;
    const FittedOutcomeModel* warm1 = nullptr;
    if (opts.warm_start && static_cast<int>(opts.warm_start->fold_models0.size()) > f) {
      warm0 = &opts.warm_start->fold_models0[f];
      warm1 = &opts.warm_start->fold_models1[f];
    }
    auto m0 = fit_outcome_on(d, train0, gather(d.y, train0), outcome, data.n_strata(), warm0);
    auto m1 = fit_outcome_on(d, train1, gather(d.y, train1), outcome, data.n_strata(), warm1);

    FittedPropensity prop;
    prop.kind = propensity.kind;
    prop.value = propensity.value;
    switch (propensity.kind) {
      case PropensitySpec::Kind::known:
        break;
      case PropensitySpec::Kind::stratum_arm_share: {
        Eigen::VectorXd treated = Eigen::VectorXd::Zero(data.n_strata());
        Eigen::VectorXd total = Eigen::VectorXd::Zero(data.n_strata());
        for (int i : train) {
          treated[d.s[i] - 1] += d.a[i];
          total[d.s[i] - 1] += 1.0;
        }
        for (int s = 0; s < data.n_strata(); ++s)
          if (total[s] == 0.0)
            fail(errc::fold_arm_empty, "nuisance-regression: stratum " + std::to_string(s + 1) +
                                           " empty in propensity training set");
        prop.stratum_share = treated.cwiseQuotient(total);
        break;
      }
      case PropensitySpec::Kind::logistic: {
        OutcomeModelSpec pspec = outcome;
        pspec.kind = OutcomeModelSpec::Kind::logistic_spline;
        prop.model = fit_outcome_on(d, train, gather(d.a, train), pspec, data.n_strata(), nullptr);
        break;
      }
    }

    for (int i : eval) {
      out.p0[i] = m0.predict(d, i);
      out.p1[i] = m1.predict(d, i);
      out.pi1[i] = std::clamp(prop.predict(d, i), opts.clip, 1.0 - opts.clip);
    }
    auto note_flags = [&](const FittedOutcomeModel& m) {
      if (m.spec.kind != OutcomeModelSpec::Kind::logistic_spline) return;
      if (m.blocked) {
        for (const auto& lm : m.stratum_models) {
          out.any_separation = out.any_separation || lm.separation;
          out.all_converged = out.all_converged && (lm.converged || lm.separation);
        }
      } else {
        out.any_separation = out.any_separation || m.joint_model.separation;
        out.all_converged = out.all_converged && (m.joint_model.converged || m.joint_model.separation);
      }
    };
    note_flags(m0);
    note_flags(m1);
    if (propensity.kind == PropensitySpec::Kind::logistic) note_flags(prop.model);
    out.fold_models0.push_back(std::move(m0));
    out.fold_models1.push_back(std::move(m1));
    out.fold_propensity.push_back(std::move(prop));
  }
  if (!out.p0.allFinite() || !out.p1.allFinite() || !out.pi1.allFinite())
    fail(errc::missing_nuisance, "nuisance-regression: non-finite nuisance prediction");
  return out;
}

PrognosticScore prognostic_score(const ValidatedDataset& data,
                                 const std::vector<std::string>& predictors, double ridge) {
  const Dataset& d = data.data;
  std::vector<int> cols;
  for (const auto& name : predictors) cols.push_back(d.col(name));
  std::vector<int> control;
  for (int i = 0; i < d.n(); ++i)
    if (d.a[i] == 0) control.push_back(i);
  if (control.empty()) fail(errc::empty_stratum_arm, "nuisance-regression: control arm empty");

  auto design_for = [&](const std::vector<int>& rows) {
    Eigen::MatrixXd X(rows.size(), cols.size() + 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      X(static_cast<int>(i), 0) = 1.0;
      for (std::size_t j = 0; j < cols.size(); ++j)
        X(static_cast<int>(i), static_cast<int>(j) + 1) = d.v(rows[i], cols[j]);
    }
    return X;
  };
  LogisticFitOptions lopts;
  lopts.ridge = ridge;
  PrognosticScore out;
  out.predictors = predictors;
  out.model = fit_logistic(design_for(control), gather(d.y, control), lopts);

  std::vector<int> all(d.n());
  std::iota(all.begin(), all.end(), 0);
  out.score = out.model.predict(design_for(all));
  return out;
}

}  // namespace jpo
