#include "jpo/risks.hpp"

#include "jpo/common.hpp"

namespace jpo {

StratumRiskTable risks_by_proportion(const ValidatedDataset& data) {
  const Dataset& d = data.data;
  const int K = data.n_strata();
  StratumRiskTable t;
  t.method = StratumRiskTable::Method::proportions;
  t.n_strata = K;
  t.s_row = d.s;
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, 2);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(K, 2);
  for (int i = 0; i < d.n(); ++i) {
    sums(d.s[i] - 1, d.a[i]) += d.y[i];
    counts(d.s[i] - 1, d.a[i]) += 1.0;
  }
  for (int s = 0; s < K; ++s)
    for (int arm = 0; arm < 2; ++arm)
      if (counts(s, arm) == 0.0)
        fail(errc::empty_stratum_arm, "risk-estimation: empty (stratum, arm) cell");
  t.p0 = sums.col(0).cwiseQuotient(counts.col(0));
  t.p1 = sums.col(1).cwiseQuotient(counts.col(1));
  t.n_s.resize(K);
  t.pi_s.resize(K);
  for (int s = 0; s < K; ++s) {
    t.n_s[s] = static_cast<int>(counts(s, 0) + counts(s, 1));
    t.pi_s[s] = static_cast<double>(t.n_s[s]) / d.n();
  }
  return t;
}

void attach_proportion_pseudo_outcomes(StratumRiskTable& table, const ValidatedDataset& data,
                                       std::optional<double> known_pi1) {
  const Dataset& d = data.data;
  if (table.method != StratumRiskTable::Method::proportions)
    fail(errc::invalid_config, "risk-estimation: pseudo-outcome reduction is for proportions tables");
  if (table.n() != d.n()) fail(errc::dimension_mismatch, "risk-estimation: table/dataset mismatch");
  const int K = table.n_strata;
  Eigen::VectorXd share(K);
  if (known_pi1) {
    share.setConstant(*known_pi1);
  } else {
    Eigen::VectorXd treated = Eigen::VectorXd::Zero(K), total = Eigen::VectorXd::Zero(K);
    for (int i = 0; i < d.n(); ++i) {
      treated[d.s[i] - 1] += d.a[i];
      total[d.s[i] - 1] += 1.0;
    }
    share = treated.cwiseQuotient(total);
  }
  table.U0.resize(d.n());
  table.U1.resize(d.n());
  for (int i = 0; i < d.n(); ++i) {
    const int s = d.s[i] - 1;
    const double pi1 = share[s];
    const double m0 = table.p0[s], m1 = table.p1[s];
    table.U0[i] = m0 + (d.a[i] == 0 ? (d.y[i] - m0) / (1.0 - pi1) : 0.0);
    table.U1[i] = m1 + (d.a[i] == 1 ? (d.y[i] - m1) / pi1 : 0.0);
  }
}

StratumRiskTable risks_by_aipw(const ValidatedDataset& data, const NuisanceSet& nuisance) {
  const Dataset& d = data.data;
  const int n = d.n();
  if (nuisance.p0.size() != n || nuisance.p1.size() != n || nuisance.pi1.size() != n)
    fail(errc::missing_nuisance, "risk-estimation: nuisance predictions missing for some rows");
  const int K = data.n_strata();
  StratumRiskTable t;
  t.method = StratumRiskTable::Method::aipw;
  t.n_strata = K;
  t.s_row = d.s;
  t.U0.resize(n);
  t.U1.resize(n);
  for (int i = 0; i < n; ++i) {
    const double pi1 = nuisance.pi1[i];
    const double m0 = nuisance.p0[i], m1 = nuisance.p1[i];
    t.U0[i] = m0 + (d.a[i] == 0 ? (d.y[i] - m0) / (1.0 - pi1) : 0.0);
    t.U1[i] = m1 + (d.a[i] == 1 ? (d.y[i] - m1) / pi1 : 0.0);
  }
  // Stratum means of the pseudo-outcomes, in fixed row order.
  Eigen::VectorXd sum0 = Eigen::VectorXd::Zero(K), sum1 = Eigen::VectorXd::Zero(K);
  Eigen::VectorXd cnt = Eigen::VectorXd::Zero(K);
  for (int i = 0; i < n; ++i) {
    const int s = d.s[i] - 1;
    sum0[s] += t.U0[i];
    sum1[s] += t.U1[i];
    cnt[s] += 1.0;
  }
  t.p0 = sum0.cwiseQuotient(cnt);
  t.p1 = sum1.cwiseQuotient(cnt);
  t.n_s.resize(K);
  t.pi_s.resize(K);
  for (int s = 0; s < K; ++s) {
    t.n_s[s] = static_cast<int>(cnt[s]);
    t.pi_s[s] = cnt[s] / n;
  }
  return t;
}

MarginalY0 estimate_mu(const StratumRiskTable& table) {
  if (table.n_strata == 0) fail(errc::invalid_config, "risk-estimation: empty risk table");
  MarginalY0 m;
  m.mu1 = table.pi_s.dot(table.p0);
  m.mu0 = 1.0 - m.mu1;
  return m;
}

}  // namespace jpo
