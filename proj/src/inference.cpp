#include "jpo/inference.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "jpo/common.hpp"
#include "jpo/rng.hpp"

namespace jpo {

namespace {

bool droppable(const Error& e) {
  switch (e.code()) {
    case errc::rank_deficient:
    case errc::non_convergence:
    case errc::singular_normal_equations:
    case errc::singular_jacobian:
    case errc::degenerate_bins:
    case errc::empty_stratum_arm:
    case errc::fold_arm_empty:
      return true;
    default:
      return false;
  }
}

}  // namespace

std::vector<int> bootstrap_indices(const ValidatedDataset& data, const BootstrapPlan& plan,
                                   int r) {
  Substream rng(plan.seed, 0x424F4F54ULL + static_cast<std::uint64_t>(r));
  std::vector<int> rows;
  if (plan.mode == BootstrapPlan::Mode::iid_rows) {
    const int n = data.n();
    rows.resize(n);
    for (int i = 0; i < n; ++i) rows[i] = static_cast<int>(rng.next_below(n));
    return rows;
  }
  // Cluster mode: draw as many clusters as the original count, keep each
  // drawn cluster's rows together.
  const auto& cluster = data.data.cluster;
  int n_clusters = 0;
  for (int c : cluster) n_clusters = std::max(n_clusters, c + 1);
  std::vector<std::vector<int>> members(n_clusters);
  for (int i = 0; i < data.n(); ++i) members[cluster[i]].push_back(i);
  rows.reserve(data.n());
  for (int k = 0; k < n_clusters; ++k) {
    const int c = static_cast<int>(rng.next_below(n_clusters));
    rows.insert(rows.end(), members[c].begin(), members[c].end());
  }
  return rows;
}

BootstrapResult bootstrap(const ValidatedDataset& data, const EstimatorFn& estimator,
                          const std::vector<std::string>& target_names,
                          const BootstrapPlan& plan) {
  if (plan.replicates < 2) fail(errc::invalid_config, "inference: need at least 2 replicates");
  if (plan.mode == BootstrapPlan::Mode::cluster && !data.data.has_clusters &&
      data.data.cluster.empty())
    fail(errc::invalid_config, "inference: cluster bootstrap requires cluster ids");

  BootstrapResult res;
  res.point = estimator(data);
  const int T = static_cast<int>(res.point.size());
  if (static_cast<int>(target_names.size()) != T)
    fail(errc::dimension_mismatch, "inference: target name count mismatch");

  const int B = plan.replicates;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  res.replicate_values = Eigen::MatrixXd::Constant(B, T, nan);

  std::exception_ptr first_error;
  parallel_for(B, plan.exec, [&](std::int64_t r) {
    try {
      const auto rows = bootstrap_indices(data, plan, static_cast<int>(r));
      ValidatedDataset boot = validate_dataset(data.data.subset(rows));
      Eigen::VectorXd est = estimator(boot);
      if (est.size() == T && est.allFinite()) res.replicate_values.row(r) = est.transpose();
    } catch (const Error& e) {
      if (!droppable(e)) {
#pragma omp critical(jpo_bootstrap_error)
        if (!first_error) first_error = std::current_exception();
      }
    } catch (...) {
#pragma omp critical(jpo_bootstrap_error)
      if (!first_error) first_error = std::current_exception();
    }
  });
  if (first_error) std::rethrow_exception(first_error);

  std::vector<int> kept;
  for (int r = 0; r < B; ++r)
    if (res.replicate_values.row(r).allFinite()) kept.push_back(r);
  res.report.replicates = B;
  res.report.failed = B - static_cast<int>(kept.size());
  if (res.report.failed > plan.max_failure_rate * B)
    fail(errc::too_many_failed_replicates,
         "inference: " + std::to_string(res.report.failed) + " of " + std::to_string(B) +
             " bootstrap replicates failed");

  const double alpha = 1.0 - plan.level;
  const double z = norm_quantile(1.0 - alpha / 2.0);
  for (int t = 0; t < T; ++t) {
    std::vector<double> vals;
    vals.reserve(kept.size());
    for (int r : kept) vals.push_back(res.replicate_values(r, t));
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= vals.size();
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    const double se = std::sqrt(ss / (vals.size() - 1));

    TargetInterval ti;
    ti.name = target_names[t];
    ti.point = res.point[t];
    ti.se = se;
    ti.level = plan.level;
    if (plan.ci == BootstrapPlan::CiType::percentile) {
      std::sort(vals.begin(), vals.end());
      ti.lower = quantile_type7_sorted(vals, alpha / 2.0);
      ti.upper = quantile_type7_sorted(vals, 1.0 - alpha / 2.0);
      ti.method = "bootstrap-percentile";
    } else {
      ti.lower = ti.point - z * se;
      ti.upper = ti.point + z * se;
      ti.method = "bootstrap-normal";
    }
    res.report.targets.push_back(std::move(ti));
  }
  return res;
}

IntervalReport delta_method(const Eigen::VectorXd& point, const Eigen::MatrixXd& omega,
                            const Eigen::MatrixXd& grads, const std::vector<std::string>& names,
                            double level) {
  const int T = static_cast<int>(point.size());
  if (omega.rows() != omega.cols() || grads.rows() != omega.rows() || grads.cols() != T ||
      static_cast<int>(names.size()) != T)
    fail(errc::dimension_mismatch, "inference: delta method dimension mismatch");
  if (!omega.isApprox(omega.transpose(), 1e-8))
    fail(errc::dimension_mismatch, "inference: covariance must be symmetric");
  const double z = norm_quantile(1.0 - (1.0 - level) / 2.0);
  IntervalReport rep;
  for (int t = 0; t < T; ++t) {
    const double var = grads.col(t).dot(omega * grads.col(t));
    TargetInterval ti;
    ti.name = names[t];
    ti.point = point[t];
    ti.se = var > 0.0 ? std::sqrt(var) : 0.0;
    ti.lower = ti.point - z * ti.se;
    ti.upper = ti.point + z * ti.se;
    ti.level = level;
    ti.method = "sandwich-normal";
    rep.targets.push_back(std::move(ti));
  }
  rep.replicates = 0;
  return rep;
}

}  // namespace jpo
