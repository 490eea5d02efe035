#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "jpo/dataset.hpp"
#include "jpo/parallel.hpp"

namespace jpo {

struct BootstrapPlan {
  int replicates = 500;
  enum class Mode { iid_rows, cluster } mode = Mode::iid_rows;
  std::uint64_t seed = 0;
  enum class CiType { percentile, normal } ci = CiType::percentile;
  double level = 0.95;
  double max_failure_rate = 0.10;
  ExecMode exec = ExecMode::parallel;
};

struct TargetInterval {
  std::string name;
  double point = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  std::string method;  // "bootstrap-percentile", "bootstrap-normal", "sandwich-normal"
  bool boundary = false;
};

struct IntervalReport {
  std::vector<TargetInterval> targets;
  int replicates = 0;
  int failed = 0;
};

using EstimatorFn = std::function<Eigen::VectorXd(const ValidatedDataset&)>;

// Resample indices of replicate r under the plan (rows, or whole clusters
// concatenated in draw order). Exposed for the determinism tests.
std::vector<int> bootstrap_indices(const ValidatedDataset& data, const BootstrapPlan& plan, int r);

struct BootstrapResult {
  IntervalReport report;
  Eigen::MatrixXd replicate_values;  // replicates x targets, NaN rows = failed
  Eigen::VectorXd point;             // full-sample estimate
};

// Replicates run concurrently on independent substreams; per-replicate
// results land in fixed slots so aggregation is order-independent.
// Replicates failing with RankDeficient / NonConvergence / singular-system
// errors are dropped and counted.
BootstrapResult bootstrap(const ValidatedDataset& data, const EstimatorFn& estimator,
                          const std::vector<std::string>& target_names, const BootstrapPlan& plan);

// Normal intervals from an influence covariance: variance of target j is
// grad_j^T Omega grad_j (grads = one column per target).
IntervalReport delta_method(const Eigen::VectorXd& point, const Eigen::MatrixXd& omega,
                            const Eigen::MatrixXd& grads, const std::vector<std::string>& names,
                            double level = 0.95);

}  // namespace jpo
