#include "jpo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "jpo/common.hpp"
#include "jpo/risks.hpp"

namespace jpo {

const char* estimator_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::ls: return "ls";
    case EstimatorKind::ls_adjusted: return "ls-adjusted";
    case EstimatorKind::orthogonal_linear: return "orthogonal-linear";
    case EstimatorKind::orthogonal_logistic: return "orthogonal-logistic";
  }
  return "ls";
}

EstimatorKind parse_estimator(const std::string& name) {
  if (name == "ls") return EstimatorKind::ls;
  if (name == "ls-adjusted") return EstimatorKind::ls_adjusted;
  if (name == "orthogonal-linear") return EstimatorKind::orthogonal_linear;
  if (name == "orthogonal-logistic") return EstimatorKind::orthogonal_logistic;
  fail(errc::invalid_config, "cli: unknown estimator '" + name + "'");
}

void validate_config(const RunConfig& config) {
  const bool needs_vs = config.estimator != EstimatorKind::ls;
  const bool has_vs = config.vs_column.has_value() || !config.prognostic_predictors.empty();
  if (needs_vs && !has_vs)
    fail(errc::invalid_config, std::string("cli: estimator '") + estimator_name(config.estimator) +
                                   "' requires a V_S source (--vs-column or --vs-prognostic)");
  if (config.vs_column && !config.prognostic_predictors.empty())
    fail(errc::invalid_config, "cli: give either --vs-column or --vs-prognostic, not both");
  if (config.folds < 1) fail(errc::invalid_config, "cli: folds must be >= 1");
  if (config.boot_reps < 2 && config.do_bootstrap)
    fail(errc::invalid_config, "cli: bootstrap needs >= 2 replicates");
  if (!(config.level > 0.0 && config.level < 1.0))
    fail(errc::invalid_config, "cli: confidence level must be in (0,1)");
  if (!config.stratum_spec && !config.bindings.stratum && !config.input_path.empty())
    fail(errc::invalid_config, "cli: need --stratum, --stratum-from, or --stratum-cross");
  if (config.known_propensity &&
      !(*config.known_propensity > 0.0 && *config.known_propensity < 1.0))
    fail(errc::invalid_config, "cli: known propensity must be in (0,1)");
}

namespace {

std::string effective_vs(const RunConfig& cfg) {
  if (!cfg.prognostic_predictors.empty()) return "prognostic_score";
  return cfg.vs_column.value_or("");
}

// Re-runs the sample-dependent construction steps (stratum binning,
// prognostic score) so bootstrap replicates mirror the full workflow.
ValidatedDataset reconstruct(const ValidatedDataset& input, const RunConfig& cfg) {
  const bool redo_stratum = cfg.stratum_spec.has_value();
  const bool redo_score = !cfg.prognostic_predictors.empty();
  if (!redo_stratum && !redo_score) return input;
  Dataset d = input.data;
  if (redo_stratum) {
    auto built = construct_stratum(std::move(d), *cfg.stratum_spec);
    d = std::move(built.data);
  }
  ValidatedDataset out = validate_dataset(std::move(d));
  if (redo_score) {
    // Score must be fit on the current (possibly resampled) control arm.
    Dataset base = out.data;
    if (base.has_col("prognostic_score")) {
      // drop stale column by rebuilding without it
      Dataset trimmed;
      trimmed.a = base.a;
      trimmed.y = base.y;
      trimmed.s = base.s;
      trimmed.cluster = base.cluster;
      trimmed.cluster_labels = base.cluster_labels;
      trimmed.has_clusters = base.has_clusters;
      trimmed.n_strata = base.n_strata;
      std::vector<int> keep;
      for (int j = 0; j < static_cast<int>(base.v_names.size()); ++j)
        if (base.v_names[j] != "prognostic_score") keep.push_back(j);
      trimmed.v.resize(base.n(), keep.size());
      for (std::size_t j = 0; j < keep.size(); ++j) {
        trimmed.v.col(j) = base.v.col(keep[j]);
        trimmed.v_names.push_back(base.v_names[keep[j]]);
      }
      base = std::move(trimmed);
    }
    ValidatedDataset scored = validate_dataset(std::move(base));
    const PrognosticScore score =
        prognostic_score(scored, cfg.prognostic_predictors, cfg.ridge);
    scored.data.add_column("prognostic_score", score.score);
    return scored;
  }
  return out;
}

struct EstimationCore {
  StratumRiskTable table;
  ThetaEstimate theta;          // headline estimate (LS or standardized orthogonal)
  MarginalY0 mu;
  Eigen::Matrix4d omega = Eigen::Matrix4d::Zero();  // IF covariance of (t1, t2, mu0, mu1)
  bool has_omega = false;
  JointPODistribution joint;
  double p1_marginal = 0.0;     // mean of U1
  std::optional<XiEstimate> xi;
  std::optional<IdentificationDiagnostic> ident;
  bool nuisance_separation = false;
  bool nuisance_converged = true;
};

NuisanceSet fit_pipeline_nuisances(const ValidatedDataset& data, const RunConfig& cfg) {
  OutcomeModelSpec outcome;
  outcome.kind = OutcomeModelSpec::Kind::logistic_spline;
  outcome.vs_column = effective_vs(cfg);
  outcome.degree = cfg.spline_degree;
  outcome.knot_probs = cfg.knot_probs;
  outcome.interact_stratum = cfg.interact_stratum;
  outcome.ridge = cfg.ridge;
  PropensitySpec prop;
  if (cfg.known_propensity) {
    prop.kind = PropensitySpec::Kind::known;
    prop.value = *cfg.known_propensity;
  } else {
    prop.kind = PropensitySpec::Kind::logistic;
  }
  NuisanceOptions nopts;
  nopts.folds = cfg.folds;
  nopts.clip = cfg.clip;
  nopts.seed = 0x4E5549ULL;  // fixed: estimator must be a pure function of the data
  return fit_nuisances(data, outcome, prop, nopts);
}

EstimationCore estimate_core(const ValidatedDataset& data, const RunConfig& cfg,
                             bool need_variance, bool strict) {
  EstimationCore core;
  switch (cfg.estimator) {
    case EstimatorKind::ls: {
      core.table = risks_by_proportion(data);
      attach_proportion_pseudo_outcomes(core.table, data, cfg.known_propensity);
      core.theta = solve_theta(core.table, cfg.rank_tol);
      core.mu = estimate_mu(core.table);
      break;
    }
    case EstimatorKind::ls_adjusted: {
      const NuisanceSet nuis = fit_pipeline_nuisances(data, cfg);
      core.nuisance_separation = nuis.any_separation;
      core.nuisance_converged = nuis.all_converged;
      core.table = risks_by_aipw(data, nuis);
      core.theta = solve_theta(core.table, cfg.rank_tol);
      core.mu = estimate_mu(core.table);
      break;
    }
    case EstimatorKind::orthogonal_linear:
    case EstimatorKind::orthogonal_logistic: {
      const LinkKind link = cfg.estimator == EstimatorKind::orthogonal_linear
                                ? LinkKind::linear
                                : LinkKind::logistic;
      const NuisanceSet nuis = fit_pipeline_nuisances(data, cfg);
      core.nuisance_separation = nuis.any_separation;
      core.nuisance_converged = nuis.all_converged;
      core.table = risks_by_aipw(data, nuis);
      OrthogonalData od = make_orthogonal_data(data, nuis, effective_vs(cfg));
      const Eigen::VectorXd xi0 = ls_initializer(od, link);
      XiSolveOptions sopts;
      sopts.exec = cfg.exec;
      XiEstimate xi = solve_xi(od, link, xi0, sopts);
      if (strict && !xi.converged)
        fail(errc::non_convergence, "orthogonal-core: estimating equation did not converge");
      core.ident = identification_diagnostic(od, link, xi.vec());
      if (need_variance) {
        xi.cov = xi_variance(od, link, xi, cfg.exec);
        const StandardizedTheta st = standardize_theta_with_if(od, link, xi, cfg.exec);
        core.theta.theta1 = st.theta1;
        core.theta.theta2 = st.theta2;
        core.theta.cov = st.cov;
        core.theta.has_cov = true;
        // Joint IF covariance: standardized theta rows plus the mu0/mu1 rows
        // from the control-arm pseudo-outcome.
        const int n = data.n();
        const double mu1 = core.table.pi_s.dot(core.table.p0);
        Eigen::MatrixXd inf(n, 4);
        for (int i = 0; i < n; ++i) {
          inf(i, 0) = st.if_rows(i, 0);
          inf(i, 1) = st.if_rows(i, 1);
          inf(i, 3) = core.table.U0[i] - mu1;
          inf(i, 2) = -inf(i, 3);
        }
        const Eigen::RowVector4d mean = inf.colwise().mean();
        const Eigen::MatrixXd centered = inf.rowwise() - mean;
        core.omega = (centered.transpose() * centered) / n / n;
        core.has_omega = true;
      } else {
        const auto [t1, t2] = standardize_theta(od.basis, link, xi.beta, xi.lambda);
        core.theta.theta1 = t1;
        core.theta.theta2 = t2;
      }
      core.theta.boundary = std::min(core.theta.theta1, core.theta.theta2) < 0.0 ||
                            std::max(core.theta.theta1, core.theta.theta2) > 1.0;
      core.mu = estimate_mu(core.table);
      core.xi = std::move(xi);
      break;
    }
  }
  if (cfg.estimator == EstimatorKind::ls || cfg.estimator == EstimatorKind::ls_adjusted) {
    if (need_variance) {
      core.theta.cov = theta_variance(core.table, core.theta);
      core.theta.has_cov = true;
      core.omega = influence_covariance(core.table, core.theta);
      core.has_omega = true;
    }
  }
  core.p1_marginal = core.table.U1.mean();
  core.joint = joint_distribution(core.theta, core.mu, core.has_omega ? &core.omega : nullptr);
  return core;
}

}  // namespace

std::vector<std::string> pipeline_target_names() {
  return {"theta1", "theta2", "p00", "p01", "p10", "p11", "mu1"};
}

Eigen::VectorXd pipeline_targets(const ValidatedDataset& data, const RunConfig& config) {
  const ValidatedDataset prepared = reconstruct(data, config);
  const EstimationCore core = estimate_core(prepared, config, /*need_variance=*/false,
                                            /*strict=*/true);
  Eigen::VectorXd out(7);
  out << core.theta.theta1, core.theta.theta2, core.joint.cell[0][0], core.joint.cell[0][1],
      core.joint.cell[1][0], core.joint.cell[1][1], core.mu.mu1;
  return out;
}

RunReport run_pipeline(const ValidatedDataset& data, const RunConfig& config) {
  validate_config(config);
  const ValidatedDataset prepared = reconstruct(data, config);
  EstimationCore core = estimate_core(prepared, config, /*need_variance=*/true,
                                      /*strict=*/false);

  RunReport rep;
  rep.estimator = estimator_name(config.estimator);
  rep.seed = config.seed;
  rep.input_path = config.input_path;
  rep.n = prepared.n();
  rep.n_strata = prepared.n_strata();
  rep.rank = check_rank(core.table, config.rank_tol);
  rep.theta1 = core.theta.theta1;
  rep.theta2 = core.theta.theta2;
  rep.theta_boundary = core.theta.boundary;
  rep.mu0 = core.mu.mu0;
  rep.mu1 = core.mu.mu1;
  rep.cells = core.joint.vec();
  rep.cell_boundary = core.joint.boundary;

  {
    std::ostringstream echo;
    echo << "estimator=" << rep.estimator;
    rep.config_echo.push_back(echo.str());
  }
  auto add_echo = [&](const std::string& k, const std::string& v) {
    rep.config_echo.push_back(k + "=" + v);
  };
  add_echo("input", config.input_path);
  add_echo("seed", std::to_string(config.seed));
  add_echo("folds", std::to_string(config.folds));
  add_echo("ridge", std::to_string(config.ridge));
  add_echo("clip", std::to_string(config.clip));
  add_echo("spline_degree", std::to_string(config.spline_degree));
  add_echo("interact", config.interact_stratum ? "1" : "0");
  add_echo("boot_reps", std::to_string(config.boot_reps));
  add_echo("bootstrap", config.do_bootstrap ? "1" : "0");
  add_echo("cluster", config.cluster_bootstrap ? "1" : "0");
  add_echo("level", std::to_string(config.level));
  if (config.vs_column) add_echo("vs_column", *config.vs_column);
  if (!config.prognostic_predictors.empty()) {
    std::string joined;
    for (const auto& p : config.prognostic_predictors)
      joined += (joined.empty() ? "" : ",") + p;
    add_echo("vs_prognostic", joined);
  }
  if (config.known_propensity) add_echo("known_propensity", std::to_string(*config.known_propensity));

  // Sandwich-normal intervals for theta, cells, mu1.
  {
    const double z = norm_quantile(1.0 - (1.0 - config.level) / 2.0);
    auto push = [&](const std::string& name, double point, double var) {
      TargetInterval ti;
      ti.name = name;
      ti.point = point;
      ti.se = var > 0.0 ? std::sqrt(var) : 0.0;
      ti.lower = point - z * ti.se;
      ti.upper = point + z * ti.se;
      ti.level = config.level;
      ti.method = "sandwich-normal";
      ti.boundary = point < 0.0 || point > 1.0;
      rep.sandwich_intervals.push_back(std::move(ti));
    };
    push("theta1", rep.theta1, core.theta.cov(0, 0));
    push("theta2", rep.theta2, core.theta.cov(1, 1));
    const char* cell_names[4] = {"p00", "p01", "p10", "p11"};
    for (int j = 0; j < 4; ++j)
      push(cell_names[j], rep.cells[j], core.joint.has_cov ? core.joint.cov(j, j) : 0.0);
    push("mu1", rep.mu1, core.has_omega ? core.omega(3, 3) : 0.0);
  }

  if (core.xi) {
    XiReport xr;
    xr.beta = core.xi->beta;
    xr.lambda = core.xi->lambda;
    const int dim = static_cast<int>(core.xi->cov.rows());
    xr.se.resize(dim);
    for (int j = 0; j < dim; ++j) xr.se[j] = std::sqrt(std::max(0.0, core.xi->cov(j, j)));
    xr.iterations = core.xi->iterations;
    xr.converged = core.xi->converged;
    xr.score_norm = core.xi->score_norm;
    if (core.ident) {
      xr.min_design_eigenvalue = core.ident->min_eigenvalue;
      xr.extreme_q_share = core.ident->extreme_q_share;
    }
    rep.xi = std::move(xr);
    if (!core.xi->converged)
      rep.warnings.push_back("estimating equation did not converge; best iterate reported");
    if (core.ident && core.ident->weak)
      rep.warnings.push_back("weak identification: >50% of rows have p0 within 0.01 of {0,1}");
  }
  if (core.nuisance_separation)
    rep.warnings.push_back("separation detected in an unpenalized nuisance fit");
  if (!core.nuisance_converged)
    rep.warnings.push_back("a nuisance fit hit its iteration cap");
  if (rep.theta_boundary)
    rep.warnings.push_back("theta estimate outside [0,1]; reported raw (boundary flag set)");
  if (rep.rank.deficient)
    rep.warnings.push_back("stratum risk matrix near rank-deficient");

  // Consistency check: implied mu1 from the treated marginal risk.
  try {
    rep.consistency = consistency_check(core.theta, core.mu, core.p1_marginal);
  } catch (const Error& e) {
    if (e.code() != errc::degenerate_theta) throw;
    rep.consistency_note = "theta1 == theta2: mu1 not identified from the total-probability relation";
  }

  // Sensitivity sweep on the pipeline's risk table.
  for (const auto& gamma : config.gamma_grid) {
    SensitivityRow row;
    row.gamma = gamma;
    const ThetaEstimate t = solve_theta_sensitivity(core.table, {gamma}, config.rank_tol);
    row.theta1 = t.theta1;
    row.theta2 = t.theta2;
    row.boundary = t.boundary;
    rep.sensitivity.push_back(std::move(row));
  }

  if (config.pseudo_outcome_path && core.table.has_pseudo()) {
    std::ofstream out(*config.pseudo_outcome_path);
    if (!out) fail(errc::io_error, "cli: cannot write pseudo-outcome export");
    out << "row,s,a,y,U0,U1\n";
    out.precision(17);
    for (int i = 0; i < prepared.n(); ++i)
      out << i << "," << prepared.data.s[i] << "," << prepared.data.a[i] << ","
          << prepared.data.y[i] << "," << core.table.U0[i] << "," << core.table.U1[i] << "\n";
  }

  if (config.do_bootstrap) {
    BootstrapPlan plan;
    plan.replicates = config.boot_reps;
    plan.mode = config.cluster_bootstrap ? BootstrapPlan::Mode::cluster
                                         : BootstrapPlan::Mode::iid_rows;
    plan.seed = config.seed;
    plan.level = config.level;
    plan.exec = config.exec;
    RunConfig boot_cfg = config;
    boot_cfg.do_bootstrap = false;
    const auto estimator = [&boot_cfg](const ValidatedDataset& d) {
      return pipeline_targets(d, boot_cfg);
    };
    const BootstrapResult boot =
        bootstrap(data, estimator, pipeline_target_names(), plan);
    rep.bootstrap_intervals = boot.report.targets;
    for (auto& ti : rep.bootstrap_intervals) ti.boundary = ti.point < 0.0 || ti.point > 1.0;
    rep.bootstrap_replicates = boot.report.replicates;
    rep.bootstrap_failures = boot.report.failed;
    if (boot.report.failed > 0)
      rep.warnings.push_back(std::to_string(boot.report.failed) +
                             " bootstrap replicates failed and were dropped");
  }

  if (config.clamp_report) {
    rep.clamped_for_reporting = true;
    rep.theta1 = std::clamp(rep.theta1, 0.0, 1.0);
    rep.theta2 = std::clamp(rep.theta2, 0.0, 1.0);
    for (int j = 0; j < 4; ++j) rep.cells[j] = std::clamp(rep.cells[j], 0.0, 1.0);
    rep.warnings.push_back("headline estimates clamped into [0,1] for reporting");
  }
  return rep;
}

RunReport run(const RunConfig& config) {
  validate_config(config);
  Dataset d = read_csv(config.input_path, config.bindings);
  ValidatedDataset data = [&] {
    if (config.stratum_spec) {
      auto built = construct_stratum(std::move(d), *config.stratum_spec);
      return validate_dataset(std::move(built.data));
    }
    if (!config.bindings.stratum)
      fail(errc::invalid_config, "cli: no stratum column bound and no construction spec");
    return validate_dataset(std::move(d));
  }();
  return run_pipeline(data, config);
}

}  // namespace jpo
