#include "jpo/simulation.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "jpo/common.hpp"
#include "jpo/inference.hpp"
#include "jpo/rng.hpp"

namespace jpo {

namespace {

void validate_config(const DGPConfig& c) {
  if (c.n < 1) fail(errc::invalid_config, "sim-harness: n must be positive");
  if (c.n_strata < 2) fail(errc::invalid_config, "sim-harness: need >= 2 strata");
  if (!(c.vs_lo < c.vs_hi)) fail(errc::invalid_config, "sim-harness: bad truncation bounds");
  if (!(c.treat_prob > 0.0 && c.treat_prob < 1.0))
    fail(errc::invalid_config, "sim-harness: treatment probability must be in (0,1)");
  // Linear structural probabilities must stay in [0,1] across the support;
  // linearity makes the endpoints sufficient.
  for (double v : {c.vs_lo, c.vs_hi}) {
    for (double p : {c.beta0 + c.beta1 * v, c.lambda0 + c.lambda1 * v}) {
      if (p < 0.0 || p > 1.0)
        fail(errc::structural_probability_out_of_range,
             "sim-harness: structural probability " + std::to_string(p) + " at v = " +
                 std::to_string(v));
    }
  }
}

}  // namespace

SimData generate(const DGPConfig& config) {
  validate_config(config);
  const int n = config.n;
  Substream rng(config.seed, 0x44475000ULL);

  Dataset d;
  d.a.resize(n);
  d.y.resize(n);
  d.s = Eigen::ArrayXi::Zero(n);
  d.v.resize(n, 2);
  d.v_names = {"vs", "x_other"};
  Eigen::ArrayXi y0(n), y1(n);

  for (int i = 0; i < n; ++i) {
    const double v = rng.next_truncated_normal(config.vs_lo, config.vs_hi);
    const double x = config.x_other_slope * v + rng.next_normal();
    d.v(i, 0) = v;
    d.v(i, 1) = x;
    double pr_treat = config.treat_prob;
    if (config.confound_slope != 0.0)
      pr_treat = expit(logit(config.treat_prob) + config.confound_slope * v);
    d.a[i] = rng.next_bernoulli(pr_treat) ? 1 : 0;
  }

  // Stratum = within-sample quantile bin of the auxiliary covariate.
  StratumSpec spec;
  spec.mode = StratumSpec::Mode::quantile_bins;
  spec.column = "x_other";
  spec.bins = config.n_strata;
  auto built = construct_stratum(std::move(d), spec);
  Dataset data = std::move(built.data);

  for (int i = 0; i < n; ++i) {
    const double v = data.v(i, 0);
    const double p0 = expit(config.y0_intercept + config.y0_s_slope * (data.s[i] - 2) +
                            config.y0_v_slope * v);
    y0[i] = rng.next_bernoulli(p0) ? 1 : 0;
    const double p1 = y0[i] == 0 ? config.beta0 + config.beta1 * v
                                 : config.lambda0 + config.lambda1 * v;
    y1[i] = rng.next_bernoulli(p1) ? 1 : 0;
    data.y[i] = data.a[i] == 1 ? y1[i] : y0[i];  // consistency
  }

  SimData out;
  out.data = validate_dataset(std::move(data));
  out.y0_latent = std::move(y0);
  out.y1_latent = std::move(y1);
  return out;
}

OracleTargets oracle_targets(const DGPConfig& config) {
  validate_config(config);
  OracleTargets t;
  t.beta0 = config.beta0;
  t.beta1 = config.beta1;
  t.lambda0 = config.lambda0;
  t.lambda1 = config.lambda1;
  const double za = config.vs_lo, zb = config.vs_hi;
  const double mass = norm_cdf(zb) - norm_cdf(za);
  t.e_vs = (norm_pdf(za) - norm_pdf(zb)) / mass;
  t.theta1 = config.beta0 + config.beta1 * t.e_vs;
  t.theta2 = config.lambda0 + config.lambda1 * t.e_vs;
  return t;
}

OracleNuisance oracle_nuisance(const SimData& sim, const DGPConfig& config) {
  const Dataset& d = sim.data.data;
  const int n = d.n();
  OracleNuisance out;
  out.data.basis.resize(n, 2);
  out.data.basis.col(0).setOnes();
  out.data.basis.col(1) = d.v.col(0);
  out.data.q.resize(n);
  out.data.r.resize(n);
  out.data.pi1.resize(n);
  out.data.a = d.a;
  out.data.y = d.y;
  for (int i = 0; i < n; ++i) {
    const double v = d.v(i, 0);
    const double q = expit(config.y0_intercept + config.y0_s_slope * (d.s[i] - 2) +
                           config.y0_v_slope * v);
    const double g = config.beta0 + config.beta1 * v;
    const double h = config.lambda0 + config.lambda1 * v;
    out.data.q[i] = q;
    out.data.r[i] = g * (1.0 - q) + h * q;
    out.data.pi1[i] = config.confound_slope == 0.0
                          ? config.treat_prob
                          : expit(logit(config.treat_prob) + config.confound_slope * v);
  }
  out.xi_true.resize(4);
  out.xi_true << config.beta0, config.beta1, config.lambda0, config.lambda1;
  return out;
}

namespace {

ProbeResult probe_from_differences(const Eigen::MatrixXd& diff) {
  const int n = static_cast<int>(diff.rows());
  ProbeResult res;
  res.derivative = diff.colwise().mean();
  res.se.resize(diff.cols());
  for (int j = 0; j < diff.cols(); ++j) {
    const double m = res.derivative[j];
    double ss = 0.0;
    for (int i = 0; i < n; ++i) ss += (diff(i, j) - m) * (diff(i, j) - m);
    res.se[j] = std::sqrt(ss / (n - 1) / n);
  }
  res.max_ratio = 0.0;
  for (int j = 0; j < diff.cols(); ++j)
    if (res.se[j] > 0.0) res.max_ratio = std::max(res.max_ratio, std::abs(res.derivative[j]) / res.se[j]);
  return res;
}

}  // namespace

ProbeResult gateaux_probe_nuisance(const OrthogonalData& data, LinkKind link,
                                   const Eigen::VectorXd& xi, const Eigen::VectorXd* dq,
                                   const Eigen::VectorXd* dr, const Eigen::VectorXd* dpi,
                                   double t, double clip) {
  auto perturbed = [&](double sign) {
    OrthogonalData p = data;
    if (dq) p.q += sign * t * (*dq);
    if (dr) p.r += sign * t * (*dr);
    if (dpi) {
      p.pi1 += sign * t * (*dpi);
      for (int i = 0; i < p.n(); ++i) p.pi1[i] = std::clamp(p.pi1[i], clip, 1.0 - clip);
    }
    return p;
  };
  const OrthogonalData plus = perturbed(1.0), minus = perturbed(-1.0);
  const Eigen::MatrixXd psi_plus = psi_matrix(plus, link, xi);
  const Eigen::MatrixXd psi_minus = psi_matrix(minus, link, xi);
  return probe_from_differences((psi_plus - psi_minus) / (2.0 * t));
}

ProbeResult gateaux_probe_xi(const OrthogonalData& data, LinkKind link, const Eigen::VectorXd& xi,
                             const Eigen::VectorXd& direction, double t) {
  const Eigen::MatrixXd psi_plus = psi_matrix(data, link, xi + t * direction);
  const Eigen::MatrixXd psi_minus = psi_matrix(data, link, xi - t * direction);
  return probe_from_differences((psi_plus - psi_minus) / (2.0 * t));
}

std::vector<std::string> study_target_names() {
  return {"beta0", "beta1", "lambda0", "lambda1", "theta1", "theta2"};
}

Eigen::VectorXd study_estimator(const ValidatedDataset& data, const StudyConfig& cfg) {
  OutcomeModelSpec outcome;
  outcome.kind = OutcomeModelSpec::Kind::logistic_spline;
  outcome.vs_column = "vs";
  outcome.degree = cfg.spline_degree;
  outcome.knot_probs = cfg.knot_probs;
  outcome.interact_stratum = true;
  outcome.ridge = cfg.ridge;
  PropensitySpec prop;
  if (cfg.dgp.confound_slope == 0.0) {
    prop.kind = PropensitySpec::Kind::known;
    prop.value = cfg.dgp.treat_prob;
  } else {
    prop.kind = PropensitySpec::Kind::logistic;
  }
  NuisanceOptions nopts;
  nopts.folds = cfg.folds;
  nopts.clip = cfg.clip;
  nopts.seed = 0x4E5549ULL;  // fixed: the estimator must be a pure function of the data

  const NuisanceSet nuis = fit_nuisances(data, outcome, prop, nopts);
  OrthogonalData od = make_orthogonal_data(data, nuis, "vs");
  const Eigen::VectorXd xi0 = ls_initializer(od, cfg.link);
  XiSolveOptions sopts;
  sopts.exec = ExecMode::serial;  // replications already run concurrently
  const XiEstimate xi = solve_xi(od, cfg.link, xi0, sopts);
  if (!xi.converged)
    fail(errc::non_convergence, "sim-harness: estimating equation did not converge");
  const auto [t1, t2] = standardize_theta(od.basis, cfg.link, xi.beta, xi.lambda);
  Eigen::VectorXd out(6);
  out << xi.beta[0], xi.beta[1], xi.lambda[0], xi.lambda[1], t1, t2;
  return out;
}

MCReport run_study(const StudyConfig& cfg) {
  if (cfg.reps < 1) fail(errc::invalid_config, "sim-harness: reps must be >= 1");
  const OracleTargets truth = oracle_targets(cfg.dgp);
  const auto names = study_target_names();
  const int T = 6;

  const double nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd est = Eigen::MatrixXd::Constant(cfg.reps, T, nan);
  Eigen::MatrixXd cover_pct = Eigen::MatrixXd::Constant(cfg.reps, T, nan);
  Eigen::MatrixXd cover_norm = Eigen::MatrixXd::Constant(cfg.reps, T, nan);

  std::exception_ptr first_error;
  parallel_for(cfg.reps, cfg.exec, [&](std::int64_t r) {
    try {
      DGPConfig dgp = cfg.dgp;
      dgp.seed = CounterRng(cfg.seed, 0x52455053ULL).at(static_cast<std::uint64_t>(r));
      const SimData sim = generate(dgp);
      StudyConfig local = cfg;
      local.dgp = dgp;
      auto estimator = [&](const ValidatedDataset& d) { return study_estimator(d, local); };

      if (cfg.bootstrap_ci) {
        BootstrapPlan plan;
        plan.replicates = cfg.boot_reps;
        plan.seed = CounterRng(cfg.seed, 0x42535453ULL).at(static_cast<std::uint64_t>(r));
        plan.level = cfg.level;
        plan.exec = ExecMode::serial;  // replications own the parallelism
        const BootstrapResult boot = bootstrap(sim.data, estimator, names, plan);
        const double z = norm_quantile(1.0 - (1.0 - cfg.level) / 2.0);
        for (int t = 0; t < T; ++t) {
          est(r, t) = boot.point[t];
          const auto& ti = boot.report.targets[t];
          cover_pct(r, t) =
              (ti.lower <= truth.vec()[t] && truth.vec()[t] <= ti.upper) ? 1.0 : 0.0;
          const double lo = boot.point[t] - z * ti.se, hi = boot.point[t] + z * ti.se;
          cover_norm(r, t) = (lo <= truth.vec()[t] && truth.vec()[t] <= hi) ? 1.0 : 0.0;
        }
      } else {
        const Eigen::VectorXd point = estimator(sim.data);
        est.row(r) = point.transpose();
      }
    } catch (const Error&) {
      // counted as a failed replication below
    } catch (...) {
#pragma omp critical(jpo_study_error)
      if (!first_error) first_error = std::current_exception();
    }
  });
  if (first_error) std::rethrow_exception(first_error);

  std::vector<int> kept;
  for (int r = 0; r < cfg.reps; ++r)
    if (est.row(r).allFinite()) kept.push_back(r);

  MCReport report;
  report.replications = cfg.reps;
  report.failures = cfg.reps - static_cast<int>(kept.size());
  report.estimates.resize(kept.size(), T);
  for (std::size_t i = 0; i < kept.size(); ++i) report.estimates.row(i) = est.row(kept[i]);

  for (int t = 0; t < T; ++t) {
    MCParamReport p;
    p.name = names[t];
    p.truth = truth.vec()[t];
    const auto col = report.estimates.col(t);
    p.mean_estimate = col.mean();
    p.bias = p.mean_estimate - p.truth;
    double ss = 0.0;
    for (Eigen::Index i = 0; i < col.size(); ++i)
      ss += (col[i] - p.mean_estimate) * (col[i] - p.mean_estimate);
    p.empirical_se = col.size() > 1 ? std::sqrt(ss / (col.size() - 1)) : 0.0;
    if (cfg.bootstrap_ci) {
      double cp = 0.0, cn = 0.0;
      for (int r : kept) {
        cp += cover_pct(r, t);
        cn += cover_norm(r, t);
      }
      p.coverage_percentile = cp / kept.size();
      p.coverage_normal = cn / kept.size();
    }
    report.params.push_back(std::move(p));
  }
  return report;
}

std::string mc_table(const MCReport& report) {
  std::ostringstream os;
  os << "parameter      true     mean     bias   emp_se  cover_pct  cover_norm\n";
  char buf[160];
  for (const auto& p : report.params) {
    std::snprintf(buf, sizeof(buf), "%-10s %8.3f %8.3f %8.3f %8.3f %10.3f %11.3f\n",
                  p.name.c_str(), p.truth, p.mean_estimate, p.bias, p.empirical_se,
                  p.coverage_percentile, p.coverage_normal);
    os << buf;
  }
  os << "replications: " << report.replications << "  failures: " << report.failures << "\n";
  return os.str();
}

void write_mc_csv(const std::string& path, const MCReport& report) {
  std::ofstream out(path);
  if (!out) fail(errc::io_error, "sim-harness: cannot write '" + path + "'");
  out << "parameter,true,mean_estimate,bias,empirical_se,coverage_percentile,coverage_normal,"
         "replications,failures\n";
  out.precision(10);
  for (const auto& p : report.params)
    out << p.name << "," << p.truth << "," << p.mean_estimate << "," << p.bias << ","
        << p.empirical_se << "," << p.coverage_percentile << "," << p.coverage_normal << ","
        << report.replications << "," << report.failures << "\n";
}

void write_estimates_csv(const std::string& path, const MCReport& report) {
  std::ofstream out(path);
  if (!out) fail(errc::io_error, "sim-harness: cannot write '" + path + "'");
  const auto names = study_target_names();
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  out << "\n";
  out.precision(10);
  for (Eigen::Index i = 0; i < report.estimates.rows(); ++i) {
    for (Eigen::Index j = 0; j < report.estimates.cols(); ++j)
      out << (j ? "," : "") << report.estimates(i, j);
    out << "\n";
  }
}

}  // namespace jpo
