#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "jpo/common.hpp"
#include "jpo/pipeline.hpp"
#include "jpo/rng.hpp"
#include "jpo/simulation.hpp"
#include "json.hpp"

namespace {

using namespace jpo;

constexpr int kExitValidation = 2;
constexpr int kExitEstimation = 3;

int exit_code_for(errc c) {
  switch (c) {
    case errc::rank_deficient:
    case errc::non_convergence:
    case errc::singular_normal_equations:
    case errc::singular_jacobian:
    case errc::insufficient_grid:
    case errc::degenerate_theta:
    case errc::too_many_failed_replicates:
    case errc::missing_nuisance:
      return kExitEstimation;
    default:
      return kExitValidation;
  }
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// "quantile:col" or "quantile:col:k"
StratumSpec parse_stratum_from(const std::string& text) {
  StratumSpec spec;
  spec.mode = StratumSpec::Mode::quantile_bins;
  const auto first = text.find(':');
  if (first == std::string::npos || text.substr(0, first) != "quantile")
    fail(errc::invalid_config, "cli: --stratum-from expects 'quantile:<column>[:<bins>]'");
  const auto rest = text.substr(first + 1);
  const auto second = rest.find(':');
  if (second == std::string::npos) {
    spec.column = rest;
    spec.bins = 4;
  } else {
    spec.column = rest.substr(0, second);
    spec.bins = std::stoi(rest.substr(second + 1));
  }
  if (spec.column.empty()) fail(errc::invalid_config, "cli: --stratum-from missing column name");
  return spec;
}

// Sweep points: header gamma_s<k>_y<j> in stratum-major order, one row per point.
std::vector<Eigen::MatrixXd> load_gamma_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cli: cannot open gamma grid '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail(errc::parse_error, "cli: empty gamma grid");
  const auto header = split_list(line);
  if (header.empty() || header.size() % 2 != 0)
    fail(errc::parse_error, "cli: gamma grid needs 2 columns per stratum");
  const int n_strata = static_cast<int>(header.size()) / 2;
  std::vector<Eigen::MatrixXd> grid;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_list(line);
    if (fields.size() != header.size())
      fail(errc::parse_error, "cli: gamma grid field count mismatch on line " +
                                  std::to_string(line_no));
    Eigen::MatrixXd g(n_strata, 2);
    for (int s = 0; s < n_strata; ++s)
      for (int yy = 0; yy < 2; ++yy) g(s, yy) = std::stod(fields[2 * s + yy]);
    grid.push_back(std::move(g));
  }
  return grid;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) fail(errc::io_error, "cli: cannot write '" + path + "'");
  out << text;
}

DGPConfig dgp_from_json(const nlohmann::json& j) {
  DGPConfig c;
  auto get = [&](const char* key, double& slot) {
    if (j.contains(key)) slot = j.at(key).get<double>();
  };
  if (j.contains("n")) c.n = j.at("n").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("beta")) {
    c.beta0 = j.at("beta").at(0).get<double>();
    c.beta1 = j.at("beta").at(1).get<double>();
  }
  if (j.contains("lambda")) {
    c.lambda0 = j.at("lambda").at(0).get<double>();
    c.lambda1 = j.at("lambda").at(1).get<double>();
  }
  get("y0_intercept", c.y0_intercept);
  get("y0_s_slope", c.y0_s_slope);
  get("y0_v_slope", c.y0_v_slope);
  get("x_other_slope", c.x_other_slope);
  if (j.contains("vs_bounds")) {
    c.vs_lo = j.at("vs_bounds").at(0).get<double>();
    c.vs_hi = j.at("vs_bounds").at(1).get<double>();
  }
  get("treat_prob", c.treat_prob);
  get("confound_slope", c.confound_slope);
  if (j.contains("n_strata")) c.n_strata = j.at("n_strata").get<int>();
  return c;
}

int cmd_estimate(RunConfig& cfg, const std::string& gamma_path, const std::string& out_path,
                 const std::string& format) {
  if (!gamma_path.empty()) cfg.gamma_grid = load_gamma_grid(gamma_path);
  validate_config(cfg);
  const RunReport report = run(cfg);
  write_text(out_path, format == "json" ? render_json(report) : render_table(report));
  return 0;
}

int cmd_simulate(StudyConfig& cfg, const std::string& out_prefix) {
  const MCReport report = run_study(cfg);
  std::cout << mc_table(report);
  if (!out_prefix.empty()) {
    write_mc_csv(out_prefix + "_mc.csv", report);
    write_estimates_csv(out_prefix + "_estimates.csv", report);
    std::cout << "wrote " << out_prefix << "_mc.csv and " << out_prefix << "_estimates.csv\n";
  }
  return 0;
}

int cmd_probe(const DGPConfig& dgp, const std::vector<double>& t_grid) {
  const SimData sim = generate(dgp);
  const OracleNuisance oracle = oracle_nuisance(sim, dgp);
  const int n = oracle.data.n();
  Eigen::VectorXd dq(n), dr(n), dpi = Eigen::VectorXd::Constant(n, 0.05);
  for (int i = 0; i < n; ++i) {
    dq[i] = 0.05 * std::sin(oracle.data.basis(i, 1));
    dr[i] = 0.05 * std::sin(oracle.data.basis(i, 1));
  }
  Eigen::VectorXd xi_dir = Eigen::VectorXd::Zero(4);
  xi_dir[0] = 1.0;

  std::printf("orthogonality probe: n=%d, directions perturb p0, p1, pi, and xi (control)\n",
              n);
  std::printf("%-10s %-6s %-14s %-14s %-10s\n", "direction", "t", "max|deriv|", "max se",
              "max|z|");
  for (double t : t_grid) {
    const auto pq = gateaux_probe_nuisance(oracle.data, LinkKind::linear, oracle.xi_true, &dq,
                                           nullptr, nullptr, t);
    const auto pr = gateaux_probe_nuisance(oracle.data, LinkKind::linear, oracle.xi_true, nullptr,
                                           &dr, nullptr, t);
    const auto pp = gateaux_probe_nuisance(oracle.data, LinkKind::linear, oracle.xi_true, nullptr,
                                           nullptr, &dpi, t);
    const auto px = gateaux_probe_xi(oracle.data, LinkKind::linear, oracle.xi_true, xi_dir, t);
    auto line = [&](const char* name, const ProbeResult& r) {
      std::printf("%-10s %-6.3f %-14.6e %-14.6e %-10.2f\n", name, t,
                  r.derivative.cwiseAbs().maxCoeff(), r.se.maxCoeff(), r.max_ratio);
    };
    line("p0", pq);
    line("p1", pr);
    line("pi", pp);
    line("xi", px);
  }
  return 0;
}

int cmd_make_fixtures(const std::string& dir);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint distribution of binary potential outcomes: estimation and simulation"};
  app.require_subcommand(1);

  // ---- estimate ----
  auto* est = app.add_subcommand("estimate", "estimate the joint potential-outcome distribution");
  RunConfig cfg;
  std::string stratum_col, stratum_from, stratum_cross, vs_col, vs_prognostic, cluster_col;
  std::string estimator = "ls", link = "linear", gamma_path, out_path, format = "table";
  std::string pseudo_path;
  double known_prop = -1.0;
  bool no_bootstrap = false, serial = false, no_interact = false;
  est->add_option("--input", cfg.input_path, "input CSV path")->required();
  est->add_option("--treatment", cfg.bindings.treatment, "treatment column (0/1)")->required();
  est->add_option("--outcome", cfg.bindings.outcome, "outcome column (0/1)")->required();
  est->add_option("--stratum", stratum_col, "existing stratum column (integer labels)");
  est->add_option("--stratum-from", stratum_from, "construct stratum: quantile:<col>[:<bins>]");
  est->add_option("--stratum-cross", stratum_cross, "construct stratum by crossing columns c1,c2,...");
  est->add_option("--vs-column", vs_col, "effect-modifier column V_S");
  est->add_option("--vs-prognostic", vs_prognostic,
                  "fit a control-arm prognostic score on these columns and use it as V_S");
  est->add_option("--estimator", estimator,
                  "ls | ls-adjusted | orthogonal-linear | orthogonal-logistic | orthogonal");
  est->add_option("--link", link, "link for --estimator orthogonal (linear | logistic)");
  est->add_option("--folds", cfg.folds, "cross-fitting folds (1 = no split)");
  est->add_option("--ridge", cfg.ridge, "ridge penalty for nuisance fits");
  est->add_option("--clip", cfg.clip, "propensity clipping bound");
  est->add_option("--spline-degree", cfg.spline_degree, "nuisance spline degree");
  est->add_flag("--no-interact", no_interact, "drop the stratum x spline interaction");
  est->add_option("--known-propensity", known_prop, "known randomization probability");
  est->add_option("--boot-reps", cfg.boot_reps, "bootstrap replicates");
  est->add_flag("--no-bootstrap", no_bootstrap, "skip bootstrap intervals");
  est->add_option("--cluster", cluster_col, "cluster id column; enables cluster bootstrap");
  est->add_option("--seed", cfg.seed, "RNG seed");
  est->add_option("--level", cfg.level, "confidence level");
  est->add_option("--gamma-grid", gamma_path, "CSV of gamma_{s,y} sweep points");
  est->add_flag("--clamp-report", cfg.clamp_report, "clamp headline estimates into [0,1]");
  est->add_option("--export-pseudo", pseudo_path, "write per-row pseudo-outcomes to CSV");
  est->add_option("--rank-tol", cfg.rank_tol, "relative rank tolerance");
  est->add_option("--out", out_path, "report path (default stdout)");
  est->add_option("--format", format, "table | json");
  est->add_flag("--serial", serial, "serial execution (default: OpenMP parallel)");

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "Monte Carlo study with known ground truth");
  StudyConfig study;
  std::string sim_config_path, sim_out_prefix, sim_link = "linear";
  bool sim_serial = false, no_boot_ci = false;
  sim->add_option("--config", sim_config_path, "JSON config (documented in README)");
  sim->add_option("--n", study.dgp.n, "sample size per replication");
  sim->add_option("--reps", study.reps, "Monte Carlo replications");
  sim->add_option("--seed", study.seed, "study seed");
  sim->add_option("--boot-reps", study.boot_reps, "bootstrap replicates per replication");
  sim->add_flag("--no-bootstrap-ci", no_boot_ci, "skip bootstrap CIs (no coverage columns)");
  sim->add_option("--folds", study.folds, "cross-fitting folds for the nuisance fits");
  sim->add_option("--link", sim_link, "estimating-equation link (linear | logistic)");
  sim->add_option("--confound-slope", study.dgp.confound_slope,
                  "logit tilt of treatment probability in V_S (0 = randomized)");
  sim->add_option("--out", sim_out_prefix, "output prefix for MC and estimate CSVs");
  sim->add_flag("--serial", sim_serial, "serial execution");

  // ---- probe-orthogonality ----
  auto* probe = app.add_subcommand("probe-orthogonality",
                                   "Gateaux-derivative probe of the orthogonal score");
  DGPConfig probe_dgp;
  probe_dgp.n = 100000;
  std::vector<double> t_grid{0.5, 1.0};
  probe->add_option("--n", probe_dgp.n, "sample size");
  probe->add_option("--seed", probe_dgp.seed, "seed");
  probe->add_option("--t", t_grid, "t grid for symmetric differences");

  // ---- make-fixtures ----
  auto* fix = app.add_subcommand("make-fixtures", "write small test CSVs");
  std::string fixture_dir = ".";
  fix->add_option("--out-dir", fixture_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (est->parsed()) {
      if (!stratum_col.empty()) cfg.bindings.stratum = stratum_col;
      if (!stratum_from.empty()) cfg.stratum_spec = parse_stratum_from(stratum_from);
      if (!stratum_cross.empty()) {
        StratumSpec spec;
        spec.mode = StratumSpec::Mode::factor_cross;
        spec.cross_columns = split_list(stratum_cross);
        cfg.stratum_spec = spec;
      }
      if (!vs_col.empty()) cfg.vs_column = vs_col;
      if (!vs_prognostic.empty()) cfg.prognostic_predictors = split_list(vs_prognostic);
      if (!cluster_col.empty()) {
        cfg.bindings.cluster = cluster_col;
        cfg.cluster_bootstrap = true;
      }
      if (estimator == "orthogonal")
        estimator = link == "logistic" ? "orthogonal-logistic" : "orthogonal-linear";
      cfg.estimator = parse_estimator(estimator);
      if (known_prop > 0.0) cfg.known_propensity = known_prop;
      cfg.do_bootstrap = !no_bootstrap;
      cfg.interact_stratum = !no_interact;
      if (!pseudo_path.empty()) cfg.pseudo_outcome_path = pseudo_path;
      cfg.exec = serial ? ExecMode::serial : ExecMode::parallel;
      return cmd_estimate(cfg, gamma_path, out_path, format);
    }
    if (sim->parsed()) {
      // CLI flags land in `study` at parse time; remember them so they win
      // over the config file.
      const StudyConfig from_flags = study;
      if (!sim_config_path.empty()) {
        std::ifstream in(sim_config_path);
        if (!in) fail(errc::io_error, "cli: cannot open '" + sim_config_path + "'");
        nlohmann::json j;
        try {
          in >> j;
        } catch (const nlohmann::json::parse_error& e) {
          fail(errc::parse_error, std::string("cli: bad simulate config: ") + e.what());
        }
        study.dgp = dgp_from_json(j);
        if (j.contains("reps")) study.reps = j.at("reps").get<int>();
        if (j.contains("boot_reps")) study.boot_reps = j.at("boot_reps").get<int>();
        if (j.contains("folds")) study.folds = j.at("folds").get<int>();
        if (j.contains("study_seed")) study.seed = j.at("study_seed").get<std::uint64_t>();
        if (j.contains("link"))
          study.link = j.at("link").get<std::string>() == "logistic" ? LinkKind::logistic
                                                                     : LinkKind::linear;
        if (sim->count("--n")) study.dgp.n = from_flags.dgp.n;
        if (sim->count("--reps")) study.reps = from_flags.reps;
        if (sim->count("--seed")) study.seed = from_flags.seed;
        if (sim->count("--boot-reps")) study.boot_reps = from_flags.boot_reps;
        if (sim->count("--folds")) study.folds = from_flags.folds;
        if (sim->count("--confound-slope"))
          study.dgp.confound_slope = from_flags.dgp.confound_slope;
      }
      if (sim->count("--link"))
        study.link = sim_link == "logistic" ? LinkKind::logistic : LinkKind::linear;
      study.bootstrap_ci = !no_boot_ci;
      study.exec = sim_serial ? ExecMode::serial : ExecMode::parallel;
      return cmd_simulate(study, sim_out_prefix);
    }
    if (probe->parsed()) return cmd_probe(probe_dgp, t_grid);
    if (fix->parsed()) return cmd_make_fixtures(fixture_dir);
  } catch (const jpo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}

namespace {

int cmd_make_fixtures(const std::string& dir) {
  auto path = [&](const std::string& name) { return dir + "/" + name; };

  // Two-stratum fixture with exact cell proportions: p0 = (0.2, 0.6),
  // p1 = (0.4, 0.6), solving to theta = (0.3, 0.8).
  {
    std::ofstream out(path("ls_two_stratum.csv"));
    out << "a,y,s,x\n";
    auto block = [&](int s, int a, int ones, int total) {
      for (int i = 0; i < total; ++i)
        out << a << "," << (i < ones ? 1 : 0) << "," << s << "," << (s * 10 + i % 7) << "\n";
    };
    block(1, 0, 2, 10);   // stratum 1 control: mean 0.2
    block(1, 1, 4, 10);   // stratum 1 treated: mean 0.4
    block(2, 0, 6, 10);   // stratum 2 control: mean 0.6
    block(2, 1, 6, 10);   // stratum 2 treated: mean 0.6
  }
  // Confounded synthetic sample (treatment tilted by V_S).
  {
    DGPConfig dgp;
    dgp.n = 2000;
    dgp.seed = 7;
    dgp.confound_slope = 1.0;
    const SimData sim = generate(dgp);
    write_csv(path("confounded.csv"), sim.data.data);
  }
  // Household-style clusters: pairs sharing a cluster id.
  {
    DGPConfig dgp;
    dgp.n = 400;
    dgp.seed = 11;
    const SimData sim = generate(dgp);
    Dataset d = sim.data.data;
    d.has_clusters = true;
    d.cluster.resize(d.n());
    d.cluster_labels.clear();
    for (int i = 0; i < d.n(); ++i) {
      d.cluster[i] = i / 2;
      if (i % 2 == 0) d.cluster_labels.push_back("hh" + std::to_string(i / 2));
    }
    write_csv(path("clustered.csv"), d);
  }
  // Gamma grids: the null sweep and a hand-solvable offset.
  {
    std::ofstream out(path("gamma_zero.csv"));
    out << "gamma_s1_y0,gamma_s1_y1,gamma_s2_y0,gamma_s2_y1\n0,0,0,0\n";
  }
  {
    std::ofstream out(path("gamma_shift.csv"));
    out << "gamma_s1_y0,gamma_s1_y1,gamma_s2_y0,gamma_s2_y1\n";
    out << "0,0,0,0\n0.05,0,0.05,0\n";
  }
  std::cout << "fixtures written under " << dir << "\n";
  return 0;
}

}  // namespace
