#include <cmath>
#include <iomanip>
#include <sstream>

#include "jpo/common.hpp"
#include "jpo/pipeline.hpp"
#include "json.hpp"

namespace jpo {

namespace {

using nlohmann::json;

json interval_to_json(const TargetInterval& t) {
  return json{{"name", t.name},     {"point", t.point}, {"se", t.se},
              {"lower", t.lower},   {"upper", t.upper}, {"level", t.level},
              {"method", t.method}, {"boundary", t.boundary}};
}

TargetInterval interval_from_json(const json& j) {
  TargetInterval t;
  t.name = j.at("name").get<std::string>();
  t.point = j.at("point").get<double>();
  t.se = j.at("se").get<double>();
  t.lower = j.at("lower").get<double>();
  t.upper = j.at("upper").get<double>();
  t.level = j.at("level").get<double>();
  t.method = j.at("method").get<std::string>();
  t.boundary = j.at("boundary").get<bool>();
  return t;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.size();
  const auto cols = rows ? j.at(0).size() : 0;
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
  return v;
}

}  // namespace

std::string render_json(const RunReport& r) {
  json j;
  j["schema"] = r.schema;
  j["provenance"] = {{"estimator", r.estimator},
                     {"seed", r.seed},
                     {"input", r.input_path},
                     {"n", r.n},
                     {"n_strata", r.n_strata},
                     {"config", r.config_echo}};
  j["rank"] = {{"sigma_min", r.rank.sigma_min},
               {"sigma_max", r.rank.sigma_max},
               {"condition", r.rank.condition},
               {"deficient", r.rank.deficient}};
  j["estimates"] = {{"theta1", r.theta1},
                    {"theta2", r.theta2},
                    {"theta_boundary", r.theta_boundary},
                    {"mu0", r.mu0},
                    {"mu1", r.mu1},
                    {"cells", {r.cells[0], r.cells[1], r.cells[2], r.cells[3]}},
                    {"cell_boundary", r.cell_boundary},
                    {"clamped", r.clamped_for_reporting}};
  json si = json::array(), bi = json::array();
  for (const auto& t : r.sandwich_intervals) si.push_back(interval_to_json(t));
  for (const auto& t : r.bootstrap_intervals) bi.push_back(interval_to_json(t));
  j["sandwich_intervals"] = std::move(si);
  j["bootstrap_intervals"] = std::move(bi);
  j["bootstrap"] = {{"replicates", r.bootstrap_replicates}, {"failures", r.bootstrap_failures}};
  if (r.xi) {
    j["xi"] = {{"beta", vector_to_json(r.xi->beta)},
               {"lambda", vector_to_json(r.xi->lambda)},
               {"se", vector_to_json(r.xi->se)},
               {"iterations", r.xi->iterations},
               {"converged", r.xi->converged},
               {"score_norm", r.xi->score_norm},
               {"min_design_eigenvalue", r.xi->min_design_eigenvalue},
               {"extreme_q_share", r.xi->extreme_q_share}};
  }
  if (r.consistency) {
    j["consistency"] = {{"p1_marginal", r.consistency->p1_marginal},
                        {"implied_mu1", r.consistency->implied_mu1},
                        {"direct_mu1", r.consistency->direct_mu1},
                        {"discrepancy", r.consistency->discrepancy}};
  }
  if (r.consistency_note) j["consistency_note"] = *r.consistency_note;
  json sens = json::array();
  for (const auto& row : r.sensitivity)
    sens.push_back(json{{"gamma", matrix_to_json(row.gamma)},
                        {"theta1", row.theta1},
                        {"theta2", row.theta2},
                        {"boundary", row.boundary}});
  j["sensitivity"] = std::move(sens);
  j["warnings"] = r.warnings;
  return j.dump(2);
}

RunReport parse_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(errc::parse_error, std::string("cli: report parse failure: ") + e.what());
  }
  RunReport r;
  r.schema = j.at("schema").get<std::string>();
  if (r.schema != "jpo-report/1")
    fail(errc::parse_error, "cli: unsupported report schema '" + r.schema + "'");
  const auto& prov = j.at("provenance");
  r.estimator = prov.at("estimator").get<std::string>();
  r.seed = prov.at("seed").get<std::uint64_t>();
  r.input_path = prov.at("input").get<std::string>();
  r.n = prov.at("n").get<int>();
  r.n_strata = prov.at("n_strata").get<int>();
  r.config_echo = prov.at("config").get<std::vector<std::string>>();
  const auto& rank = j.at("rank");
  r.rank.sigma_min = rank.at("sigma_min").get<double>();
  r.rank.sigma_max = rank.at("sigma_max").get<double>();
  r.rank.condition = rank.at("condition").get<double>();
  r.rank.deficient = rank.at("deficient").get<bool>();
  const auto& est = j.at("estimates");
  r.theta1 = est.at("theta1").get<double>();
  r.theta2 = est.at("theta2").get<double>();
  r.theta_boundary = est.at("theta_boundary").get<bool>();
  r.mu0 = est.at("mu0").get<double>();
  r.mu1 = est.at("mu1").get<double>();
  for (int c = 0; c < 4; ++c) r.cells[c] = est.at("cells").at(c).get<double>();
  r.cell_boundary = est.at("cell_boundary").get<bool>();
  r.clamped_for_reporting = est.at("clamped").get<bool>();
  for (const auto& t : j.at("sandwich_intervals")) r.sandwich_intervals.push_back(interval_from_json(t));
  for (const auto& t : j.at("bootstrap_intervals"))
    r.bootstrap_intervals.push_back(interval_from_json(t));
  r.bootstrap_replicates = j.at("bootstrap").at("replicates").get<int>();
  r.bootstrap_failures = j.at("bootstrap").at("failures").get<int>();
  if (j.contains("xi")) {
    XiReport x;
    x.beta = vector_from_json(j.at("xi").at("beta"));
    x.lambda = vector_from_json(j.at("xi").at("lambda"));
    x.se = vector_from_json(j.at("xi").at("se"));
    x.iterations = j.at("xi").at("iterations").get<int>();
    x.converged = j.at("xi").at("converged").get<bool>();
    x.score_norm = j.at("xi").at("score_norm").get<double>();
    x.min_design_eigenvalue = j.at("xi").at("min_design_eigenvalue").get<double>();
    x.extreme_q_share = j.at("xi").at("extreme_q_share").get<double>();
    r.xi = std::move(x);
  }
  if (j.contains("consistency")) {
    ConsistencyCheck c;
    c.p1_marginal = j.at("consistency").at("p1_marginal").get<double>();
    c.implied_mu1 = j.at("consistency").at("implied_mu1").get<double>();
    c.direct_mu1 = j.at("consistency").at("direct_mu1").get<double>();
    c.discrepancy = j.at("consistency").at("discrepancy").get<double>();
    r.consistency = c;
  }
  if (j.contains("consistency_note"))
    r.consistency_note = j.at("consistency_note").get<std::string>();
  for (const auto& s : j.at("sensitivity")) {
    SensitivityRow row;
    row.gamma = matrix_from_json(s.at("gamma"));
    row.theta1 = s.at("theta1").get<double>();
    row.theta2 = s.at("theta2").get<double>();
    row.boundary = s.at("boundary").get<bool>();
    r.sensitivity.push_back(std::move(row));
  }
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

bool report_equal(const RunReport& a, const RunReport& b, double tol) {
  auto eq = [tol](double x, double y) {
    if (tol == 0.0) return x == y || (std::isnan(x) && std::isnan(y));
    return std::abs(x - y) <= tol;
  };
  if (a.schema != b.schema || a.estimator != b.estimator || a.seed != b.seed ||
      a.input_path != b.input_path || a.n != b.n || a.n_strata != b.n_strata ||
      a.config_echo != b.config_echo || a.warnings != b.warnings)
    return false;
  if (!eq(a.theta1, b.theta1) || !eq(a.theta2, b.theta2) || !eq(a.mu0, b.mu0) ||
      !eq(a.mu1, b.mu1))
    return false;
  if (a.theta_boundary != b.theta_boundary || a.cell_boundary != b.cell_boundary ||
      a.clamped_for_reporting != b.clamped_for_reporting)
    return false;
  for (int c = 0; c < 4; ++c)
    if (!eq(a.cells[c], b.cells[c])) return false;
  if (!eq(a.rank.sigma_min, b.rank.sigma_min) || !eq(a.rank.sigma_max, b.rank.sigma_max) ||
      a.rank.deficient != b.rank.deficient)
    return false;
  auto intervals_eq = [&](const std::vector<TargetInterval>& x,
                          const std::vector<TargetInterval>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].name != y[i].name || x[i].method != y[i].method ||
          x[i].boundary != y[i].boundary || !eq(x[i].point, y[i].point) ||
          !eq(x[i].se, y[i].se) || !eq(x[i].lower, y[i].lower) || !eq(x[i].upper, y[i].upper) ||
          !eq(x[i].level, y[i].level))
        return false;
    }
    return true;
  };
  if (!intervals_eq(a.sandwich_intervals, b.sandwich_intervals)) return false;
  if (!intervals_eq(a.bootstrap_intervals, b.bootstrap_intervals)) return false;
  if (a.bootstrap_replicates != b.bootstrap_replicates ||
      a.bootstrap_failures != b.bootstrap_failures)
    return false;
  if (a.xi.has_value() != b.xi.has_value()) return false;
  if (a.xi) {
    if (a.xi->beta.size() != b.xi->beta.size() || a.xi->iterations != b.xi->iterations ||
        a.xi->converged != b.xi->converged)
      return false;
    for (Eigen::Index i = 0; i < a.xi->beta.size(); ++i)
      if (!eq(a.xi->beta[i], b.xi->beta[i]) || !eq(a.xi->lambda[i], b.xi->lambda[i]))
        return false;
    for (Eigen::Index i = 0; i < a.xi->se.size(); ++i)
      if (!eq(a.xi->se[i], b.xi->se[i])) return false;
  }
  if (a.consistency.has_value() != b.consistency.has_value()) return false;
  if (a.consistency && !eq(a.consistency->discrepancy, b.consistency->discrepancy)) return false;
  if (a.sensitivity.size() != b.sensitivity.size()) return false;
  for (std::size_t i = 0; i < a.sensitivity.size(); ++i) {
    if (!eq(a.sensitivity[i].theta1, b.sensitivity[i].theta1) ||
        !eq(a.sensitivity[i].theta2, b.sensitivity[i].theta2) ||
        a.sensitivity[i].boundary != b.sensitivity[i].boundary)
      return false;
    if (!a.sensitivity[i].gamma.isApprox(b.sensitivity[i].gamma, 0.0)) return false;
  }
  return true;
}

std::string render_table(const RunReport& r) {
  std::ostringstream os;
  os << "== joint potential-outcome estimation ==\n";
  os << "estimator: " << r.estimator << "   n: " << r.n << "   strata: " << r.n_strata
     << "   seed: " << r.seed << "\n";
  os << std::fixed << std::setprecision(4);
  os << "rank: sigma_min=" << r.rank.sigma_min << " condition=" << r.rank.condition
     << (r.rank.deficient ? "  [DEFICIENT]" : "") << "\n\n";

  os << "theta1 = P(Y(1)=1 | Y(0)=0) = " << r.theta1 << "\n";
  os << "theta2 = P(Y(1)=1 | Y(0)=1) = " << r.theta2 << "\n";
  if (r.theta_boundary) os << "WARNING: theta estimate outside [0,1]\n";
  os << "mu0 = P(Y(0)=0) = " << r.mu0 << "   mu1 = P(Y(0)=1) = " << r.mu1 << "\n\n";
  os << "joint cells P(Y(0)=i, Y(1)=j):\n";
  os << "          Y(1)=0   Y(1)=1\n";
  os << "  Y(0)=0  " << std::setw(7) << r.cells[0] << "  " << std::setw(7) << r.cells[1] << "\n";
  os << "  Y(0)=1  " << std::setw(7) << r.cells[2] << "  " << std::setw(7) << r.cells[3] << "\n";
  if (r.cell_boundary) os << "WARNING: a joint cell lies outside [0,1]\n";
  os << "\n";

  auto print_intervals = [&](const char* title, const std::vector<TargetInterval>& ts) {
    if (ts.empty()) return;
    os << title << "\n";
    os << "  target    point       se       lower     upper    method\n";
    for (const auto& t : ts) {
      os << "  " << std::setw(7) << std::left << t.name << std::right << std::setw(9) << t.point
         << std::setw(10) << t.se << std::setw(10) << t.lower << std::setw(10) << t.upper << "  "
         << t.method << (t.boundary ? "  [boundary]" : "") << "\n";
    }
    os << "\n";
  };
  print_intervals("sandwich intervals:", r.sandwich_intervals);
  print_intervals("bootstrap intervals:", r.bootstrap_intervals);
  if (r.bootstrap_replicates > 0)
    os << "bootstrap: " << r.bootstrap_replicates << " replicates, " << r.bootstrap_failures
       << " failed\n\n";

  if (r.xi) {
    os << "xi = (beta, lambda):\n  beta   = [";
    for (Eigen::Index i = 0; i < r.xi->beta.size(); ++i)
      os << (i ? ", " : "") << r.xi->beta[i];
    os << "]\n  lambda = [";
    for (Eigen::Index i = 0; i < r.xi->lambda.size(); ++i)
      os << (i ? ", " : "") << r.xi->lambda[i];
    os << "]\n  se     = [";
    for (Eigen::Index i = 0; i < r.xi->se.size(); ++i) os << (i ? ", " : "") << r.xi->se[i];
    os << "]\n  iterations=" << r.xi->iterations << " converged=" << (r.xi->converged ? "yes" : "no")
       << " score_norm=" << std::scientific << r.xi->score_norm << std::fixed << "\n";
    os << "  min design eigenvalue=" << r.xi->min_design_eigenvalue
       << "  extreme-q share=" << r.xi->extreme_q_share << "\n\n";
  }
  if (r.consistency) {
    os << "consistency check: P(Y(1)=1)=" << r.consistency->p1_marginal
       << "  implied mu1=" << r.consistency->implied_mu1
       << "  direct mu1=" << r.consistency->direct_mu1
       << "  discrepancy=" << r.consistency->discrepancy << "\n\n";
  } else if (r.consistency_note) {
    os << "consistency check skipped: " << *r.consistency_note << "\n\n";
  }
  if (!r.sensitivity.empty()) {
    os << "sensitivity sweep (gamma offsets on the risk table):\n";
    os << "   idx   theta1   theta2\n";
    for (std::size_t i = 0; i < r.sensitivity.size(); ++i)
      os << "  " << std::setw(4) << i << std::setw(9) << r.sensitivity[i].theta1 << std::setw(9)
         << r.sensitivity[i].theta2 << (r.sensitivity[i].boundary ? "  [boundary]" : "") << "\n";
    os << "\n";
  }
  for (const auto& w : r.warnings) os << "warning: " << w << "\n";
  return os.str();
}

}  // namespace jpo
