#include "jpo/orthogonal.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "jpo/common.hpp"

namespace jpo {

namespace {

constexpr int kChunk = 8192;  // fixed reduction granularity, independent of thread count

// Deterministic sum of per-row terms: fixed-size chunks are accumulated
// serially, chunk partials combined in index order.
template <class Partial, class Body>
Partial chunked_sum(int n, ExecMode exec, const Partial& zero, Body&& body) {
  const int n_chunks = (n + kChunk - 1) / kChunk;
  std::vector<Partial> partials(n_chunks, zero);
  parallel_for_static(n_chunks, exec, [&](std::int64_t c) {
    const int lo = static_cast<int>(c) * kChunk;
    const int hi = std::min(n, lo + kChunk);
    for (int i = lo; i < hi; ++i) body(i, partials[c]);
  });
  Partial total = zero;
  for (const auto& p : partials) total += p;
  return total;
}

struct RowTerms {
  Eigen::VectorXd z;   // design vector, 2p
  double bracket;      // treated-arm residual term
  double corr_coef;    // g - h
  double w;            // control-arm weighted residual
  LinkValue g, h;
};

RowTerms row_terms(const OrthogonalData& d, int i, LinkKind link, const Eigen::VectorXd& beta,
                   const Eigen::VectorXd& lambda) {
  RowTerms t;
  const auto b = d.basis.row(i);
  t.g = link_eval(link, b.dot(beta));
  t.h = link_eval(link, b.dot(lambda));
  const double q = d.q[i];
  const int p = d.p();
  t.z.resize(2 * p);
  t.z.head(p) = (1.0 - q) * t.g.d1 * b.transpose();
  t.z.tail(p) = q * t.h.d1 * b.transpose();
  const double model = t.g.value * (1.0 - q) + t.h.value * q;
  const double k = d.r[i] + (d.a[i] == 1 ? (d.y[i] - d.r[i]) / d.pi1[i] : 0.0);
  t.bracket = k - model;
  t.corr_coef = t.g.value - t.h.value;
  t.w = d.a[i] == 0 ? (d.y[i] - d.q[i]) / (1.0 - d.pi1[i]) : 0.0;
  return t;
}

}  // namespace

LinkValue link_eval(LinkKind kind, double eta) {
  LinkValue v;
  if (kind == LinkKind::linear) {
    v.value = eta;
    v.d1 = 1.0;
    v.d2 = 0.0;
  } else {
    const double g = expit(eta);
    v.value = g;
    v.d1 = g * (1.0 - g);
    v.d2 = g * (1.0 - g) * (1.0 - 2.0 * g);
  }
  return v;
}

OrthogonalData make_orthogonal_data(const ValidatedDataset& data, const NuisanceSet& nuisance,
                                    const std::string& vs_column) {
  const Dataset& d = data.data;
  const int n = d.n();
  if (nuisance.p0.size() != n || nuisance.p1.size() != n || nuisance.pi1.size() != n)
    fail(errc::missing_nuisance, "orthogonal-core: nuisance predictions missing for some rows");
  OrthogonalData out;
  const int col = d.col(vs_column);
  out.basis.resize(n, 2);
  out.basis.col(0).setOnes();
  out.basis.col(1) = d.v.col(col);
  out.q = nuisance.p0;
  out.r = nuisance.p1;
  out.pi1 = nuisance.pi1;
  out.a = d.a;
  out.y = d.y;
  return out;
}

Eigen::VectorXd ls_initializer(const OrthogonalData& data, LinkKind link, int max_iter) {
  const int n = data.n(), p = data.p(), dim = 2 * p;
  if (n < dim)
    fail(errc::insufficient_grid,
         "orthogonal-core: need at least " + std::to_string(dim) + " (s,v) points");

  auto lin_design_row = [&](int i) {
    Eigen::VectorXd x(dim);
    x.head(p) = (1.0 - data.q[i]) * data.basis.row(i).transpose();
    x.tail(p) = data.q[i] * data.basis.row(i).transpose();
    return x;
  };
  auto solve_normal = [&](const Eigen::MatrixXd& ata, const Eigen::VectorXd& atb) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(ata);
    lu.setThreshold(1e-10);
    if (lu.rank() < dim)
      fail(errc::singular_normal_equations,
           "orthogonal-core: singular least-squares system for the initializer");
    return Eigen::VectorXd(lu.solve(atb));
  };

  // Linear link: one closed-form solve.
  Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd atb = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = lin_design_row(i);
    ata.selfadjointView<Eigen::Lower>().rankUpdate(x);
    atb += x * data.r[i];
  }
  ata = ata.selfadjointView<Eigen::Lower>();
  const Eigen::VectorXd lin = solve_normal(ata, atb);
  if (link == LinkKind::linear) return lin;

  // Logistic: Gauss-Newton on the same squared-error objective, started from
  // the linear solution's intercepts pushed through the logit.
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(dim);
  xi[0] = logit(std::clamp(lin[0], 0.05, 0.95));
  xi[p] = logit(std::clamp(lin[p], 0.05, 0.95));
  double ssr = std::numeric_limits<double>::infinity();
  auto objective = [&](const Eigen::VectorXd& cand) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto b = data.basis.row(i);
      const double g = expit(b.dot(cand.head(p)));
      const double h = expit(b.dot(cand.tail(p)));
      const double e = data.r[i] - g * (1.0 - data.q[i]) - h * data.q[i];
      s += e * e;
    }
    return s;
  };
  ssr = objective(xi);
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd jte = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < n; ++i) {
      const auto b = data.basis.row(i);
      const LinkValue g = link_eval(link, b.dot(xi.head(p)));
      const LinkValue h = link_eval(link, b.dot(xi.tail(p)));
      Eigen::VectorXd z(dim);
      z.head(p) = (1.0 - data.q[i]) * g.d1 * b.transpose();
      z.tail(p) = data.q[i] * h.d1 * b.transpose();
      const double e = data.r[i] - g.value * (1.0 - data.q[i]) - h.value * data.q[i];
      jtj.selfadjointView<Eigen::Lower>().rankUpdate(z);
      jte += z * e;
    }
    jtj = jtj.selfadjointView<Eigen::Lower>();
    if (jte.lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, ssr)) break;
    jtj.diagonal().array() += 1e-12;  // guards rank at flat iterates
    Eigen::VectorXd step = solve_normal(jtj, jte);
    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half < 25; ++half) {
      const Eigen::VectorXd cand = xi + t * step;
      const double s = objective(cand);
      if (s <= ssr + 1e-14) {
        xi = cand;
        accepted = s < ssr - 1e-14;
        ssr = s;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  return xi;
}

Eigen::VectorXd psi_score_row(const OrthogonalData& data, int row, LinkKind link,
                              const Eigen::VectorXd& xi) {
  const int p = data.p();
  if (xi.size() != 2 * p) fail(errc::dimension_mismatch, "orthogonal-core: xi dimension");
  const RowTerms t = row_terms(data, row, link, xi.head(p), xi.tail(p));
  return t.z * (t.bracket + t.corr_coef * t.w);
}

Eigen::MatrixXd psi_matrix(const OrthogonalData& data, LinkKind link, const Eigen::VectorXd& xi,
                           ExecMode exec) {
  const int n = data.n(), p = data.p();
  if (xi.size() != 2 * p) fail(errc::dimension_mismatch, "orthogonal-core: xi dimension");
  const Eigen::VectorXd beta = xi.head(p), lambda = xi.tail(p);
  Eigen::MatrixXd psi(n, 2 * p);
  parallel_for_static(n, exec, [&](std::int64_t i) {
    const RowTerms t = row_terms(data, static_cast<int>(i), link, beta, lambda);
    psi.row(i) = (t.z * (t.bracket + t.corr_coef * t.w)).transpose();
  });
  return psi;
}

Eigen::VectorXd psi_mean(const OrthogonalData& data, LinkKind link, const Eigen::VectorXd& xi,
                         ExecMode exec) {
  const int n = data.n(), p = data.p();
  if (xi.size() != 2 * p) fail(errc::dimension_mismatch, "orthogonal-core: xi dimension");
  const Eigen::VectorXd beta = xi.head(p), lambda = xi.tail(p);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2 * p);
  Eigen::VectorXd total = chunked_sum<Eigen::VectorXd>(
      n, exec, zero, [&](int i, Eigen::VectorXd& acc) {
        const RowTerms t = row_terms(data, i, link, beta, lambda);
        acc += t.z * (t.bracket + t.corr_coef * t.w);
      });
  return total / static_cast<double>(n);
}

Eigen::MatrixXd score_jacobian(const OrthogonalData& data, LinkKind link,
                               const Eigen::VectorXd& xi, ExecMode exec) {
  const int n = data.n(), p = data.p(), dim = 2 * p;
  if (xi.size() != dim) fail(errc::dimension_mismatch, "orthogonal-core: xi dimension");
  const Eigen::VectorXd beta = xi.head(p), lambda = xi.tail(p);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd total = chunked_sum<Eigen::MatrixXd>(
      n, exec, zero, [&](int i, Eigen::MatrixXd& acc) {
        const RowTerms t = row_terms(data, i, link, beta, lambda);
        const auto b = data.basis.row(i);
        const double q = data.q[i];
        const double resid = t.bracket + t.corr_coef * t.w;
        // d psi / d beta^T and d lambda^T: curvature of Z times the full
        // residual, plus Z times the residual's own derivative.
        const Eigen::MatrixXd bbt = b.transpose() * b;
        acc.topLeftCorner(p, p) += (1.0 - q) * t.g.d2 * resid * bbt;
        acc.bottomRightCorner(p, p) += q * t.h.d2 * resid * bbt;
        const Eigen::VectorXd dt_dbeta = t.g.d1 * (t.w - (1.0 - q)) * b.transpose();
        const Eigen::VectorXd dt_dlambda = -t.h.d1 * (q + t.w) * b.transpose();
        acc.leftCols(p) += t.z * dt_dbeta.transpose();
        acc.rightCols(p) += t.z * dt_dlambda.transpose();
      });
  return total / static_cast<double>(n);
}

XiEstimate solve_xi(const OrthogonalData& data, LinkKind link, const Eigen::VectorXd& xi0,
                    const XiSolveOptions& opts) {
  const int p = data.p(), dim = 2 * p;
  if (xi0.size() != dim) fail(errc::dimension_mismatch, "orthogonal-core: xi0 dimension");
  Eigen::VectorXd xi = xi0;
  Eigen::VectorXd m = psi_mean(data, link, xi, opts.exec);
  double norm = m.lpNorm<Eigen::Infinity>();

  XiEstimate est;
  for (int it = 1; it <= opts.max_iter && norm > opts.score_tol; ++it) {
    est.iterations = it;
    const Eigen::MatrixXd jac = score_jacobian(data, link, xi, opts.exec);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    lu.setThreshold(1e-12);
    if (lu.rank() < dim)
      fail(errc::singular_jacobian, "orthogonal-core: singular score Jacobian");
    const Eigen::VectorXd step = lu.solve(-m);
    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half <= opts.max_halvings; ++half) {
      const Eigen::VectorXd cand = xi + t * step;
      const Eigen::VectorXd mc = psi_mean(data, link, cand, opts.exec);
      const double nc = mc.lpNorm<Eigen::Infinity>();
      if (nc < norm) {
        xi = cand;
        m = mc;
        norm = nc;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // best iterate retained, reported as non-convergence
  }
  est.beta = xi.head(p);
  est.lambda = xi.tail(p);
  est.score_norm = norm;
  est.converged = norm <= opts.score_tol;
  return est;
}

Eigen::MatrixXd xi_variance(const OrthogonalData& data, LinkKind link, const XiEstimate& xi,
                            ExecMode exec) {
  const int n = data.n(), dim = data.dim();
  const Eigen::VectorXd x = xi.vec();
  const Eigen::MatrixXd jac = score_jacobian(data, link, x, exec);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
  lu.setThreshold(1e-12);
  if (lu.rank() < dim) fail(errc::singular_jacobian, "orthogonal-core: singular score Jacobian");
  const Eigen::MatrixXd jinv = lu.inverse();
  const Eigen::MatrixXd psi = psi_matrix(data, link, x, exec);
  const Eigen::RowVectorXd mean = psi.colwise().mean();
  const Eigen::MatrixXd centered = psi.rowwise() - mean;
  const Eigen::MatrixXd var = (centered.transpose() * centered) / n;
  return jinv * var * jinv.transpose() / n;
}

IdentificationDiagnostic identification_diagnostic(const OrthogonalData& data, LinkKind link,
                                                   const Eigen::VectorXd& xi) {
  const int n = data.n(), p = data.p(), dim = 2 * p;
  const Eigen::VectorXd beta = xi.head(p), lambda = xi.tail(p);
  Eigen::MatrixXd zzt = Eigen::MatrixXd::Zero(dim, dim);
  int extreme = 0;
  for (int i = 0; i < n; ++i) {
    const RowTerms t = row_terms(data, i, link, beta, lambda);
    zzt.selfadjointView<Eigen::Lower>().rankUpdate(t.z);
    if (std::min(data.q[i], 1.0 - data.q[i]) < 0.01) ++extreme;
  }
  zzt = zzt.selfadjointView<Eigen::Lower>();
  zzt /= static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(zzt);
  IdentificationDiagnostic d;
  d.min_eigenvalue = eig.eigenvalues().minCoeff();
  d.extreme_q_share = static_cast<double>(extreme) / n;
  d.weak = d.extreme_q_share > 0.5;
  return d;
}

std::pair<double, double> standardize_theta(const Eigen::MatrixXd& basis, LinkKind link,
                                            const Eigen::VectorXd& beta,
                                            const Eigen::VectorXd& lambda) {
  const int n = static_cast<int>(basis.rows());
  double t1 = 0.0, t2 = 0.0;
  for (int i = 0; i < n; ++i) {
    t1 += link_eval(link, basis.row(i).dot(beta)).value;
    t2 += link_eval(link, basis.row(i).dot(lambda)).value;
  }
  return {t1 / n, t2 / n};
}

StandardizedTheta standardize_theta_with_if(const OrthogonalData& data, LinkKind link,
                                            const XiEstimate& xi, ExecMode exec) {
  const int n = data.n(), p = data.p(), dim = 2 * p;
  StandardizedTheta out;
  const auto [t1, t2] = standardize_theta(data.basis, link, xi.beta, xi.lambda);
  out.theta1 = t1;
  out.theta2 = t2;

  // Gradients of the standardized means in (beta, lambda).
  Eigen::VectorXd grad1 = Eigen::VectorXd::Zero(dim), grad2 = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < n; ++i) {
    const auto b = data.basis.row(i);
    grad1.head(p) += link_eval(link, b.dot(xi.beta)).d1 * b.transpose();
    grad2.tail(p) += link_eval(link, b.dot(xi.lambda)).d1 * b.transpose();
  }
  grad1 /= n;
  grad2 /= n;

  const Eigen::VectorXd x = xi.vec();
  const Eigen::MatrixXd jac = score_jacobian(data, link, x, exec);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
  lu.setThreshold(1e-12);
  if (lu.rank() < dim) fail(errc::singular_jacobian, "orthogonal-core: singular score Jacobian");
  const Eigen::MatrixXd jinv = lu.inverse();
  const Eigen::MatrixXd psi = psi_matrix(data, link, x, exec);

  out.if_rows.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    const auto b = data.basis.row(i);
    const Eigen::VectorXd if_xi = -(jinv * psi.row(i).transpose());
    out.if_rows(i, 0) = link_eval(link, b.dot(xi.beta)).value - out.theta1 + grad1.dot(if_xi);
    out.if_rows(i, 1) = link_eval(link, b.dot(xi.lambda)).value - out.theta2 + grad2.dot(if_xi);
  }
  const Eigen::RowVector2d mean = out.if_rows.colwise().mean();
  const Eigen::MatrixXd centered = out.if_rows.rowwise() - mean;
  out.cov = (centered.transpose() * centered) / n / n;
  return out;
}

}  // namespace jpo
