#include "oracles.hpp"

#include <cmath>

#include "jpo/common.hpp"
#include "jpo/rng.hpp"

namespace oracles {

double simpson(const std::function<double(double)>& f, double a, double b, int intervals) {
  if (intervals % 2 != 0) ++intervals;
  const double h = (b - a) / intervals;
  double sum = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

namespace {

double phi(double x) { return jpo::norm_pdf(x); }
double Phi(double x) { return jpo::norm_cdf(x); }

// Density of V ~ N(0,1) truncated to [lo, hi].
double trunc_density(double v, double lo, double hi) {
  if (v < lo || v > hi) return 0.0;
  return phi(v) / (Phi(hi) - Phi(lo));
}

}  // namespace

double truncated_normal_mean(double a, double b) {
  const double mass = Phi(b) - Phi(a);
  return simpson([&](double v) { return v * phi(v); }, a, b) / mass;
}

std::vector<double> DgpPopulation::x_cutoffs() const {
  // X = x_slope * V + eps: marginal CDF by integrating over the truncated V.
  auto cdf = [&](double x) {
    return simpson([&](double v) { return Phi(x - x_slope * v) * trunc_density(v, vs_lo, vs_hi); },
                   vs_lo, vs_hi);
  };
  std::vector<double> cuts;
  for (int k = 1; k < n_strata; ++k) {
    const double target = static_cast<double>(k) / n_strata;
    double lo = -10.0, hi = 10.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) < target ? lo : hi) = mid;
    }
    cuts.push_back(0.5 * (lo + hi));
  }
  return cuts;
}

double DgpPopulation::p0_given_stratum(int s) const {
  const auto cuts = x_cutoffs();
  const double lo_cut = s == 1 ? -1e30 : cuts[s - 2];
  const double hi_cut = s == n_strata ? 1e30 : cuts[s - 1];
  // P(S=s | V=v) = P(lo_cut < x_slope v + eps <= hi_cut).
  auto p_s_given_v = [&](double v) {
    return Phi(hi_cut - x_slope * v) - Phi(lo_cut - x_slope * v);
  };
  auto outcome = [&](double v) {
    return jpo::expit(y0_icpt + y0_s_slope * (s - 2) + y0_v_slope * v);
  };
  const double numer = simpson(
      [&](double v) { return outcome(v) * p_s_given_v(v) * trunc_density(v, vs_lo, vs_hi); },
      vs_lo, vs_hi);
  const double denom = simpson(
      [&](double v) { return p_s_given_v(v) * trunc_density(v, vs_lo, vs_hi); }, vs_lo, vs_hi);
  return numer / denom;
}

double DgpPopulation::stratum_mass(int s) const {
  const auto cuts = x_cutoffs();
  const double lo_cut = s == 1 ? -1e30 : cuts[s - 2];
  const double hi_cut = s == n_strata ? 1e30 : cuts[s - 1];
  return simpson(
      [&](double v) {
        return (Phi(hi_cut - x_slope * v) - Phi(lo_cut - x_slope * v)) *
               trunc_density(v, vs_lo, vs_hi);
      },
      vs_lo, vs_hi);
}

double DgpPopulation::mu1() const {
  double total = 0.0;
  for (int s = 1; s <= n_strata; ++s) total += stratum_mass(s) * p0_given_stratum(s);
  return total;
}

double DiscreteJointLaw::p1(int s) const {
  // Enumerate atoms (y0, y1) within stratum s.
  const double q = p_y0_s[s];
  double p = 0.0;
  for (int y0 = 0; y0 < 2; ++y0) {
    const double w = y0 ? q : 1.0 - q;
    const double t = y0 ? theta2 : theta1;
    p += w * t;  // contribution of atoms with y1 = 1
  }
  return p;
}

DiscreteJointLaw random_joint_law(std::uint64_t seed, int n_strata) {
  jpo::Substream rng(seed, 0x4C4157ULL);
  DiscreteJointLaw law;
  for (;;) {
    law.p_s.clear();
    law.p_y0_s.clear();
    double total = 0.0;
    for (int s = 0; s < n_strata; ++s) {
      const double w = 0.2 + rng.next_unit();
      law.p_s.push_back(w);
      total += w;
      law.p_y0_s.push_back(0.05 + 0.9 * rng.next_unit());
    }
    for (auto& w : law.p_s) w /= total;
    law.theta1 = rng.next_unit();
    law.theta2 = rng.next_unit();
    // Rank condition: the p0 values must be well separated somewhere.
    double spread = 0.0;
    for (int i = 0; i < n_strata; ++i)
      for (int j = i + 1; j < n_strata; ++j)
        spread = std::max(spread, std::abs(law.p_y0_s[i] - law.p_y0_s[j]));
    if (spread > 0.05) return law;
  }
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd hi = x, lo = x;
    hi[i] += step;
    lo[i] -= step;
    g[i] = (f(hi) - f(lo)) / (2.0 * step);
  }
  return g;
}

}  // namespace oracles
