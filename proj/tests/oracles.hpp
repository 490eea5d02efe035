#pragma once

// Test-side oracles, deliberately independent of the library's estimation
// paths: quadrature over the synthetic DGP, exact enumeration of discrete
// joint laws, and finite differences.

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracles {

// Composite Simpson on [a, b].
double simpson(const std::function<double(double)>& f, double a, double b, int intervals = 4000);

// Mean of a standard normal truncated to [a, b], by quadrature.
double truncated_normal_mean(double a, double b);

// Population quantity for the simulation DGP: P(Y(0)=1 | S = s) where S is
// the population quartile (or k-tile) bin of X = slope*V + N(0,1) and
// logit P(Y(0)=1 | S=s, V=v) = icpt + s_slope*(s-2) + v_slope*v.
struct DgpPopulation {
  double vs_lo, vs_hi;
  double x_slope;
  double y0_icpt, y0_s_slope, y0_v_slope;
  int n_strata;

  std::vector<double> x_cutoffs() const;      // population k-tile cutoffs of X
  double p0_given_stratum(int s) const;       // s in 1..n_strata
  double stratum_mass(int s) const;           // P(S = s), ~ 1/k by construction
  double mu1() const;                         // P(Y(0)=1)
};

// A discrete joint law of (S, Y(0), Y(1)) satisfying the conditional
// independence structure: P(s) * P(y0|s) * P(y1|y0).
struct DiscreteJointLaw {
  std::vector<double> p_s;        // stratum masses
  std::vector<double> p_y0_s;     // P(Y(0)=1 | s)
  double theta1, theta2;          // P(Y(1)=1 | Y(0)=0), P(Y(1)=1 | Y(0)=1)

  int n_strata() const { return static_cast<int>(p_s.size()); }
  // Exact stratum risks by enumerating the atoms.
  double p0(int s) const { return p_y0_s[s]; }
  double p1(int s) const;
};

// Random law with rank-separated p0 values; deterministic in the seed.
DiscreteJointLaw random_joint_law(std::uint64_t seed, int n_strata);

// Central finite-difference gradient of f at x.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double step = 1e-6);

}  // namespace oracles
