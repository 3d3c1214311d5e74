#pragma once

#include <string>
#include <vector>

#include "flowchain/params.hpp"

namespace flowchain::rates {

/// I(gamma): exponential decay rate of the small-cube diameter tail. Breakpoint ties
/// evaluate the upper branch.
double small_ball_rate(const HParams& hp, double gamma);

/// I(gamma) for flows of homeomorphisms: d replaced by d - 1. For d = 1 this is
/// (gamma - lambda)^2 / (2 sigma^2) above lambda and zero below.
double small_ball_rate_homeo(const HParams& hp, double gamma);

// ---------------------------------------------------------------------------
// Dispersion constants
// ---------------------------------------------------------------------------

struct DispersionParams {
  double delta = 1.0;   // box dimension of the compact set
  double a_diff = 1.0;  // diffusion bound A
  double b_drift = 0.0; // radial drift bound B
  HParams hp;

  void validate() const;
  /// Non-fatal issues, e.g. delta above the ambient dimension.
  std::vector<std::string> warnings() const;
};

/// (sigma^2 d / delta) (d/2 - delta); the branch point of gamma0 and K.
double lambda0(const DispersionParams& dp);

struct Gamma0 {
  double value = 0.0;        // reported gamma0
  double closed_form = 0.0;
  double root = 0.0;         // bisection root of I(gamma) = gamma delta
  bool upper_branch = false; // lambda >= lambda0
  bool fallback = false;     // closed form and root disagreed; value is the root
};

Gamma0 gamma0_detail(const DispersionParams& dp);
double gamma0(const DispersionParams& dp);

/// Root of I(gamma) = gamma delta by bisection, independent of the closed form.
double gamma0_root(const DispersionParams& dp);

/// K from the two-branch closed form.
double growth_constant_K(const DispersionParams& dp);

/// K = B + A sqrt(2 gamma0 delta).
double growth_constant_from_gamma0(const DispersionParams& dp);

struct HomeoGrowth {
  double K = 0.0;
  bool degenerate = false;  // d = 1: effective delta is zero and K = B
};

HomeoGrowth growth_constant_homeo(const DispersionParams& dp);

struct NegativeDriftBound {
  double value = 0.0;
  bool valid = false;  // value <= -B
};

/// gamma0 delta A^2 / (-2B) for B < 0.
NegativeDriftBound negative_drift_growth_bound(const DispersionParams& dp);

// ---------------------------------------------------------------------------
// One-point motion
// ---------------------------------------------------------------------------

/// Asymptotic log-rate of P{sup_{t<=T} |phi_t(x)| >= kT} per unit T.
double one_point_rate(double k, double a_diff, double b_drift);

/// Density of the range max W - min W of standard Brownian motion on [0, 1].
/// Terms are dropped once their magnitude falls below tol.
double bm_range_density(double r, double tol = 1e-17);

struct RangeTail {
  double numeric_tail = 0.0;        // int_u^inf density, by quadrature
  double series_tail = 0.0;         // 8 sum (-1)^{j-1} j Phibar(ju); NaN at u = 0
  double analytic_dominator = 0.0;  // 4 sum j exp(-j^2 u^2 / 2)
};

RangeTail bm_range_tail(double u);

/// inf of (1/2) int_0^1 f'^2 over paths with f_t - f_s - b_tilde (t - s) >= k / A.
double schilder_infimum(double k, double a_diff, double b_tilde);

// ---------------------------------------------------------------------------
// Differentiable translation invariant flows
// ---------------------------------------------------------------------------

double diff_flow_rate(double xi, double sigma);

/// E exp(-lambda tau_z) for tau_z the first time lambda t + sigma W_t reaches log(z / cbar).
double hitting_laplace(double lambda_lt, const HParams& hp, double z);

struct DiffFlowParams {
  HParams hp;
  double xi = 1.0;
  double z = 10.0;
  double eps = 1e-4;
  double u_hat = 1.0;

  /// Smallest admissible z: eps + cbar (1 - eps)^{-sigma^2 / xi} (cbar when xi = 0).
  double min_z() const;
  void validate() const;
};

struct DiffFlowBound {
  double log_bound = 0.0;
  double per_T = 0.0;  // log_bound / T
  double lambda = 0.0; // Laplace parameter used
  long long steps = 0; // number m of independent z-scale crossings
  bool vacuous = false;
};

DiffFlowBound diff_flow_finite_bound(const DiffFlowParams& p, double horizon);

struct OptimizedDiffFlow {
  DiffFlowBound bound;
  double z = 0.0;
};

/// Minimises the bound over log z in [max(log(cbar e), admissibility), log(cbar) + 40].
OptimizedDiffFlow optimize_diff_flow_z(const HParams& hp, double xi, double eps, double u_hat,
                                       double horizon);

// ---------------------------------------------------------------------------
// Bump field
// ---------------------------------------------------------------------------

/// (xi - gamma) d - (xi - lambda)^2 / (2 sigma^2).
double bump_field_rate(double gamma, double xi, const HParams& hp);

/// min(bump_field_rate, 0): the rate can never be positive.
double bump_field_rate_capped(double gamma, double xi, const HParams& hp);

}  // namespace flowchain::rates
