#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "flowchain/numerics.hpp"
#include "flowchain/params.hpp"

namespace flowchain::bounds {

// ---------------------------------------------------------------------------
// Kolmogorov continuity bound
// ---------------------------------------------------------------------------

/// Moment condition E rho(Z_x, Z_y)^a <= c |x - y|_1^{d + b} on [0,1]^d.
struct KolmogorovParams {
  double a = 1.0;
  double b = 1.0;
  double c = 1.0;
  int dim = 1;
  double kappa = 0.5;  // Hoelder exponent in (0, b/a)

  void validate() const;
};

struct KolmogorovBounds {
  double tail_bound = 0.0;      // P{sup rho >= u} bound, uncapped
  double s_moment_bound = 0.0;  // bound on E S^a
  double modulus_coeff = 0.0;   // 2d / (1 - 2^{-kappa})
  double capped = 0.0;          // min(tail_bound, 1)
};

KolmogorovBounds kolmogorov_bounds(const KolmogorovParams& p, double u);

// ---------------------------------------------------------------------------
// Basic chaining
// ---------------------------------------------------------------------------

/// Nested nets Theta_j with radii delta_j and budget fractions epsilon_j. Radii and
/// cardinalities are kept as logarithms because 2^{jd} and 2^{-j} leave the double range
/// long before the series converges; deltas[j] = exp(log_deltas[j]) may underflow to zero.
struct ChainNetSpec {
  std::vector<double> log_deltas;
  std::vector<double> deltas;
  std::vector<double> epsilons;
  std::vector<double> log_cardinalities;
  double epsilon_tail = 0.0;  // analytic epsilon mass beyond the stored levels; 0 means complete

  std::size_t levels() const { return log_deltas.size(); }
  double cardinality(std::size_t j) const;
  void validate() const;
};

/// (delta, threshold) -> bound on sup_{d(x,y) <= delta} P{rho(Z_x, Z_y) >= threshold}.
using PairwiseTail = std::function<double(double delta, double threshold)>;

struct ChainingOptions {
  double relative_cutoff = 1e-12;
  double overflow_guard = 1e300;
};

struct ChainingBound {
  double raw = 0.0;
  double capped = 0.0;
  std::size_t terms_used = 0;
  double tail_estimate = 0.0;  // added to raw so truncation can only enlarge the bound
  bool converged = true;       // false means raw is +inf
};

ChainingBound basic_chaining_bound(const ChainNetSpec& net, const PairwiseTail& pairwise_tail,
                                   double u, const ChainingOptions& options = {});

/// Dyadic nets of the cube of side exp(-gamma T): delta_j = e^{-gamma T} sqrt(d) 2^{-j-1},
/// |Theta_j| = 2^{jd}, epsilon_j = (6/pi^2)/(j+1)^2.
ChainNetSpec default_net_spec(double gamma, double horizon, const HParams& hp, std::size_t j_max);

/// Chebyshev tail (cbar delta e^{(lambda + q sigma^2/2) T} / threshold)^q implied by (H).
/// Not capped at one, so the chaining sum reproduces the closed-form series exactly.
PairwiseTail chebyshev_pairwise_tail(const HParams& hp, double horizon, double q);

// ---------------------------------------------------------------------------
// Entropy integral and LT chaining (power Young functions only)
// ---------------------------------------------------------------------------

struct EntropySpec {
  double diameter = 1.0;
  std::function<double(double)> covering_fn;  // eps -> N(Theta, d; eps)
  double young_exponent = 2.0;                // q of Psi(x) = x^q
  double c_psi = 1.0;

  void validate() const;
};

/// J = int_0^D N(eps)^{1/q} d eps for an arbitrary covering function. Returns +inf when the
/// integrand grows too fast near zero.
numerics::QuadratureResult entropy_integral_J(const EntropySpec& spec, double rel_tol = 1e-8);

/// ceil(side sqrt(d) / (2 eps))^d: a ball of radius eps contains a cube of side 2 eps / sqrt(d).
double cube_covering_number(double side, int dim, double eps);
EntropySpec cube_entropy_spec(double side, int dim, double q);

/// Exact staircase evaluation of J for the cube covering bound (+inf when q <= d).
double cube_entropy_integral(double side, int dim, double q);

struct TailBound {
  double raw = 0.0;
  double capped = 0.0;
};

TailBound lt_tail_bound(const EntropySpec& spec, double c, double u);

/// For Psi(x) = x^q the Orlicz norm is the L^q norm.
double orlicz_power_norm(double q, double qth_moment);

// ---------------------------------------------------------------------------
// Garsia-Rodemich-Rumsey
// ---------------------------------------------------------------------------

/// Gauge p with its derivative (needed for generic ball measures only).
struct Gauge {
  std::function<double(double)> p;
  std::function<double(double)> dp;
};

Gauge power_gauge(double alpha);

/// A finite metric space carrying point masses, a sampled field, and a power Young function.
struct GrrInstance {
  std::vector<double> weights;
  std::function<double(std::size_t, std::size_t)> metric;          // d(x_i, x_j)
  std::function<double(std::size_t, std::size_t)> field_distance;  // rho(f(x_i), f(x_j))
  Gauge gauge;
  double young_exponent = 2.0;
  /// Optional (z, s) -> m(K_s(z)). When empty, the point masses define the measure and
  /// the modulus integrals are evaluated exactly on the resulting staircase.
  std::function<double(std::size_t, double)> ball_measure;

  std::size_t size() const { return weights.size(); }
  void validate(std::size_t sample_triples = 2000) const;
};

/// Instance on a one-dimensional grid with real field values.
GrrInstance grr_on_line(std::vector<double> points, std::vector<double> values,
                        std::vector<double> weights, Gauge gauge, double q);

struct GrrFunctional {
  double V = 0.0;
  double N = 0.0;
};

GrrFunctional grr_functional(const GrrInstance& g);

struct GrrModulus {
  double bound_v = 0.0;
  double bound_n = 0.0;
};

GrrModulus grr_modulus_bound(const GrrInstance& g, const GrrFunctional& functional,
                             std::size_t x, std::size_t y);

/// Per-centre staircase integrals for the point-mass measure, for evaluating the modulus
/// bound over all pairs at once.
class GrrModulusTable {
 public:
  GrrModulusTable(const GrrInstance& g, const GrrFunctional& functional);
  GrrModulus bound(std::size_t x, std::size_t y) const;

 private:
  double centre_integral(std::size_t z, double upper) const;

  Gauge gauge_;
  std::function<double(std::size_t, std::size_t)> metric_;
  GrrFunctional functional_;
  double inv_q_;
  std::vector<std::vector<double>> breaks_;      // sorted 2 d(z, x_k), unique
  std::vector<std::vector<double>> levels_;      // (4 / m^2)^{1/q} on [breaks_k, breaks_k+1)
  std::vector<std::vector<double>> cumulative_;  // integral up to breaks_k
};

// ---------------------------------------------------------------------------
// Small-ball bounds along the chaining routes
// ---------------------------------------------------------------------------

struct RouteBound {
  Route route = Route::basic;
  double q = 0.0;
  double kappa = 0.0;  // Kolmogorov route only
  double log_raw = 0.0;
  double raw = 0.0;
  double capped = 0.0;
};

/// Finite-T bound on P{sup_{x,y in X_T} sup_{t<=T} rho >= u} for a cube X_T of side e^{-gamma T}
/// at a fixed moment order q > d.
RouteBound small_ball_tail_bound(Route route, const HParams& hp, double gamma, double horizon,
                                 double u, double q);

/// As above with q chosen to minimise the finite-T bound.
RouteBound optimized_small_ball_bound(Route route, const HParams& hp, double gamma,
                                      double horizon, double u);

/// (lambda - gamma) q + sigma^2 q^2 / 2, the T-exponent shared by all routes.
double route_exponent(const HParams& hp, double gamma, double q);

struct QBracket {
  double lo = 0.0;
  double hi = 0.0;
};
QBracket q_bracket(const HParams& hp, double gamma);

struct OptimizedExponent {
  double rate = 0.0;         // inf over q > d of route_exponent
  double capped_rate = 0.0;  // min(rate, 0)
  double q_star = 0.0;
  bool at_boundary = false;  // infimum approached as q -> d
};

OptimizedExponent optimized_exponent(const HParams& hp, double gamma);

/// log sum_j 2^{(d-q) j} epsilon_j^{-q} for the default net.
double log_basic_series(double q, int dim);

/// Kappa minimising the Kolmogorov constant for a = q, b = q - d.
double optimal_kolmogorov_kappa(double q, int dim);

}  // namespace flowchain::bounds
