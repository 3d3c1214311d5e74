#pragma once

#include <functional>

namespace flowchain::numerics {

using ScalarFn = std::function<double(double)>;

struct ScalarMinimum {
  double x = 0.0;
  double value = 0.0;
  int iterations = 0;
};

/// Golden-section search for the minimum of a unimodal function on [lo, hi].
/// Stops once the bracket is narrower than x_tol * max(1, |lo| + |hi|).
ScalarMinimum golden_section_minimize(const ScalarFn& f, double lo, double hi,
                                      double x_tol = 1e-12, int max_iter = 400);

/// Bisection for a sign change of f on [lo, hi]. Throws if f(lo), f(hi) share a sign.
double bisect_root(const ScalarFn& f, double lo, double hi, double rel_tol = 1e-15,
                   int max_iter = 400);

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  // estimated absolute error
  bool converged = true;
};

/// Adaptive Simpson quadrature with Richardson correction.
QuadratureResult adaptive_simpson(const ScalarFn& f, double a, double b, double abs_tol,
                                  int max_depth = 48);

double norm_pdf(double x);
double norm_cdf(double x);
/// Upper tail 1 - Phi(x), accurate far into the tail.
double norm_sf(double x);
/// log(1 - Phi(x)); stays finite where norm_sf underflows.
double log_norm_sf(double x);

/// log(exp(a) + exp(b)) without overflow.
double log_add_exp(double a, double b);

}  // namespace flowchain::numerics
