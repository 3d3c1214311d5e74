#include "flowchain/numerics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace flowchain::numerics {

ScalarMinimum golden_section_minimize(const ScalarFn& f, double lo, double hi, double x_tol,
                                      int max_iter) {
  if (!(lo <= hi)) {
    throw std::invalid_argument("golden_section_minimize: empty bracket");
  }
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  int it = 0;
  while (it < max_iter && (b - a) > x_tol * std::max(1.0, std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    ++it;
  }
  ScalarMinimum best{c, fc, it};
  if (fd < best.value) best = {d, fd, it};
  // The bracket ends are candidates too; boundary minima are common for clamped problems.
  const double flo = f(lo);
  if (flo < best.value) best = {lo, flo, it};
  const double fhi = f(hi);
  if (fhi < best.value) best = {hi, fhi, it};
  return best;
}

double bisect_root(const ScalarFn& f, double lo, double hi, double rel_tol, int max_iter) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo < 0.0) == (fhi < 0.0)) {
    throw std::invalid_argument("bisect_root: no sign change on bracket");
  }
  for (int i = 0; i < max_iter; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
    if (hi - lo <= rel_tol * std::max(std::abs(lo), std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

namespace {

struct SimpsonState {
  const ScalarFn& f;
  bool converged = true;
  double error = 0.0;
};

double simpson_recurse(SimpsonState& s, double a, double fa, double b, double fb, double m,
                       double fm, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = s.f(lm);
  const double frm = s.f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0) {
    s.converged = false;
    s.error += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  if (std::abs(delta) <= 15.0 * tol) {
    s.error += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  return simpson_recurse(s, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_recurse(s, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

QuadratureResult adaptive_simpson(const ScalarFn& f, double a, double b, double abs_tol,
                                  int max_depth) {
  if (a == b) return {0.0, 0.0, true};
  SimpsonState s{f};
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double v = simpson_recurse(s, a, fa, b, fb, m, fm, whole, abs_tol, max_depth);
  return {v, s.error, s.converged};
}

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double norm_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double log_norm_sf(double x) {
  if (x < 25.0) return std::log(norm_sf(x));
  // Asymptotic expansion of Mills' ratio.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2) +
                        105.0 / (x2 * x2 * x2 * x2);
  return -0.5 * x2 - std::log(x * std::sqrt(2.0 * std::numbers::pi)) + std::log(series);
}

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace flowchain::numerics
