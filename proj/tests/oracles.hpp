#pragma once

// Reference implementations used only by the tests. Nothing here calls into the library, so a
// bug in the library cannot hide behind the same bug in its oracle.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

inline double phibar(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }
inline double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

/// P{sup_{t<=T} (mu t + W_t) >= a} by the reflection principle.
inline double crossing(double a, double mu, double T) {
  if (a <= 0.0) return 1.0;
  const double s = std::sqrt(T);
  return phibar((a - mu * T) / s) + std::exp(2.0 * mu * a) * phibar((a + mu * T) / s);
}

/// Piecewise rate, written from the three branches directly.
inline double rate_I(double lambda, double sigma, double d, double gamma) {
  const double s2 = sigma * sigma;
  if (gamma <= lambda + 0.5 * s2 * d) return 0.0;
  if (gamma <= lambda + s2 * d) return (gamma - lambda) * d - 0.5 * s2 * d * d;
  return (gamma - lambda) * (gamma - lambda) / (2.0 * s2);
}

/// max(0, sup_{q >= d} (gamma - lambda) q - sigma^2 q^2 / 2) by a dense grid plus a local
/// parabolic refinement (independent of the closed form).
inline double rate_I_grid(double lambda, double sigma, double d, double gamma) {
  const auto g = [&](double q) { return (gamma - lambda) * q - 0.5 * sigma * sigma * q * q; };
  const double hi = std::max(4.0 * d, 4.0 * std::abs(gamma - lambda) / (sigma * sigma) + d + 1.0);
  const int n = 200000;
  double best = g(d);
  double best_q = d;
  for (int i = 1; i <= n; ++i) {
    const double q = d + (hi - d) * i / n;
    if (g(q) > best) {
      best = g(q);
      best_q = q;
    }
  }
  // Parabola through three neighbours recovers the vertex exactly for a quadratic.
  const double h = (hi - d) / n;
  if (best_q > d + h / 2 && best_q < hi - h / 2) {
    const double y0 = g(best_q - h), y1 = g(best_q), y2 = g(best_q + h);
    const double denom = y0 - 2.0 * y1 + y2;
    if (denom < 0.0) {
      const double qv = best_q + 0.5 * h * (y0 - y2) / denom;
      best = std::max(best, g(qv));
    }
  }
  return std::max(0.0, best);
}

/// Plain bisection on a sign change.
inline double bisect(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  double flo = f(lo);
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm <= 0.0) == (flo <= 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Root of I(gamma) = gamma delta above lambda + sigma^2 d / 2.
inline double gamma0_root(double lambda, double sigma, double d, double delta) {
  const auto f = [&](double g) { return rate_I(lambda, sigma, d, g) - g * delta; };
  const double lo = lambda + 0.5 * sigma * sigma * d;
  double hi = lo + 1.0;
  while (f(hi) <= 0.0) hi *= 2.0;
  return bisect(f, lo, hi);
}

/// log C(n, k) p^k (1 - p)^{n - k}.
inline double log_binom_pmf(std::uint64_t k, std::uint64_t n, double p) {
  const double nk = static_cast<double>(n), kk = static_cast<double>(k);
  double lp = std::lgamma(nk + 1) - std::lgamma(kk + 1) - std::lgamma(nk - kk + 1);
  if (k > 0) lp += kk * std::log(p);
  if (k < n) lp += (nk - kk) * std::log1p(-p);
  return lp;
}

/// P{Bin(n, p) <= k} by direct summation.
inline double binom_cdf(std::uint64_t k, std::uint64_t n, double p) {
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return k >= n ? 1.0 : 0.0;
  double s = 0.0;
  for (std::uint64_t j = 0; j <= k; ++j) s += std::exp(log_binom_pmf(j, n, p));
  return std::min(1.0, s);
}

/// Exact two-sided binomial limits from the defining tail equations.
inline std::array<double, 2> clopper_pearson(std::uint64_t k, std::uint64_t n, double level) {
  const double alpha = 1.0 - level;
  double low = 0.0, high = 1.0;
  if (k > 0) {
    // P{Bin >= k} = alpha / 2, i.e. cdf(k - 1) = 1 - alpha / 2; cdf decreases in p.
    low = bisect([&](double p) { return (1.0 - alpha / 2) - binom_cdf(k - 1, n, p); }, 0.0, 1.0, 100);
  }
  if (k < n) {
    high = bisect([&](double p) { return binom_cdf(k, n, p) - alpha / 2; }, 0.0, 1.0, 100);
  }
  return {low, high};
}

/// Feller's series for the density of the range of Brownian motion on [0, 1], summed until
/// terms are negligible (valid and fast for r >= 0.5).
inline double range_density_feller(double r) {
  double s = 0.0;
  for (int j = 1; j < 400; ++j) {
    const double t = (j % 2 ? 1.0 : -1.0) * j * j * phi(j * r);
    s += t;
    if (std::abs(t) < 1e-300) break;
  }
  return 8.0 * s;
}

/// Composite Simpson on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Brute force over piecewise-linear paths on an n-point grid: the cheapest path rises with
/// constant slope on one grid interval [s, t] and is flat elsewhere.
inline double schilder_bruteforce(double k, double A, double b_tilde, int n) {
  const double c = k / A;
  double best = INFINITY;
  for (int len = 1; len <= n; ++len) {
    const double l = static_cast<double>(len) / n;
    const double slope = c / l + b_tilde;
    best = std::min(best, 0.5 * slope * slope * l);
  }
  return best;
}

/// Philox4x32-10 known answers from the Random123 distribution (kat_vectors).
struct PhiloxKat {
  std::array<std::uint32_t, 4> ctr;
  std::array<std::uint32_t, 2> key;
  std::array<std::uint32_t, 4> out;
};

inline const std::array<PhiloxKat, 3>& philox_kat() {
  static const std::array<PhiloxKat, 3> v{{
      {{0, 0, 0, 0}, {0, 0}, {0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}},
      {{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
       {0xffffffff, 0xffffffff},
       {0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}},
      {{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
       {0xa4093822, 0x299f31d0},
       {0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}},
  }};
  return v;
}

}  // namespace oracle
