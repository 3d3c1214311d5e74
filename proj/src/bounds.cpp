#include "flowchain/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/trigamma.hpp>

namespace flowchain::bounds {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLn2 = std::numbers::ln2;
constexpr double kBaselC = 6.0 / (std::numbers::pi * std::numbers::pi);

// log(1 - 2^x) for x < 0, accurate when x is close to zero.
double log1m_pow2(double x) { return std::log(-std::expm1(x * kLn2)); }

double capped_probability(double raw) { return std::isnan(raw) ? 1.0 : std::min(raw, 1.0); }

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || std::isnan(v)) {
    throw std::invalid_argument(std::string(what) + " must be > 0");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Kolmogorov
// ---------------------------------------------------------------------------

void KolmogorovParams::validate() const {
  require_positive(a, "KolmogorovParams.a");
  require_positive(b, "KolmogorovParams.b");
  require_positive(c, "KolmogorovParams.c");
  if (dim < 1) throw std::invalid_argument("KolmogorovParams.dim must be >= 1");
  if (!(kappa > 0.0 && kappa < b / a)) {
    throw std::invalid_argument("KolmogorovParams.kappa must lie in (0, b/a); the bound diverges otherwise");
  }
}

KolmogorovBounds kolmogorov_bounds(const KolmogorovParams& p, double u) {
  p.validate();
  require_positive(u, "kolmogorov_bounds: u");
  const double d = static_cast<double>(p.dim);
  const double x = p.a * p.kappa - p.b;
  KolmogorovBounds out;
  out.s_moment_bound = p.c * d * std::exp2(x) / -std::expm1(x * kLn2);
  out.modulus_coeff = 2.0 * d / -std::expm1(-p.kappa * kLn2);
  out.tail_bound = std::pow(out.modulus_coeff, p.a) * out.s_moment_bound * std::pow(u, -p.a);
  out.capped = capped_probability(out.tail_bound);
  return out;
}

// ---------------------------------------------------------------------------
// Basic chaining
// ---------------------------------------------------------------------------

double ChainNetSpec::cardinality(std::size_t j) const { return std::exp(log_cardinalities.at(j)); }

void ChainNetSpec::validate() const {
  const std::size_t n = log_deltas.size();
  if (n == 0) throw std::invalid_argument("ChainNetSpec: no levels");
  if (deltas.size() != n || epsilons.size() != n || log_cardinalities.size() != n) {
    throw std::invalid_argument("ChainNetSpec: level sequences differ in length");
  }
  if (log_cardinalities[0] != 0.0) {
    throw std::invalid_argument("ChainNetSpec: Theta_0 must be a singleton");
  }
  double eps_sum = epsilon_tail;
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(log_deltas[j])) throw std::invalid_argument("ChainNetSpec: delta must be > 0");
    if (!(epsilons[j] > 0.0)) throw std::invalid_argument("ChainNetSpec: epsilon must be > 0");
    if (!(log_cardinalities[j] >= 0.0)) {
      throw std::invalid_argument("ChainNetSpec: cardinalities must be >= 1");
    }
    eps_sum += epsilons[j];
  }
  if (eps_sum > 1.0 + 1e-12) throw std::invalid_argument("ChainNetSpec: epsilons sum above 1");
}

ChainingBound basic_chaining_bound(const ChainNetSpec& net, const PairwiseTail& pairwise_tail,
                                   double u, const ChainingOptions& options) {
  net.validate();
  require_positive(u, "basic_chaining_bound: u");
  ChainingBound out;
  double partial = 0.0;
  double prev = -1.0;
  for (std::size_t j = 0; j < net.levels(); ++j) {
    const double tail = pairwise_tail(net.deltas[j], 0.5 * net.epsilons[j] * u);
    if (!(tail >= 0.0)) throw std::domain_error("basic_chaining_bound: pairwise tail is negative or NaN");
    const double term = tail > 0.0 ? std::exp(net.log_cardinalities[j] + std::log(tail)) : 0.0;
    partial += term;
    out.terms_used = j + 1;
    if (!(partial <= options.overflow_guard)) {
      out.raw = kInf;
      out.capped = 1.0;
      out.converged = false;
      return out;
    }
    if (prev >= 0.0 && term <= prev) {
      // Past the peak the summand ratios of geometric-polynomial series decrease, so the
      // geometric continuation with the current ratio dominates the remaining terms.
      const double r = prev > 0.0 ? term / prev : 0.0;
      const double rest = r < 1.0 ? term * r / (1.0 - r) : kInf;
      if (rest <= options.relative_cutoff * partial) {
        out.tail_estimate = rest;
        out.raw = partial + rest;
        out.capped = capped_probability(out.raw);
        return out;
      }
    }
    prev = term;
  }
  // A net without epsilon_tail is complete: its last level is the whole set.
  if (net.epsilon_tail == 0.0) {
    out.raw = partial;
    out.capped = capped_probability(out.raw);
    return out;
  }
  // Levels of a truncated infinite chain exhausted before the cutoff was met.
  out.raw = kInf;
  out.capped = 1.0;
  out.converged = false;
  return out;
}

ChainNetSpec default_net_spec(double gamma, double horizon, const HParams& hp, std::size_t j_max) {
  hp.validate();
  require_positive(gamma, "default_net_spec: gamma");
  require_positive(horizon, "default_net_spec: T");
  const double d = static_cast<double>(hp.dim);
  ChainNetSpec net;
  const std::size_t n = j_max + 1;
  net.log_deltas.resize(n);
  net.deltas.resize(n);
  net.epsilons.resize(n);
  net.log_cardinalities.resize(n);
  const double log_delta0 = -gamma * horizon + 0.5 * std::log(d) - kLn2;
  for (std::size_t j = 0; j < n; ++j) {
    const double jj = static_cast<double>(j);
    net.log_deltas[j] = log_delta0 - jj * kLn2;
    net.deltas[j] = std::exp(net.log_deltas[j]);
    net.epsilons[j] = kBaselC / ((jj + 1.0) * (jj + 1.0));
    net.log_cardinalities[j] = jj * d * kLn2;
  }
  // sum_{j > j_max} 1/(j+1)^2 = psi_1(j_max + 2)
  net.epsilon_tail = kBaselC * boost::math::trigamma(static_cast<double>(j_max) + 2.0);
  return net;
}

PairwiseTail chebyshev_pairwise_tail(const HParams& hp, double horizon, double q) {
  hp.validate();
  require_positive(horizon, "chebyshev_pairwise_tail: T");
  if (!(q >= 1.0)) throw std::invalid_argument("chebyshev_pairwise_tail: q must be >= 1");
  const double log_growth = std::log(hp.cbar) + (hp.lambda + 0.5 * q * hp.sigma * hp.sigma) * horizon;
  return [log_growth, q](double delta, double threshold) {
    if (delta <= 0.0) return 0.0;
    return std::exp(q * (std::log(delta) + log_growth - std::log(threshold)));
  };
}

// ---------------------------------------------------------------------------
// Entropy integral and LT chaining
// ---------------------------------------------------------------------------

void EntropySpec::validate() const {
  require_positive(diameter, "EntropySpec.diameter");
  if (!covering_fn) throw std::invalid_argument("EntropySpec: covering_fn missing");
  if (!(young_exponent > 1.0)) throw std::invalid_argument("EntropySpec: young_exponent must be > 1");
  if (!(c_psi > 0.0)) throw std::invalid_argument("EntropySpec: c_psi must be > 0");
  if (covering_fn(diameter) != 1.0) {
    throw std::invalid_argument("EntropySpec: covering_fn(D) must be 1");
  }
  double prev = covering_fn(diameter);
  for (int k = 1; k <= 64; ++k) {
    const double n = covering_fn(diameter * std::exp(-0.25 * k));
    if (n < prev) throw std::invalid_argument("EntropySpec: covering_fn must be nonincreasing");
    prev = n;
  }
}

numerics::QuadratureResult entropy_integral_J(const EntropySpec& spec, double rel_tol) {
  spec.validate();
  const double D = spec.diameter;
  const double inv_q = 1.0 / spec.young_exponent;
  // eps = D e^{-s}: covering numbers of self-similar sets depend on s only, so the
  // quadrature nodes are scale free.
  const numerics::ScalarFn integrand = [&](double s) {
    const double n = spec.covering_fn(D * std::exp(-s));
    return std::pow(n, inv_q) * D * std::exp(-s);
  };
  numerics::QuadratureResult out;
  double prev_seg = 0.0;
  double last_ratio = 1.0;
  int growing = 0;
  constexpr int kMaxSegments = 700;
  for (int k = 0; k < kMaxSegments; ++k) {
    const double seg_tol = std::max(rel_tol * 1e-2 * std::max(out.value, D * 1e-3), 1e-300);
    const auto seg = numerics::adaptive_simpson(integrand, k, k + 1.0, seg_tol, 40);
    out.value += seg.value;
    out.error += seg.error;
    out.converged = out.converged && seg.converged;
    if (!std::isfinite(out.value)) {
      return {kInf, kInf, false};
    }
    if (k > 0) {
      const double r = seg.value / prev_seg;
      last_ratio = r;
      growing = r >= 1.0 ? growing + 1 : 0;
      if (growing >= 10) return {kInf, kInf, false};
      if (r < 1.0) {
        const double rest = seg.value * r / (1.0 - r);
        if (rest <= rel_tol * 1e-2 * out.value) {
          out.value += rest;
          out.error += 0.5 * rest;
          return out;
        }
      }
    }
    prev_seg = seg.value;
  }
  // Slowly converging integrand: finish with a geometric continuation at the last ratio.
  if (!(last_ratio < 1.0)) return {kInf, kInf, false};
  const double rest = prev_seg * last_ratio / (1.0 - last_ratio);
  out.value += rest;
  out.error += 0.5 * rest;
  out.converged = out.error <= rel_tol * out.value;
  return out;
}

double cube_covering_number(double side, int dim, double eps) {
  require_positive(side, "cube_covering_number: side");
  require_positive(eps, "cube_covering_number: eps");
  const double per_axis = std::ceil(side * std::sqrt(static_cast<double>(dim)) / (2.0 * eps));
  return std::pow(std::max(per_axis, 1.0), dim);
}

EntropySpec cube_entropy_spec(double side, int dim, double q) {
  EntropySpec spec;
  spec.diameter = side * std::sqrt(static_cast<double>(dim));
  spec.covering_fn = [side, dim](double eps) { return cube_covering_number(side, dim, eps); };
  spec.young_exponent = q;
  spec.c_psi = 1.0;
  return spec;
}

namespace {

// S(p) = sum_{k>=2} k^{p-1}/(k-1) for p = d/q < 1. The staircase N(eps) = k^d on
// (a/k, a/(k-1)] gives J = a (1 + S(p)) with a = L sqrt(d)/2.
double cube_staircase_sum(double p) {
  constexpr int kDirect = 4000;
  double s = 0.0;
  for (int k = kDirect - 1; k >= 2; --k) {
    s += std::pow(static_cast<double>(k), p - 1.0) / (k - 1.0);
  }
  // Euler-Maclaurin tail from K = kDirect with f = sum_{n>=1} k^{p-1-n}.
  const double K = kDirect;
  double integral = 0.0;
  for (int n = 1; n < 60; ++n) {
    const double t = std::pow(K, p - n) / (n - p);
    integral += t;
    if (t < 1e-18 * integral) break;
  }
  const double fK = std::pow(K, p - 1.0) / (K - 1.0);
  const double dfK = (p - 1.0) * std::pow(K, p - 2.0) / (K - 1.0) -
                     std::pow(K, p - 1.0) / ((K - 1.0) * (K - 1.0));
  return s + integral + 0.5 * fK - dfK / 12.0;
}

double log_cube_entropy_integral(double log_side, int dim, double q) {
  const double p = static_cast<double>(dim) / q;
  if (!(p < 1.0)) return kInf;
  return log_side + 0.5 * std::log(static_cast<double>(dim)) - kLn2 +
         std::log1p(cube_staircase_sum(p));
}

}  // namespace

double cube_entropy_integral(double side, int dim, double q) {
  require_positive(side, "cube_entropy_integral: side");
  if (dim < 1) throw std::invalid_argument("cube_entropy_integral: dim must be >= 1");
  return std::exp(log_cube_entropy_integral(std::log(side), dim, q));
}

TailBound lt_tail_bound(const EntropySpec& spec, double c, double u) {
  require_positive(c, "lt_tail_bound: c");
  require_positive(u, "lt_tail_bound: u");
  const auto J = entropy_integral_J(spec);
  TailBound out;
  if (!std::isfinite(J.value)) {
    out.raw = kInf;
    out.capped = 1.0;
    return out;
  }
  out.raw = std::pow(8.0 * c * spec.c_psi * J.value / u, spec.young_exponent);
  out.capped = capped_probability(out.raw);
  return out;
}

double orlicz_power_norm(double q, double qth_moment) {
  if (!(q >= 1.0)) throw std::invalid_argument("orlicz_power_norm: q must be >= 1");
  if (!(qth_moment >= 0.0)) throw std::invalid_argument("orlicz_power_norm: moment must be >= 0");
  return std::pow(qth_moment, 1.0 / q);
}

// ---------------------------------------------------------------------------
// GRR
// ---------------------------------------------------------------------------

Gauge power_gauge(double alpha) {
  require_positive(alpha, "power_gauge: alpha");
  return {[alpha](double s) { return std::pow(s, alpha); },
          [alpha](double s) { return alpha * std::pow(s, alpha - 1.0); }};
}

void GrrInstance::validate(std::size_t sample_triples) const {
  const std::size_t n = weights.size();
  if (n == 0) throw std::invalid_argument("GrrInstance: empty grid");
  if (!metric || !field_distance) throw std::invalid_argument("GrrInstance: metric or field missing");
  if (!gauge.p) throw std::invalid_argument("GrrInstance: gauge missing");
  if (!(young_exponent >= 1.0)) throw std::invalid_argument("GrrInstance: young_exponent must be >= 1");
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("GrrInstance: measure weights must be > 0");
  }
  if (gauge.p(0.0) != 0.0) throw std::invalid_argument("GrrInstance: gauge must satisfy p(0) = 0");

  std::mt19937_64 pick(0x6a09e667f3bcc908ULL);
  std::uniform_int_distribution<std::size_t> idx(0, n - 1);
  std::vector<double> distances;
  for (std::size_t t = 0; t < sample_triples; ++t) {
    const std::size_t i = idx(pick), j = idx(pick), k = idx(pick);
    const double dij = metric(i, j), dji = metric(j, i);
    const double dik = metric(i, k), dkj = metric(k, j);
    const double scale = 1e-9 * std::max({1.0, dij, dik, dkj});
    if (std::abs(dij - dji) > scale) throw std::invalid_argument("GrrInstance: metric not symmetric");
    if (dij > dik + dkj + scale) throw std::invalid_argument("GrrInstance: triangle inequality fails");
    if (dij < 0.0 || (i == j && dij != 0.0)) throw std::invalid_argument("GrrInstance: bad metric value");
    distances.push_back(dij);
  }
  std::sort(distances.begin(), distances.end());
  distances.erase(std::unique(distances.begin(), distances.end()), distances.end());
  double prev = gauge.p(0.0);
  for (double s : distances) {
    if (s == 0.0) continue;
    const double ps = gauge.p(s);
    if (!(ps > prev)) throw std::invalid_argument("GrrInstance: gauge must be strictly increasing");
    prev = ps;
  }
}

GrrInstance grr_on_line(std::vector<double> points, std::vector<double> values,
                        std::vector<double> weights, Gauge gauge, double q) {
  if (points.size() != values.size() || points.size() != weights.size()) {
    throw std::invalid_argument("grr_on_line: points, values and weights differ in length");
  }
  GrrInstance g;
  g.weights = std::move(weights);
  g.metric = [pts = std::move(points)](std::size_t i, std::size_t j) {
    return std::abs(pts[i] - pts[j]);
  };
  g.field_distance = [vals = std::move(values)](std::size_t i, std::size_t j) {
    return std::abs(vals[i] - vals[j]);
  };
  g.gauge = std::move(gauge);
  g.young_exponent = q;
  return g;
}

GrrFunctional grr_functional(const GrrInstance& g) {
  const std::size_t n = g.size();
  const double q = g.young_exponent;
  double v = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double rho = g.field_distance(i, j);
      if (rho == 0.0) continue;  // 0/0 counts as zero
      const double pd = g.gauge.p(g.metric(i, j));
      if (pd == 0.0) return {kInf, kInf};
      v += g.weights[i] * g.weights[j] * std::pow(rho / pd, q);
    }
    if (!std::isfinite(v)) return {kInf, kInf};
  }
  return {v, std::pow(v, 1.0 / q)};
}

namespace {

// int_0^upper (4 / m(K_{s/2}(z))^2)^{1/q} dp(s) for a user supplied ball measure,
// integrated over dyadic shells towards zero.
double generic_centre_integral(const GrrInstance& g, std::size_t z, double upper) {
  if (!g.gauge.dp) throw std::invalid_argument("GrrInstance: generic ball measure needs dp");
  const double q = g.young_exponent;
  const numerics::ScalarFn integrand = [&](double s) {
    const double m = g.ball_measure(z, 0.5 * s);
    if (!(m > 0.0)) return kInf;
    return std::pow(4.0 / (m * m), 1.0 / q) * g.gauge.dp(s);
  };
  double total = 0.0;
  int small_shells = 0;
  double hi = upper;
  for (int k = 0; k < 200 && small_shells < 4; ++k) {
    const double lo = 0.5 * hi;
    const auto seg = numerics::adaptive_simpson(integrand, lo, hi, 1e-12 * std::max(total, 1e-300), 40);
    if (!std::isfinite(seg.value)) return kInf;
    total += seg.value;
    small_shells = seg.value < 1e-13 * total ? small_shells + 1 : 0;
    hi = lo;
  }
  return total;
}

}  // namespace

GrrModulusTable::GrrModulusTable(const GrrInstance& g, const GrrFunctional& functional)
    : gauge_(g.gauge), metric_(g.metric), functional_(functional), inv_q_(1.0 / g.young_exponent) {
  if (g.ball_measure) throw std::invalid_argument("GrrModulusTable: point-mass measure required");
  const std::size_t n = g.size();
  breaks_.resize(n);
  levels_.resize(n);
  cumulative_.resize(n);
  std::vector<std::pair<double, double>> dist_mass(n);
  for (std::size_t z = 0; z < n; ++z) {
    for (std::size_t k = 0; k < n; ++k) dist_mass[k] = {g.metric(z, k), g.weights[k]};
    std::sort(dist_mass.begin(), dist_mass.end());
    auto& br = breaks_[z];
    auto& lv = levels_[z];
    auto& cu = cumulative_[z];
    double mass = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      mass += dist_mass[k].second;
      if (k + 1 < n && dist_mass[k + 1].first == dist_mass[k].first) continue;
      const double b = 2.0 * dist_mass[k].first;
      if (!br.empty()) cu.push_back(cu.back() + lv.back() * (gauge_.p(b) - gauge_.p(br.back())));
      else cu.push_back(0.0);
      br.push_back(b);
      lv.push_back(std::pow(4.0 / (mass * mass), inv_q_));
    }
  }
}

double GrrModulusTable::centre_integral(std::size_t z, double upper) const {
  const auto& br = breaks_[z];
  // Last break strictly below upper; breaks_[z][0] = 0 always.
  const auto it = std::lower_bound(br.begin(), br.end(), upper);
  const std::size_t k = static_cast<std::size_t>(it - br.begin()) - 1;
  return cumulative_[z][k] + levels_[z][k] * (gauge_.p(upper) - gauge_.p(br[k]));
}

GrrModulus GrrModulusTable::bound(std::size_t x, std::size_t y) const {
  if (x == y) return {0.0, 0.0};
  const double upper = 4.0 * metric_(x, y);
  const double worst = std::max(centre_integral(x, upper), centre_integral(y, upper));
  return {8.0 * std::pow(functional_.V, inv_q_) * worst, 8.0 * functional_.N * worst};
}

GrrModulus grr_modulus_bound(const GrrInstance& g, const GrrFunctional& functional,
                             std::size_t x, std::size_t y) {
  if (x >= g.size() || y >= g.size()) throw std::out_of_range("grr_modulus_bound: point index");
  if (x == y) return {0.0, 0.0};
  if (!g.ball_measure) return GrrModulusTable(g, functional).bound(x, y);
  const double upper = 4.0 * g.metric(x, y);
  const double worst =
      std::max(generic_centre_integral(g, x, upper), generic_centre_integral(g, y, upper));
  if (!std::isfinite(worst)) return {kInf, kInf};
  return {8.0 * std::pow(functional.V, 1.0 / g.young_exponent) * worst, 8.0 * functional.N * worst};
}

// ---------------------------------------------------------------------------
// Small-ball routes
// ---------------------------------------------------------------------------

double route_exponent(const HParams& hp, double gamma, double q) {
  return (hp.lambda - gamma) * q + 0.5 * hp.sigma * hp.sigma * q * q;
}

QBracket q_bracket(const HParams& hp, double gamma) {
  const double d = static_cast<double>(hp.dim);
  return {d * (1.0 + 1e-6),
          std::max(10.0 * d, 4.0 * (gamma - hp.lambda) / (hp.sigma * hp.sigma))};
}

double log_basic_series(double q, int dim) {
  const double d = static_cast<double>(dim);
  if (!(q > d)) return kInf;
  const double m = 2.0 * q;
  const double a = (q - d) * kLn2;
  const double log_c = -q * std::log(kBaselC);
  // Summand peaks near j + 1 = m / a. Far-out peaks are bounded by max + integral, which
  // for a unimodal summand dominates the series.
  if (m / a > 2e5) {
    const double x1 = m / a;  // maximiser of e^{-a(x1-1)} x1^m, x1 = j + 1
    const double log_max = log_c - a * (x1 - 1.0) + m * std::log(x1);
    const double log_int = log_c + a + std::lgamma(m + 1.0) - (m + 1.0) * std::log(a);
    return numerics::log_add_exp(log_max, log_int);
  }
  double log_sum = -kInf;
  for (std::size_t j = 0;; ++j) {
    const double jj = static_cast<double>(j);
    const double log_t = log_c - a * jj + m * std::log(jj + 1.0);
    log_sum = numerics::log_add_exp(log_sum, log_t);
    const double log_r = -a + m * std::log((jj + 2.0) / (jj + 1.0));
    if (log_r < 0.0) {
      // Ratios decrease from here on; geometric continuation bounds the remainder.
      const double log_rest = log_t + log_r - std::log(-std::expm1(log_r));
      if (log_rest < log_sum - 40.0) return numerics::log_add_exp(log_sum, log_rest);
    }
  }
}

double optimal_kolmogorov_kappa(double q, int dim) {
  const double b = q - static_cast<double>(dim);
  if (!(b > 0.0)) throw std::invalid_argument("optimal_kolmogorov_kappa: q must exceed d");
  const double top = b / q;
  const numerics::ScalarFn g = [&](double kappa) {
    return -q * log1m_pow2(-kappa) + (q * kappa - b) * kLn2 - log1m_pow2(q * kappa - b);
  };
  return numerics::golden_section_minimize(g, top * 1e-9, top * (1.0 - 1e-9), 1e-10).x;
}

RouteBound small_ball_tail_bound(Route route, const HParams& hp, double gamma, double horizon,
                                 double u, double q) {
  hp.validate();
  require_positive(gamma, "small_ball_tail_bound: gamma");
  require_positive(horizon, "small_ball_tail_bound: T");
  require_positive(u, "small_ball_tail_bound: u");
  const double d = static_cast<double>(hp.dim);
  if (!(q > d)) throw std::invalid_argument("small_ball_tail_bound: q must exceed d (all routes diverge)");
  const double s2 = hp.sigma * hp.sigma;
  RouteBound out;
  out.route = route;
  out.q = q;
  switch (route) {
    case Route::kolmogorov: {
      const double b = q - d;
      const double kappa = optimal_kolmogorov_kappa(q, hp.dim);
      const double log_c = q * std::log(hp.cbar) + (hp.lambda - gamma + 0.5 * q * s2) * q * horizon;
      const double x = q * kappa - b;
      out.kappa = kappa;
      out.log_raw = q * (std::log(2.0 * d) - log1m_pow2(-kappa)) + log_c + std::log(d) + x * kLn2 -
                    log1m_pow2(x) - q * std::log(u);
      break;
    }
    case Route::basic:
      out.log_raw = q * std::log(hp.cbar) + 0.5 * q * std::log(d) - q * std::log(u) +
                    route_exponent(hp, gamma, q) * horizon + log_basic_series(q, hp.dim);
      break;
    case Route::lt: {
      const double log_c = std::log(hp.cbar) + (hp.lambda + 0.5 * q * s2) * horizon;
      const double log_j = log_cube_entropy_integral(-gamma * horizon, hp.dim, q);
      out.log_raw = q * (std::log(8.0) + log_c + log_j - std::log(u));
      break;
    }
  }
  out.raw = std::exp(out.log_raw);
  out.capped = out.log_raw >= 0.0 ? 1.0 : out.raw;
  return out;
}

RouteBound optimized_small_ball_bound(Route route, const HParams& hp, double gamma,
                                      double horizon, double u) {
  hp.validate();
  const QBracket br = q_bracket(hp, gamma);
  const numerics::ScalarFn f = [&](double log_q) {
    return small_ball_tail_bound(route, hp, gamma, horizon, u, std::exp(log_q)).log_raw;
  };
  const auto best = numerics::golden_section_minimize(f, std::log(br.lo), std::log(br.hi), 1e-10);
  return small_ball_tail_bound(route, hp, gamma, horizon, u, std::exp(best.x));
}

OptimizedExponent optimized_exponent(const HParams& hp, double gamma) {
  hp.validate();
  require_positive(gamma, "optimized_exponent: gamma");
  const double d = static_cast<double>(hp.dim);
  const double hi = q_bracket(hp, gamma).hi;
  const numerics::ScalarFn f = [&](double q) { return route_exponent(hp, gamma, q); };
  const auto best = numerics::golden_section_minimize(f, d, hi, 1e-13);
  OptimizedExponent out;
  out.at_boundary = best.x - d <= 1e-7 * d;
  out.q_star = out.at_boundary ? d : best.x;
  // The constraint is q > d; at the boundary report the limit value.
  out.rate = out.at_boundary ? f(d) : best.value;
  out.capped_rate = std::min(out.rate, 0.0);
  return out;
}

}  // namespace flowchain::bounds
