#include "flowchain/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "flowchain/numerics.hpp"

namespace flowchain::rates {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double piecewise_rate(double lambda, double sigma, double d, double gamma) {
  const double s2 = sigma * sigma;
  if (gamma >= lambda + s2 * d) return (gamma - lambda) * (gamma - lambda) / (2.0 * s2);
  // Clamped: gamma - lambda - s2 d / 2 can round to -1 ulp at the lower breakpoint.
  if (gamma > lambda + 0.5 * s2 * d) return std::max(0.0, d * (gamma - lambda - 0.5 * s2 * d));
  return 0.0;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw std::invalid_argument(std::string(what) + " must be > 0");
}

}  // namespace

double small_ball_rate(const HParams& hp, double gamma) {
  hp.validate();
  if (!(gamma >= 0.0)) throw std::invalid_argument("small_ball_rate: gamma must be >= 0");
  return piecewise_rate(hp.lambda, hp.sigma, hp.dim, gamma);
}

double small_ball_rate_homeo(const HParams& hp, double gamma) {
  hp.validate();
  if (!(gamma >= 0.0)) throw std::invalid_argument("small_ball_rate_homeo: gamma must be >= 0");
  // The d = 0 formula: both lower branches collapse onto gamma <= lambda.
  return piecewise_rate(hp.lambda, hp.sigma, hp.dim - 1, gamma);
}

// ---------------------------------------------------------------------------

void DispersionParams::validate() const {
  hp.validate();
  require_positive(delta, "DispersionParams.delta");
  require_positive(a_diff, "DispersionParams.a_diff");
  if (!std::isfinite(b_drift)) throw std::invalid_argument("DispersionParams.b_drift must be finite");
}

std::vector<std::string> DispersionParams::warnings() const {
  std::vector<std::string> out;
  if (delta > hp.dim) out.push_back("delta exceeds the ambient dimension d");
  return out;
}

double lambda0(const DispersionParams& dp) {
  const double d = dp.hp.dim;
  return dp.hp.sigma * dp.hp.sigma * d / dp.delta * (0.5 * d - dp.delta);
}

double gamma0_root(const DispersionParams& dp) {
  dp.validate();
  const HParams& hp = dp.hp;
  const double s2 = hp.sigma * hp.sigma;
  const double d = hp.dim;
  const auto f = [&](double g) { return piecewise_rate(hp.lambda, hp.sigma, d, g) - g * dp.delta; };
  // f < 0 on (0, lambda + sigma^2 d / 2] and convex beyond, so one sign change.
  const double lo = hp.lambda + 0.5 * s2 * d;
  double hi = lo + hp.lambda + s2 * (d + dp.delta) + 1.0;
  for (int i = 0; i < 200 && f(hi) <= 0.0; ++i) hi = lo + 2.0 * (hi - lo);
  if (f(hi) <= 0.0) throw std::runtime_error("gamma0_root: failed to bracket the root");
  return numerics::bisect_root(f, lo, hi, 1e-16);
}

Gamma0 gamma0_detail(const DispersionParams& dp) {
  dp.validate();
  const HParams& hp = dp.hp;
  const double s2 = hp.sigma * hp.sigma;
  const double d = hp.dim;
  const double D = dp.delta;
  Gamma0 out;
  out.upper_branch = hp.lambda >= lambda0(dp);
  if (out.upper_branch) {
    out.closed_form = hp.lambda + s2 * D + std::sqrt(2.0 * hp.lambda * s2 * D + s2 * s2 * D * D);
  } else {
    if (D >= d) throw std::invalid_argument("gamma0: lower branch needs delta < d");
    out.closed_form = d / (d - D) * (hp.lambda + 0.5 * s2 * d);
  }
  out.root = gamma0_root(dp);
  out.fallback = std::abs(out.closed_form - out.root) > 1e-9 * out.root;
  out.value = out.fallback ? out.root : out.closed_form;
  return out;
}

double gamma0(const DispersionParams& dp) { return gamma0_detail(dp).value; }

double growth_constant_K(const DispersionParams& dp) {
  dp.validate();
  const HParams& hp = dp.hp;
  const double s2 = hp.sigma * hp.sigma;
  const double d = hp.dim;
  const double D = dp.delta;
  if (hp.lambda >= lambda0(dp)) {
    const double inner = hp.lambda + s2 * D + std::sqrt(s2 * s2 * D * D + 2.0 * D * hp.lambda * s2);
    return dp.b_drift + dp.a_diff * std::sqrt(2.0 * D * inner);
  }
  if (D >= d) throw std::invalid_argument("growth_constant_K: lower branch needs delta < d");
  return dp.b_drift + dp.a_diff * std::sqrt(2.0 * D * d / (d - D) * (hp.lambda + 0.5 * s2 * d));
}

double growth_constant_from_gamma0(const DispersionParams& dp) {
  return dp.b_drift + dp.a_diff * std::sqrt(2.0 * gamma0(dp) * dp.delta);
}

HomeoGrowth growth_constant_homeo(const DispersionParams& dp) {
  dp.validate();
  const double effective = std::min(dp.delta, static_cast<double>(dp.hp.dim - 1));
  if (effective <= 0.0) return {dp.b_drift, true};
  DispersionParams reduced = dp;
  reduced.delta = effective;
  return {growth_constant_K(reduced), false};
}

NegativeDriftBound negative_drift_growth_bound(const DispersionParams& dp) {
  dp.validate();
  if (!(dp.b_drift < 0.0)) throw std::invalid_argument("negative_drift_growth_bound: B must be < 0");
  NegativeDriftBound out;
  out.value = gamma0(dp) * dp.delta * dp.a_diff * dp.a_diff / (-2.0 * dp.b_drift);
  out.valid = out.value <= -dp.b_drift;
  return out;
}

// ---------------------------------------------------------------------------

double one_point_rate(double k, double a_diff, double b_drift) {
  require_positive(k, "one_point_rate: k");
  require_positive(a_diff, "one_point_rate: A");
  const double a2 = a_diff * a_diff;
  if (k >= -b_drift) {
    const double excess = std::max(k - b_drift, 0.0);
    return -excess * excess / (2.0 * a2);
  }
  return 2.0 * b_drift * k / a2;
}

double bm_range_density(double r, double tol) {
  if (!(r > 0.0)) return 0.0;
  double sum = 0.0;
  if (r >= 2.0) {
    for (int j = 1; j < 10000; ++j) {
      const double term = static_cast<double>(j) * j * numerics::norm_pdf(j * r);
      sum += (j % 2 == 1) ? term : -term;
      if (term < tol) break;
    }
    return 8.0 * sum;
  }
  // Poisson-summed form: positive terms, rapidly convergent for small r.
  const double r2 = r * r;
  for (int n = 0; n < 10000; ++n) {
    const double c = 0.5 * std::numbers::pi * std::numbers::pi * (2.0 * n + 1.0) * (2.0 * n + 1.0);
    const double term = std::exp(-c / r2) * (2.0 * c / (r2 * r2 * r) - 1.0 / (r2 * r));
    sum += term;
    if (std::abs(term) < tol && n > 0) break;
  }
  return 8.0 * sum;
}

RangeTail bm_range_tail(double u) {
  if (!(u >= 0.0)) throw std::invalid_argument("bm_range_tail: u must be >= 0");
  RangeTail out;
  const numerics::ScalarFn density = [](double r) { return bm_range_density(r); };
  // The density is below 1e-300 beyond r = 40.
  double lo = u;
  while (lo < 40.0) {
    const double hi = std::min(lo + 1.0, 40.0);
    out.numeric_tail += numerics::adaptive_simpson(density, lo, hi, 1e-15).value;
    lo = hi;
  }
  if (u > 0.0) {
    double s = 0.0;
    for (int j = 1; j < 100000; ++j) {
      const double term = j * numerics::norm_sf(j * u);
      s += (j % 2 == 1) ? term : -term;
      if (term < 1e-18) break;
    }
    out.series_tail = 8.0 * s;
    double dom = 0.0;
    for (int j = 1; j < 100000; ++j) {
      const double term = j * std::exp(-0.5 * j * j * u * u);
      dom += term;
      if (term < 1e-18 * dom) break;
    }
    out.analytic_dominator = 4.0 * dom;
  } else {
    out.series_tail = std::numeric_limits<double>::quiet_NaN();
    out.analytic_dominator = kInf;
  }
  return out;
}

double schilder_infimum(double k, double a_diff, double b_tilde) {
  require_positive(k, "schilder_infimum: k");
  require_positive(a_diff, "schilder_infimum: A");
  require_positive(b_tilde, "schilder_infimum: b_tilde");
  const double level = k / a_diff;
  if (b_tilde <= level) return 0.5 * (level + b_tilde) * (level + b_tilde);
  return 2.0 * b_tilde * level;
}

// ---------------------------------------------------------------------------

double diff_flow_rate(double xi, double sigma) {
  require_positive(sigma, "diff_flow_rate: sigma");
  if (!(xi >= 0.0)) throw std::invalid_argument("diff_flow_rate: xi must be >= 0");
  return -xi * xi / (2.0 * sigma * sigma);
}

double hitting_laplace(double lambda_lt, const HParams& hp, double z) {
  hp.validate();
  require_positive(lambda_lt, "hitting_laplace: lambda");
  if (!(z > hp.cbar)) throw std::invalid_argument("hitting_laplace: z must exceed cbar");
  const double s2 = hp.sigma * hp.sigma;
  const double root = std::sqrt(2.0 * lambda_lt * s2 + hp.lambda * hp.lambda);
  return std::exp((hp.lambda - root) * std::log(z / hp.cbar) / s2);
}

double DiffFlowParams::min_z() const {
  if (xi == 0.0) return hp.cbar;
  return eps + hp.cbar * std::exp(-(hp.sigma * hp.sigma / xi) * std::log1p(-eps));
}

void DiffFlowParams::validate() const {
  hp.validate();
  if (!(xi >= 0.0)) throw std::invalid_argument("DiffFlowParams: xi must be >= 0");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("DiffFlowParams: eps must lie in (0, 1)");
  require_positive(u_hat, "DiffFlowParams.u_hat");
  if (!(z > hp.cbar) || (xi > 0.0 && !(z > min_z()))) {
    throw std::invalid_argument("DiffFlowParams: z is not admissible for (xi, eps)");
  }
}

DiffFlowBound diff_flow_finite_bound(const DiffFlowParams& p, double horizon) {
  p.validate();
  require_positive(horizon, "diff_flow_finite_bound: T");
  const double lam = p.hp.lambda;
  const double total = lam + p.xi;
  if (!(-total * horizon < std::log(p.u_hat))) {
    throw std::invalid_argument("diff_flow_finite_bound: need exp(-(lambda + xi) T) < u_hat");
  }
  const double s2 = p.hp.sigma * p.hp.sigma;
  DiffFlowBound out;
  out.lambda = (total * total - lam * lam) / (2.0 * s2);
  out.steps = static_cast<long long>(
      std::floor((total * horizon + std::log(p.u_hat)) / std::log(p.z)));
  const double per_step =
      std::log(std::exp(-(p.xi / s2) * std::log((p.z - p.eps) / p.hp.cbar)) + p.eps);
  out.log_bound = out.lambda * horizon + static_cast<double>(out.steps) * per_step;
  out.per_T = out.log_bound / horizon;
  out.vacuous = out.log_bound >= 0.0;
  return out;
}

OptimizedDiffFlow optimize_diff_flow_z(const HParams& hp, double xi, double eps, double u_hat,
                                       double horizon) {
  DiffFlowParams p{hp, xi, 0.0, eps, u_hat};
  const double admissible = std::log(p.min_z()) + 1e-12;
  const double lo = std::max(std::log(hp.cbar) + 1.0, admissible);
  const double hi = std::log(hp.cbar) + 40.0;
  if (!(lo < hi)) throw std::invalid_argument("optimize_diff_flow_z: empty z range");
  const auto eval = [&](double log_z) {
    p.z = std::exp(log_z);
    return diff_flow_finite_bound(p, horizon).log_bound;
  };
  // The floor in the crossing count makes the objective a staircase; scan, then refine.
  constexpr int kScan = 400;
  double best_x = lo;
  double best_v = eval(lo);
  for (int i = 1; i <= kScan; ++i) {
    const double x = lo + (hi - lo) * i / kScan;
    const double v = eval(x);
    if (v < best_v) {
      best_v = v;
      best_x = x;
    }
  }
  const double step = (hi - lo) / kScan;
  const auto refined = numerics::golden_section_minimize(
      eval, std::max(lo, best_x - step), std::min(hi, best_x + step), 1e-12);
  if (refined.value < best_v) best_x = refined.x;
  p.z = std::exp(best_x);
  return {diff_flow_finite_bound(p, horizon), p.z};
}

// ---------------------------------------------------------------------------

double bump_field_rate(double gamma, double xi, const HParams& hp) {
  hp.validate();
  if (!(gamma > hp.lambda)) throw std::invalid_argument("bump_field_rate: gamma must exceed lambda");
  if (!(xi > gamma)) throw std::invalid_argument("bump_field_rate: xi must exceed gamma");
  const double d = hp.dim;
  return (xi - gamma) * d - (xi - hp.lambda) * (xi - hp.lambda) / (2.0 * hp.sigma * hp.sigma);
}

double bump_field_rate_capped(double gamma, double xi, const HParams& hp) {
  return std::min(bump_field_rate(gamma, xi, hp), 0.0);
}

}  // namespace flowchain::rates
