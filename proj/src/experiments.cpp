#include "flowchain/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <thread>

#include "flowchain/stats.hpp"

namespace flowchain::experiments {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw std::invalid_argument(std::string(what) + " must be > 0");
}

}  // namespace

// ---------------------------------------------------------------------------

std::size_t chunk_count(std::uint64_t path_count, std::uint64_t chunk_size) {
  if (chunk_size == 0) throw std::invalid_argument("chunk_count: chunk size must be >= 1");
  return static_cast<std::size_t>((path_count + chunk_size - 1) / chunk_size);
}

void for_each_chunk(std::uint64_t path_count, unsigned workers, std::uint64_t chunk_size,
                    const std::function<void(std::size_t, std::uint64_t, std::uint64_t)>& body) {
  const std::size_t chunks = chunk_count(path_count, chunk_size);
  if (chunks == 0) return;
  const unsigned threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(chunks)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  const auto work = [&]() {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks || failed.load()) return;
      const std::uint64_t begin = c * chunk_size;
      const std::uint64_t end = std::min(path_count, begin + chunk_size);
      try {
        body(c, begin, end);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

unsigned default_workers() {
  if (const char* env = std::getenv("FLOWCHAIN_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 4096) return static_cast<unsigned>(v);
    throw std::invalid_argument("FLOWCHAIN_WORKERS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------

TailEstimate make_tail_estimate(std::uint64_t exceed, std::uint64_t paths, double level) {
  TailEstimate e;
  e.exceed_count = exceed;
  e.path_count = paths;
  e.level = level;
  e.p_hat = static_cast<double>(exceed) / static_cast<double>(paths);
  const auto ci = stats::clopper_pearson(exceed, paths, level);
  e.ci_low = ci.low;
  e.ci_high = ci.high;
  return e;
}

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear:
      return "linear";
    case ModelKind::bump:
      return "bump";
    case ModelKind::sde:
      return "sde";
  }
  return "unknown";
}

ModelKind parse_model(std::string_view name) {
  if (name == "linear") return ModelKind::linear;
  if (name == "bump") return ModelKind::bump;
  if (name == "sde") return ModelKind::sde;
  throw std::invalid_argument("unknown model '" + std::string(name) + "' (expected linear, bump or sde)");
}

void ExperimentSpec::validate() const {
  hp.validate();
  require_positive(gamma, "experiment gamma");
  require_positive(horizon, "experiment T");
  if (!(u >= 0.0)) throw std::invalid_argument("experiment u must be >= 0");
  for (double t : horizons) require_positive(t, "experiment T grid entry");
  if (path_count < 100) throw std::invalid_argument("experiment path_count must be >= 100");
  if (n_steps == 0) throw std::invalid_argument("experiment n_steps must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("experiment level must lie in (0, 1)");
  if (bump_spacing < 0.0) throw std::invalid_argument("experiment bump_spacing must be >= 0");
  if (delta < 0.0) throw std::invalid_argument("experiment delta must be >= 0");
  if (model == ModelKind::sde && hp.dim != 1) {
    throw std::invalid_argument("experiment: sde model is one-dimensional");
  }
}

flows::SdeFlowModel sde_model_by_name(const std::string& name) {
  if (name == "sine") return flows::sine_model();
  if (name == "tanh") return flows::tanh_model();
  throw std::invalid_argument("unknown sde model '" + name + "' (expected sine or tanh)");
}

namespace {

constexpr std::uint64_t kChunk = 4096;

double bump_spacing_for(const ExperimentSpec& spec, double horizon) {
  if (spec.bump_spacing > 0.0) return spec.bump_spacing;
  const double xi = spec.hp.lambda + spec.hp.sigma * spec.hp.sigma * spec.hp.dim;
  return std::exp(-xi * horizon);
}

}  // namespace

std::vector<double> simulate_log_diameters(const ExperimentSpec& spec, double horizon) {
  spec.validate();
  require_positive(horizon, "simulate_log_diameters: T");
  const double side = std::exp(-spec.gamma * horizon);
  std::vector<double> out(spec.path_count);
  switch (spec.model) {
    case ModelKind::linear: {
      const flows::LinearFlowModel model{spec.hp};
      flows::LinearFlowOptions opt;
      opt.sup_mode = spec.sup_mode;
      for_each_chunk(spec.path_count, spec.workers, kChunk,
                     [&](std::size_t, std::uint64_t b, std::uint64_t e) {
                       for (std::uint64_t p = b; p < e; ++p) {
                         const auto s = flows::simulate_linear(model, side, horizon, spec.n_steps, p,
                                                               spec.seed, opt);
                         out[p] = flows::log_linear_sup_diam(s);
                       }
                     });
      break;
    }
    case ModelKind::bump: {
      flows::BumpFieldModel model;
      model.hp = spec.hp;
      model.spacing = bump_spacing_for(spec, horizon);
      for_each_chunk(spec.path_count, spec.workers, kChunk,
                     [&](std::size_t, std::uint64_t b, std::uint64_t e) {
                       for (std::uint64_t p = b; p < e; ++p) {
                         const auto s = flows::simulate_bump_field(model, side, horizon, spec.n_steps,
                                                                   p, spec.seed);
                         out[p] = s.sup_diam > 0.0 ? std::log(s.sup_diam) : -kInf;
                       }
                     });
      break;
    }
    case ModelKind::sde: {
      const auto model = sde_model_by_name(spec.sde_model);
      // In d = 1 the flow is monotone, so the image of [0, L] has diameter |phi(L) - phi(0)|.
      const std::vector<double> x0{0.0, side};
      for_each_chunk(spec.path_count, spec.workers, kChunk,
                     [&](std::size_t, std::uint64_t b, std::uint64_t e) {
                       for (std::uint64_t p = b; p < e; ++p) {
                         const auto ens =
                             flows::simulate_sde_flow(model, x0, horizon, spec.n_steps, p, spec.seed);
                         out[p] = ens.nonfinite ? std::numeric_limits<double>::quiet_NaN()
                                                : std::log(ens.pair_sup_distance(0, 1));
                       }
                     });
      break;
    }
  }
  return out;
}

std::vector<TailEstimate> estimate_tails(const ExperimentSpec& spec, double horizon,
                                         const std::vector<double>& thresholds) {
  const auto log_diam = simulate_log_diameters(spec, horizon);
  std::uint64_t nonfinite = 0;
  for (double v : log_diam) nonfinite += std::isnan(v) ? 1 : 0;
  const std::uint64_t valid = spec.path_count - nonfinite;
  if (valid == 0) throw std::runtime_error("estimate_tail: every simulated path was nonfinite");
  std::vector<TailEstimate> out;
  out.reserve(thresholds.size());
  for (double u : thresholds) {
    if (!(u >= 0.0)) throw std::invalid_argument("estimate_tail: threshold must be >= 0");
    std::uint64_t exceed = 0;
    if (u == 0.0) {
      exceed = valid;
    } else {
      const double log_u = std::log(u);
      for (double v : log_diam) exceed += (!std::isnan(v) && v >= log_u) ? 1 : 0;
    }
    TailEstimate e = make_tail_estimate(exceed, valid, spec.level);
    e.nonfinite = nonfinite;
    e.seed = spec.seed;
    e.threshold = u;
    e.horizon = horizon;
    out.push_back(e);
  }
  return out;
}

TailEstimate estimate_tail(const ExperimentSpec& spec) {
  return estimate_tails(spec, spec.horizon, {spec.u}).front();
}

// ---------------------------------------------------------------------------

RateFit fit_rate_values(const std::vector<double>& horizons, const std::vector<double>& log_p) {
  if (horizons.size() != log_p.size()) throw std::invalid_argument("fit_rate: length mismatch");
  if (horizons.size() < 3) throw std::invalid_argument("fit_rate: at least 3 horizons are required");
  RateFit fit;
  fit.horizons = horizons;
  fit.log_p = log_p;
  const double n = static_cast<double>(horizons.size());
  double mt = 0.0, ml = 0.0;
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    mt += horizons[i];
    ml += log_p[i];
  }
  mt /= n;
  ml /= n;
  double stt = 0.0, stl = 0.0;
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    stt += (horizons[i] - mt) * (horizons[i] - mt);
    stl += (horizons[i] - mt) * (log_p[i] - ml);
  }
  if (stt == 0.0) throw std::invalid_argument("fit_rate: horizons must not all coincide");
  fit.slope = stl / stt;
  fit.intercept = ml - fit.slope * mt;
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    fit.per_T.push_back(log_p[i] / horizons[i]);
    fit.residual_max = std::max(fit.residual_max,
                                std::abs(log_p[i] - fit.intercept - fit.slope * horizons[i]));
  }
  return fit;
}

RateFit fit_rate(const std::vector<TailEstimate>& estimates) {
  std::vector<double> t, lp;
  std::vector<std::string> warnings;
  for (const auto& e : estimates) {
    if (e.exceed_count == 0) {
      warnings.push_back("horizon " + std::to_string(e.horizon) + " dropped: zero exceedances");
      continue;
    }
    t.push_back(e.horizon);
    lp.push_back(std::log(e.p_hat));
  }
  if (t.size() < 3) {
    throw std::runtime_error("fit_rate: fewer than 3 horizons with nonzero exceedances");
  }
  RateFit fit = fit_rate_values(t, lp);
  fit.warnings = std::move(warnings);
  return fit;
}

// ---------------------------------------------------------------------------

DispersionReport dispersion_experiment(const ExperimentSpec& spec, const rates::DispersionParams& dp,
                                       double kappa) {
  spec.validate();
  dp.validate();
  if (spec.model == ModelKind::bump) {
    throw std::invalid_argument("dispersion_experiment: bump fields have no one-point motion");
  }
  const int d = spec.hp.dim;
  const double T = spec.horizon;
  const double gt = spec.gamma * T;
  const double delta = spec.delta > 0.0 ? spec.delta : static_cast<double>(d);
  DispersionReport rep;
  rep.K = rates::growth_constant_K(dp);
  rep.kappa = kappa > 0.0 ? kappa : rep.K;
  const double per_axis_log = gt < 700.0 ? std::log(std::ceil(std::exp(gt))) : gt;
  rep.log_cover_count = d * per_axis_log;
  rep.cover_count = std::exp(rep.log_cover_count);
  rep.epsilon_min = rep.log_cover_count / gt - delta;
  const double side = std::exp(-gt);

  // Centres of the grid cover; at most 16 per axis are simulated.
  const double per_axis = std::exp(per_axis_log);
  const std::size_t axis_centres = per_axis > 16.0 ? 16 : static_cast<std::size_t>(per_axis);
  rep.cover_subsampled = per_axis > 16.0;
  std::vector<double> centres;
  for (std::size_t i = 0; i < axis_centres; ++i) {
    centres.push_back((static_cast<double>(i) + 0.5) / static_cast<double>(axis_centres));
  }
  const double escape = rep.kappa * T - 1.0;

  const std::size_t chunks = chunk_count(spec.path_count, kChunk);
  struct Acc {
    std::vector<std::uint64_t> s1;
    std::uint64_t s2 = 0, above = 0, nonfinite = 0;
    double max_growth = 0.0, sum_growth = 0.0;
  };
  std::vector<Acc> acc(chunks);

  if (spec.model == ModelKind::linear) {
    // |phi_t(x)| = |x| e^{X_t}; the cover centres lie on the diagonal of the unit cube.
    rep.centres_simulated = centres.size();
    const flows::LinearFlowModel model{spec.hp};
    flows::LinearFlowOptions opt;
    opt.sup_mode = spec.sup_mode;
    const double rd = std::sqrt(static_cast<double>(d));
    for_each_chunk(spec.path_count, spec.workers, kChunk, [&](std::size_t c, std::uint64_t b, std::uint64_t e) {
      Acc& a = acc[c];
      a.s1.assign(centres.size(), 0);
      for (std::uint64_t p = b; p < e; ++p) {
        const auto s = flows::simulate_linear(model, side, T, spec.n_steps, p, spec.seed, opt);
        const double g = std::exp(s.log_sup);
        for (std::size_t i = 0; i < centres.size(); ++i) a.s1[i] += (rd * centres[i] * g >= escape) ? 1 : 0;
        a.s2 += s.sup_diam >= 1.0 ? 1 : 0;
        const double growth = rd * g / T;
        a.max_growth = std::max(a.max_growth, growth);
        a.sum_growth += growth;
        a.above += growth > rep.K ? 1 : 0;
      }
    });
  } else {
    if (d != 1) throw std::invalid_argument("dispersion_experiment: sde model is one-dimensional");
    rep.centres_simulated = centres.size();
    const auto model = sde_model_by_name(spec.sde_model);
    // Initial points: cover centres, the small cube [c, c + side] at the middle, and the
    // endpoints 0 and 1 which carry sup_{x in [0,1]} |phi_t(x)| by monotonicity.
    std::vector<double> x0 = centres;
    const std::size_t cube_a = x0.size();
    x0.push_back(0.5);
    x0.push_back(0.5 + side);
    const std::size_t left = x0.size();
    x0.push_back(0.0);
    x0.push_back(1.0);
    flows::SdeOptions opt;
    for_each_chunk(spec.path_count, spec.workers, kChunk, [&](std::size_t c, std::uint64_t b, std::uint64_t e) {
      Acc& a = acc[c];
      a.s1.assign(centres.size(), 0);
      for (std::uint64_t p = b; p < e; ++p) {
        const auto ens = flows::simulate_sde_flow(model, x0, T, spec.n_steps, p, spec.seed, opt);
        if (ens.nonfinite) {
          ++a.nonfinite;
          continue;
        }
        for (std::size_t i = 0; i < centres.size(); ++i) a.s1[i] += ens.sup_norm[i] >= escape ? 1 : 0;
        a.s2 += ens.pair_sup_distance(cube_a, cube_a + 1) >= 1.0 ? 1 : 0;
        const double growth = std::max(ens.sup_norm[left], ens.sup_norm[left + 1]) / T;
        a.max_growth = std::max(a.max_growth, growth);
        a.sum_growth += growth;
        a.above += growth > rep.K ? 1 : 0;
      }
    });
  }

  std::vector<std::uint64_t> s1(centres.size(), 0);
  std::uint64_t s2 = 0;
  double sum_growth = 0.0;
  for (const Acc& a : acc) {
    for (std::size_t i = 0; i < s1.size(); ++i) s1[i] += a.s1[i];
    s2 += a.s2;
    rep.paths_above_K += a.above;
    rep.nonfinite += a.nonfinite;
    rep.max_growth = std::max(rep.max_growth, a.max_growth);
    sum_growth += a.sum_growth;
  }
  const std::uint64_t valid = spec.path_count - rep.nonfinite;
  if (valid == 0) throw std::runtime_error("dispersion_experiment: every simulated path was nonfinite");
  rep.path_count = valid;
  rep.mean_growth = sum_growth / static_cast<double>(valid);
  const std::uint64_t worst = s1.empty() ? 0 : *std::max_element(s1.begin(), s1.end());
  rep.s1_single = make_tail_estimate(worst, valid, spec.level);
  rep.s1_single.threshold = escape;
  rep.s1_single.horizon = T;
  rep.s1_single.seed = spec.seed;
  rep.s2_single = make_tail_estimate(s2, valid, spec.level);
  rep.s2_single.threshold = 1.0;
  rep.s2_single.horizon = T;
  rep.s2_single.seed = spec.seed;
  rep.s1_bound = rep.cover_count * rep.s1_single.ci_high;
  rep.s2_bound = rep.cover_count * rep.s2_single.ci_high;
  return rep;
}

// ---------------------------------------------------------------------------

std::string_view audit_field_name(AuditField f) {
  switch (f) {
    case AuditField::brownian:
      return "brownian";
    case AuditField::linear:
      return "linear";
    case AuditField::constant:
      return "constant";
  }
  return "unknown";
}

AuditField parse_audit_field(std::string_view name) {
  if (name == "brownian") return AuditField::brownian;
  if (name == "linear") return AuditField::linear;
  if (name == "constant") return AuditField::constant;
  throw std::invalid_argument("unknown audit field '" + std::string(name) +
                              "' (expected brownian, linear or constant)");
}

GrrAuditReport grr_pathwise_audit(const GrrAuditSpec& spec) {
  if (spec.grid < 2) throw std::invalid_argument("grr_pathwise_audit: grid must have >= 2 points");
  if (!(spec.q >= 1.0)) throw std::invalid_argument("grr_pathwise_audit: q must be >= 1");
  require_positive(spec.alpha, "grr_pathwise_audit: alpha");
  if (spec.path_count == 0) throw std::invalid_argument("grr_pathwise_audit: path_count must be >= 1");
  const std::size_t n = spec.grid;
  std::vector<double> points(n);
  for (std::size_t i = 0; i < n; ++i) points[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  const std::vector<double> weights(n, 1.0 / static_cast<double>(n));

  struct Acc {
    std::uint64_t excluded = 0, pairs = 0, violations = 0;
    double min_ratio = kInf, max_ratio = 0.0, max_V = 0.0;
    std::vector<double> ratios;
  };
  std::vector<Acc> acc(static_cast<std::size_t>(spec.path_count));
  const double h = 1.0 / static_cast<double>(n - 1);
  for_each_chunk(spec.path_count, spec.workers, 1, [&](std::size_t c, std::uint64_t b, std::uint64_t) {
    Acc& a = acc[c];
    std::vector<double> values(n, 0.0);
    switch (spec.field) {
      case AuditField::brownian: {
        RandomStream stream(spec.seed, b);
        const double sd = std::sqrt(h);
        for (std::size_t i = 1; i < n; ++i) values[i] = values[i - 1] + sd * stream.next_normal();
        break;
      }
      case AuditField::linear:
        for (std::size_t i = 0; i < n; ++i) values[i] = spec.slope * points[i];
        break;
      case AuditField::constant:
        std::fill(values.begin(), values.end(), 1.0);
        break;
    }
    const auto g = bounds::grr_on_line(points, values, weights, bounds::power_gauge(spec.alpha), spec.q);
    const auto fn = bounds::grr_functional(g);
    if (!std::isfinite(fn.V)) {
      ++a.excluded;
      return;
    }
    a.max_V = fn.V;
    const bounds::GrrModulusTable table(g, fn);
    a.ratios.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double inc = std::abs(values[i] - values[j]);
        const double bound = table.bound(i, j).bound_v;
        ++a.pairs;
        if (inc > bound * (1.0 + 1e-12)) ++a.violations;
        if (inc > 0.0) {
          const double r = bound / inc;
          a.ratios.push_back(r);
          a.min_ratio = std::min(a.min_ratio, r);
          a.max_ratio = std::max(a.max_ratio, r);
        }
      }
    }
  });
  GrrAuditReport rep;
  rep.paths = spec.path_count;
  std::vector<double> ratios;
  rep.min_ratio = kInf;
  for (auto& a : acc) {
    rep.excluded_infinite += a.excluded;
    rep.pairs_checked += a.pairs;
    rep.violations += a.violations;
    rep.min_ratio = std::min(rep.min_ratio, a.min_ratio);
    rep.max_ratio = std::max(rep.max_ratio, a.max_ratio);
    rep.max_V = std::max(rep.max_V, a.max_V);
    ratios.insert(ratios.end(), a.ratios.begin(), a.ratios.end());
  }
  if (ratios.empty()) {
    rep.min_ratio = 0.0;
  } else {
    auto mid = ratios.begin() + static_cast<std::ptrdiff_t>(ratios.size() / 2);
    std::nth_element(ratios.begin(), mid, ratios.end());
    rep.median_ratio = *mid;
  }
  return rep;
}

// ---------------------------------------------------------------------------

std::vector<PointPair> axis_pairs(int dim, std::size_t anchors, double span,
                                  const std::vector<double>& radii) {
  if (dim < 1) throw std::invalid_argument("axis_pairs: dimension must be >= 1");
  if (anchors == 0) throw std::invalid_argument("axis_pairs: anchors must be >= 1");
  require_positive(span, "axis_pairs: span");
  std::vector<PointPair> out;
  for (std::size_t j = 0; j < anchors; ++j) {
    for (double r : radii) {
      require_positive(r, "axis_pairs: radius");
      PointPair pr{std::vector<double>(static_cast<std::size_t>(dim), 0.0),
                   std::vector<double>(static_cast<std::size_t>(dim), 0.0)};
      pr.x[0] = span * (static_cast<double>(j) + 0.3) / static_cast<double>(anchors);
      pr.y[0] = pr.x[0] + r;
      out.push_back(std::move(pr));
    }
  }
  return out;
}

MomentCheckReport moment_hypothesis_check(const MomentCheckSpec& spec) {
  spec.hp.validate();
  if (!(spec.q >= 1.0)) throw std::invalid_argument("moment_hypothesis_check: q must be >= 1");
  require_positive(spec.horizon, "moment_hypothesis_check: T");
  if (spec.pairs.empty()) throw std::invalid_argument("moment_hypothesis_check: no pairs");
  if (spec.path_count < 2) throw std::invalid_argument("moment_hypothesis_check: path_count must be >= 2");
  const std::size_t np = spec.pairs.size();
  std::vector<double> dist(np);
  for (std::size_t k = 0; k < np; ++k) {
    const auto& pr = spec.pairs[k];
    if (pr.x.size() != pr.y.size() || pr.x.empty()) {
      throw std::invalid_argument("moment_hypothesis_check: pair dimension mismatch");
    }
    double s = 0.0;
    for (std::size_t c = 0; c < pr.x.size(); ++c) s += (pr.x[c] - pr.y[c]) * (pr.x[c] - pr.y[c]);
    dist[k] = std::sqrt(s);
    if (!(dist[k] > 0.0)) throw std::invalid_argument("moment_hypothesis_check: pair points coincide");
  }

  struct Acc {
    std::vector<double> sum, sum_sq;
    std::uint64_t valid = 0, nonfinite = 0, order = 0, refined = 0;
  };
  const std::size_t chunks = chunk_count(spec.path_count, kChunk);
  std::vector<Acc> acc(chunks);
  const double q = spec.q;

  flows::SdeFlowModel sde;
  std::vector<double> sde_points;
  flows::BumpFieldModel bump;
  if (spec.model == ModelKind::sde) {
    sde = sde_model_by_name(spec.sde_model);
    for (const auto& pr : spec.pairs) {
      if (pr.x.size() != 1) throw std::invalid_argument("moment_hypothesis_check: sde model is one-dimensional");
      sde_points.push_back(pr.x[0]);
      sde_points.push_back(pr.y[0]);
    }
  } else if (spec.model == ModelKind::bump) {
    bump.hp = spec.model_hp;
    bump.spacing = spec.bump_spacing;
    bump.validate();
  } else {
    spec.model_hp.validate();
  }

  for_each_chunk(spec.path_count, spec.workers, kChunk, [&](std::size_t c, std::uint64_t b, std::uint64_t e) {
    Acc& a = acc[c];
    a.sum.assign(np, 0.0);
    a.sum_sq.assign(np, 0.0);
    std::vector<double> s(np);
    for (std::uint64_t p = b; p < e; ++p) {
      switch (spec.model) {
        case ModelKind::linear: {
          RandomStream stream(spec.seed, p);
          const auto path = flows::simulate_log_path(stream, spec.model_hp.lambda, spec.model_hp.sigma,
                                                     spec.horizon, spec.n_steps, flows::SupMode::bridge);
          for (std::size_t k = 0; k < np; ++k) s[k] = dist[k] * std::exp(path.running_max);
          break;
        }
        case ModelKind::bump:
          for (std::size_t k = 0; k < np; ++k) {
            s[k] = flows::bump_pair_sup(bump, spec.pairs[k].x, spec.pairs[k].y, spec.horizon,
                                        spec.n_steps, p, spec.seed);
          }
          break;
        case ModelKind::sde: {
          const auto ens = flows::simulate_sde_flow(sde, sde_points, spec.horizon, spec.n_steps, p, spec.seed);
          if (ens.nonfinite) {
            ++a.nonfinite;
            continue;
          }
          a.order += ens.order_violation ? 1 : 0;
          a.refined += ens.refinements > 0 ? 1 : 0;
          for (std::size_t k = 0; k < np; ++k) s[k] = ens.pair_sup_distance(2 * k, 2 * k + 1);
          break;
        }
      }
      ++a.valid;
      for (std::size_t k = 0; k < np; ++k) {
        const double v = std::pow(s[k], q);
        a.sum[k] += v;
        a.sum_sq[k] += v * v;
      }
    }
  });

  MomentCheckReport rep;
  std::vector<double> sum(np, 0.0), sum_sq(np, 0.0);
  std::uint64_t valid = 0;
  for (const Acc& a : acc) {
    for (std::size_t k = 0; k < np; ++k) {
      sum[k] += a.sum[k];
      sum_sq[k] += a.sum_sq[k];
    }
    valid += a.valid;
    rep.nonfinite += a.nonfinite;
    rep.order_violations += a.order;
    rep.refined_paths += a.refined;
  }
  if (valid < 2) throw std::runtime_error("moment_hypothesis_check: fewer than 2 finite paths");
  const double n = static_cast<double>(valid);
  const double bound = spec.hp.cbar *
                       std::exp((spec.hp.lambda + 0.5 * q * spec.hp.sigma * spec.hp.sigma) * spec.horizon);
  for (std::size_t k = 0; k < np; ++k) {
    PairMoment pm;
    pm.distance = dist[k];
    const double m = sum[k] / n;
    const double var = std::max(0.0, (sum_sq[k] / n - m * m) * n / (n - 1.0));
    const double se = std::sqrt(var / n);
    pm.ratio = std::pow(m, 1.0 / q) / dist[k];
    pm.ratio_stderr = m > 0.0 ? std::pow(m, 1.0 / q - 1.0) * se / (q * dist[k]) : 0.0;
    pm.bound = bound;
    pm.rel_stderr = m > 0.0 ? se / m : 0.0;
    pm.heavy_tail = pm.rel_stderr > 0.2;
    pm.pass = pm.ratio - 3.0 * pm.ratio_stderr <= bound;
    rep.pass = rep.pass && pm.pass;
    if (pm.heavy_tail) {
      rep.warnings.push_back("pair " + std::to_string(k) +
                             ": q-moment relative standard error above 20% (heavy tail)");
    }
    rep.pairs.push_back(pm);
  }
  return rep;
}

// ---------------------------------------------------------------------------

std::vector<CompareRow> compare_bounds(const ExperimentSpec& spec, const CompareGrid& grid) {
  spec.validate();
  std::vector<CompareRow> rows;
  for (double T : grid.horizons) {
    for (double gamma : grid.gammas) {
      ExperimentSpec s = spec;
      s.gamma = gamma;
      s.horizon = T;
      const auto estimates = estimate_tails(s, T, grid.thresholds);
      for (std::size_t k = 0; k < grid.thresholds.size(); ++k) {
        for (Route route : grid.routes) {
          const auto b = bounds::optimized_small_ball_bound(route, spec.hp, gamma, T, grid.thresholds[k]);
          CompareRow row;
          row.route = route;
          row.gamma = gamma;
          row.horizon = T;
          row.u = grid.thresholds[k];
          row.bound = b.capped;
          row.bound_raw = b.raw;
          row.log_bound = b.log_raw;
          row.q = b.q;
          row.estimate = estimates[k];
          row.dominated = row.bound >= row.estimate.ci_high;
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

}  // namespace flowchain::experiments
