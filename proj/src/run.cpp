#include "flowchain/run.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "flowchain/bounds.hpp"
#include "flowchain/experiments.hpp"
#include "flowchain/flows.hpp"
#include "flowchain/rates.hpp"

#ifndef FLOWCHAIN_VERSION
#define FLOWCHAIN_VERSION "0.0.0"
#endif

namespace flowchain::cli {

using nlohmann::json;
namespace ex = flowchain::experiments;

std::string version() { return FLOWCHAIN_VERSION; }

namespace {

HParams hparams(const RunConfig& c) {
  HParams hp;
  hp.lambda = c.number("lambda");
  hp.sigma = c.number("sigma");
  hp.cbar = c.number("cbar");
  hp.dim = static_cast<int>(c.integer("d"));
  hp.validate();
  return hp;
}

/// Name/value results: one JSON field, one CSV row and one console line each.
class KeyValues {
 public:
  explicit KeyValues(RunResult& r) : r_(r) { r_.table.header = {"name", "value"}; }

  void add(const std::string& name, double v) {
    r_.results[name] = v;
    r_.table.add({name, v});
    r_.console.emplace_back(name, format_console(v));
  }
  void add(const std::string& name, std::uint64_t v) {
    r_.results[name] = v;
    r_.table.add({name, v});
    r_.console.emplace_back(name, std::to_string(v));
  }
  void add(const std::string& name, bool v) {
    r_.results[name] = v;
    r_.table.add({name, v});
    r_.console.emplace_back(name, v ? "true" : "false");
  }
  void add(const std::string& name, const std::string& v) {
    r_.results[name] = v;
    r_.table.add({name, v});
    r_.console.emplace_back(name, v);
  }

 private:
  RunResult& r_;
};

double finite_or_throw(double v, const std::string& what) {
  if (!std::isfinite(v)) throw std::runtime_error(what + " is not finite");
  return v;
}

// ---------------------------------------------------------------------------

void run_bounds(const RunConfig& c, RunResult& r) {
  const HParams hp = hparams(c);
  const std::string op = c.string("op");
  const double gamma = c.number("gamma");
  const double T = c.number("T");
  const double u = c.number("u");
  const double q = c.number("q");
  if (op == "all" || op == "kolmogorov" || op == "basic" || op == "lt") {
    std::vector<Route> routes;
    if (op == "all") {
      routes = {Route::kolmogorov, Route::basic, Route::lt};
    } else {
      routes = {parse_route(op)};
    }
    r.table.header = {"route", "gamma", "T", "u", "q", "kappa", "log_bound", "bound"};
    for (Route route : routes) {
      const auto b = q > 0.0 ? bounds::small_ball_tail_bound(route, hp, gamma, T, u, q)
                             : bounds::optimized_small_ball_bound(route, hp, gamma, T, u);
      const std::string name(route_name(route));
      if (!std::isfinite(b.log_raw)) {
        throw std::runtime_error("route " + name + " bound is infinite at q = " + format_console(b.q) +
                                 " (the chaining series needs q > d)");
      }
      r.table.add({name, gamma, T, u, b.q, b.kappa, b.log_raw, b.capped});
      r.console.emplace_back("bound[" + name + "]", format_console(b.capped));
      r.console.emplace_back("q[" + name + "]", format_console(b.q));
      r.console.emplace_back("log_bound[" + name + "]", format_console(b.log_raw));
    }
    r.results["routes"] = table_json(r.table);
    return;
  }
  KeyValues kv(r);
  if (op == "exponent") {
    const auto e = bounds::optimized_exponent(hp, gamma);
    kv.add("rate", e.rate);
    kv.add("capped_rate", e.capped_rate);
    kv.add("q_star", e.q_star);
    kv.add("at_boundary", e.at_boundary);
    kv.add("I", rates::small_ball_rate(hp, gamma));
    kv.add("identity_applies", gamma > hp.lambda + 0.5 * hp.sigma * hp.sigma * hp.dim);
  } else if (op == "entropy") {
    if (!(q > hp.dim)) throw std::runtime_error("op=entropy needs q > d for a finite entropy integral");
    const double side = c.number("side");
    const auto spec = bounds::cube_entropy_spec(side, hp.dim, q);
    const auto numeric = bounds::entropy_integral_J(spec, c.number("rel_tol"));
    kv.add("J", finite_or_throw(bounds::cube_entropy_integral(side, hp.dim, q), "J"));
    kv.add("J_numeric", finite_or_throw(numeric.value, "J_numeric"));
    kv.add("J_numeric_error", numeric.error);
    kv.add("J_numeric_converged", numeric.converged);
  } else {
    throw std::runtime_error("bounds: unknown op '" + op + "' (expected all, kolmogorov, basic, lt, exponent or entropy)");
  }
}

// ---------------------------------------------------------------------------

rates::DispersionParams dispersion_params(const RunConfig& c, const HParams& hp) {
  rates::DispersionParams dp;
  dp.hp = hp;
  dp.delta = c.number("delta") > 0.0 ? c.number("delta") : static_cast<double>(hp.dim);
  dp.a_diff = c.number("A");
  dp.b_drift = c.number("B");
  dp.validate();
  return dp;
}

void run_rates(const RunConfig& c, RunResult& r) {
  const HParams hp = hparams(c);
  const std::string op = c.string("op");
  const double gamma = c.number("gamma");
  KeyValues kv(r);
  const auto dispersion = [&]() {
    const auto dp = dispersion_params(c, hp);
    for (const auto& w : dp.warnings()) r.warnings.push_back(w);
    return dp;
  };
  if (op == "I") {
    kv.add("I", rates::small_ball_rate(hp, gamma));
  } else if (op == "I_homeo") {
    kv.add("I_homeo", rates::small_ball_rate_homeo(hp, gamma));
  } else if (op == "lambda0") {
    kv.add("lambda0", rates::lambda0(dispersion()));
  } else if (op == "gamma0") {
    const auto g = rates::gamma0_detail(dispersion());
    kv.add("gamma0", g.value);
    kv.add("closed_form", g.closed_form);
    kv.add("root", g.root);
    kv.add("upper_branch", g.upper_branch);
    kv.add("fallback", g.fallback);
    if (g.fallback) r.warnings.push_back("gamma0: closed form disagreed with the root; reporting the root");
  } else if (op == "K") {
    const auto dp = dispersion();
    kv.add("K", rates::growth_constant_K(dp));
    kv.add("K_from_gamma0", rates::growth_constant_from_gamma0(dp));
  } else if (op == "K_homeo") {
    const auto h = rates::growth_constant_homeo(dispersion());
    kv.add("K_homeo", h.K);
    kv.add("degenerate", h.degenerate);
  } else if (op == "K_negative") {
    const auto nb = rates::negative_drift_growth_bound(dispersion());
    kv.add("K_negative", nb.value);
    kv.add("valid", nb.valid);
  } else if (op == "one_point") {
    kv.add("one_point_rate", rates::one_point_rate(c.number("k"), c.number("A"), c.number("B")));
  } else if (op == "schilder") {
    kv.add("schilder_infimum", rates::schilder_infimum(c.number("k"), c.number("A"), c.number("Btilde")));
  } else if (op == "laplace") {
    kv.add("laplace", rates::hitting_laplace(c.number("s"), hp, c.number("z")));
  } else if (op == "range_density") {
    kv.add("density", rates::bm_range_density(c.number("r")));
  } else if (op == "range_tail") {
    const double u = c.number("u");
    const auto t = rates::bm_range_tail(u);
    kv.add("numeric_tail", t.numeric_tail);
    if (u > 0.0) {
      kv.add("series_tail", t.series_tail);
      kv.add("analytic_dominator", t.analytic_dominator);
    }
  } else if (op == "bump_rate") {
    kv.add("bump_rate", rates::bump_field_rate(gamma, c.number("xi"), hp));
    kv.add("bump_rate_capped", rates::bump_field_rate_capped(gamma, c.number("xi"), hp));
  } else if (op == "diff_flow_rate") {
    kv.add("diff_flow_rate", rates::diff_flow_rate(c.number("xi"), hp.sigma));
  } else if (op == "diff_flow" || op == "diff_flow_opt") {
    rates::DiffFlowBound b;
    double z = c.number("z");
    if (op == "diff_flow") {
      rates::DiffFlowParams p;
      p.hp = hp;
      p.xi = c.number("xi");
      p.z = z;
      p.eps = c.number("eps");
      p.u_hat = c.number("u_hat");
      p.validate();
      b = rates::diff_flow_finite_bound(p, c.number("T"));
    } else {
      const auto o = rates::optimize_diff_flow_z(hp, c.number("xi"), c.number("eps"), c.number("u_hat"),
                                                 c.number("T"));
      b = o.bound;
      z = o.z;
    }
    if (b.vacuous) r.warnings.push_back("diff_flow: bound is vacuous (no complete crossing fits in T)");
    kv.add("log_bound", finite_or_throw(b.log_bound, "diff_flow log bound"));
    kv.add("per_T", b.per_T);
    kv.add("laplace_lambda", b.lambda);
    kv.add("steps", static_cast<std::uint64_t>(b.steps));
    kv.add("z", z);
    kv.add("vacuous", b.vacuous);
    kv.add("asymptotic_rate", rates::diff_flow_rate(c.number("xi"), hp.sigma));
  } else {
    throw std::runtime_error("rates: unknown op '" + op + "'");
  }
}

// ---------------------------------------------------------------------------

double default_spacing(const RunConfig& c, const HParams& hp, double T) {
  const double s = c.number("bump_spacing");
  return s > 0.0 ? s : std::exp(-(hp.lambda + hp.sigma * hp.sigma * hp.dim) * T);
}

void run_simulate(const RunConfig& c, RunResult& r) {
  const HParams hp = hparams(c);
  const auto model = ex::parse_model(c.string("model"));
  const double T = c.number("T");
  const double side = std::exp(-c.number("gamma") * T);
  const auto n = static_cast<std::size_t>(c.integer("steps"));
  const std::uint64_t paths = c.params.at("paths").get<std::uint64_t>();
  switch (model) {
    case ex::ModelKind::linear: {
      flows::LinearFlowOptions opt;
      opt.sup_mode = flows::parse_sup_mode(c.string("sup_mode"));
      r.table.header = {"path", "log_sup", "terminal_log", "sup_diam"};
      for (std::uint64_t p = 0; p < paths; ++p) {
        const auto s = flows::simulate_linear(flows::LinearFlowModel{hp}, side, T, n, p, c.seed, opt);
        r.table.add({p, s.log_sup, s.terminal_log, s.sup_diam});
      }
      break;
    }
    case ex::ModelKind::bump: {
      flows::BumpFieldModel m;
      m.hp = hp;
      m.spacing = default_spacing(c, hp, T);
      m.validate();
      r.table.header = {"path", "sup_field", "inf_field", "sup_diam", "terminal_sup", "terminal_inf", "cells"};
      for (std::uint64_t p = 0; p < paths; ++p) {
        const auto s = flows::simulate_bump_field(m, side, T, n, p, c.seed);
        r.table.add({p, s.sup_field, s.inf_field, s.sup_diam, s.terminal_sup, s.terminal_inf,
                     static_cast<std::uint64_t>(s.cells)});
      }
      break;
    }
    case ex::ModelKind::sde: {
      const auto m = ex::sde_model_by_name(c.string("sde_model"));
      std::vector<double> x0 = c.list("points");
      if (x0.empty()) x0 = {0.0, side};
      r.table.header = {"path", "point", "x0", "terminal", "sup_norm", "refinements", "order_violation"};
      for (std::uint64_t p = 0; p < paths; ++p) {
        const auto e = flows::simulate_sde_flow(m, x0, T, n, p, c.seed);
        if (e.nonfinite) throw std::runtime_error("simulate: sde path " + std::to_string(p) + " became nonfinite");
        const std::size_t last = e.time_grid.size() - 1;
        for (std::size_t i = 0; i < e.points; ++i) {
          r.table.add({p, static_cast<std::uint64_t>(i), x0[i], e.at(last, i), e.sup_norm[i],
                       static_cast<std::int64_t>(e.refinements), e.order_violation});
        }
      }
      break;
    }
  }
  r.results["paths"] = table_json(r.table);
  r.console.emplace_back("paths", std::to_string(paths));
  r.console.emplace_back("model", c.string("model"));
}

// ---------------------------------------------------------------------------

ex::ExperimentSpec experiment_spec(const RunConfig& c, const HParams& hp) {
  ex::ExperimentSpec s;
  s.model = ex::parse_model(c.string("model"));
  s.hp = hp;
  s.gamma = c.number("gamma");
  s.u = c.number("u");
  s.horizon = c.number("T");
  s.horizons = c.list("horizons");
  s.path_count = c.params.at("paths").get<std::uint64_t>();
  s.seed = c.seed;
  s.n_steps = static_cast<std::size_t>(c.integer("steps"));
  s.sup_mode = flows::parse_sup_mode(c.string("sup_mode"));
  s.bump_spacing = c.number("bump_spacing");
  s.sde_model = c.string("sde_model");
  s.workers = c.workers;
  s.level = c.number("level");
  s.delta = c.number("delta");
  s.validate();
  return s;
}

const std::vector<std::string> kTailHeader{"model", "gamma", "T", "u", "exceed_count", "path_count",
                                           "nonfinite", "p_hat", "ci_low", "ci_high", "level"};

std::vector<Cell> tail_row(const ex::ExperimentSpec& s, const ex::TailEstimate& e) {
  return {std::string(ex::model_name(s.model)), s.gamma, e.horizon, e.threshold, e.exceed_count, e.path_count,
          e.nonfinite, e.p_hat, e.ci_low, e.ci_high, e.level};
}

void run_experiment(const RunConfig& c, RunResult& r) {
  const HParams hp = hparams(c);
  const auto spec = experiment_spec(c, hp);
  const std::string kind = c.string("kind");
  if (kind == "tail") {
    const auto e = ex::estimate_tail(spec);
    r.table.header = kTailHeader;
    r.table.add(tail_row(spec, e));
    r.results["estimate"] = table_json(r.table).at(0);
    r.console.emplace_back("p_hat", format_console(e.p_hat));
    r.console.emplace_back("ci", "[" + format_console(e.ci_low) + ", " + format_console(e.ci_high) + "]");
  } else if (kind == "rate") {
    if (spec.horizons.size() < 3) throw std::runtime_error("experiment kind=rate needs at least 3 horizons");
    std::vector<ex::TailEstimate> est;
    r.table.header = kTailHeader;
    for (double T : spec.horizons) {
      est.push_back(ex::estimate_tails(spec, T, {spec.u}).front());
      r.table.add(tail_row(spec, est.back()));
    }
    const auto fit = ex::fit_rate(est);
    for (const auto& w : fit.warnings) r.warnings.push_back(w);
    r.results["estimates"] = table_json(r.table);
    r.results["fit"] = {{"slope", fit.slope},
                        {"intercept", fit.intercept},
                        {"residual_max", fit.residual_max},
                        {"horizons", fit.horizons},
                        {"log_p", fit.log_p},
                        {"per_T", fit.per_T}};
    r.console.emplace_back("slope", format_console(fit.slope));
    if (spec.model == ex::ModelKind::linear) {
      const double predicted = -rates::small_ball_rate(hp, spec.gamma);
      r.results["fit"]["predicted"] = predicted;
      r.console.emplace_back("predicted", format_console(predicted));
    } else if (spec.model == ex::ModelKind::bump && spec.bump_spacing == 0.0) {
      const double xi = hp.lambda + hp.sigma * hp.sigma * hp.dim;
      const double predicted = rates::bump_field_rate_capped(spec.gamma, xi, hp);
      r.results["fit"]["predicted"] = predicted;
      r.console.emplace_back("predicted", format_console(predicted));
    }
  } else if (kind == "compare") {
    ex::CompareGrid grid;
    grid.gammas = c.list("gammas");
    if (grid.gammas.empty()) grid.gammas = {spec.gamma};
    grid.horizons = spec.horizons.empty() ? std::vector<double>{spec.horizon} : spec.horizons;
    grid.thresholds = c.list("thresholds");
    if (grid.thresholds.empty()) grid.thresholds = {spec.u};
    const auto rows = ex::compare_bounds(spec, grid);
    r.table.header = {"route", "gamma", "T", "u", "bound", "log_bound", "q", "p_hat", "ci_low", "ci_high",
                      "exceed_count", "path_count", "dominance"};
    std::uint64_t failures = 0;
    for (const auto& row : rows) {
      if (!std::isfinite(row.log_bound)) {
        throw std::runtime_error("route " + std::string(route_name(row.route)) + " bound is infinite");
      }
      r.table.add({std::string(route_name(row.route)), row.gamma, row.horizon, row.u, row.bound, row.log_bound,
                   row.q, row.estimate.p_hat, row.estimate.ci_low, row.estimate.ci_high, row.estimate.exceed_count,
                   row.estimate.path_count, row.dominated});
      failures += row.dominated ? 0 : 1;
    }
    r.results["rows"] = table_json(r.table);
    r.results["dominance_failures"] = failures;
    r.console.emplace_back("rows", std::to_string(rows.size()));
    r.console.emplace_back("dominance_failures", std::to_string(failures));
    if (failures > 0) r.exit_code = kExitViolation;
  } else if (kind == "dispersion") {
    const auto dp = dispersion_params(c, hp);
    for (const auto& w : dp.warnings()) r.warnings.push_back(w);
    const auto d = ex::dispersion_experiment(spec, dp, c.number("kappa"));
    KeyValues kv(r);
    kv.add("K", d.K);
    kv.add("kappa", d.kappa);
    kv.add("log_cover_count", d.log_cover_count);
    kv.add("epsilon_min", d.epsilon_min);
    kv.add("cover_subsampled", d.cover_subsampled);
    kv.add("centres_simulated", static_cast<std::uint64_t>(d.centres_simulated));
    kv.add("s1_single_p_hat", d.s1_single.p_hat);
    kv.add("s1_single_ci_high", d.s1_single.ci_high);
    kv.add("s2_single_p_hat", d.s2_single.p_hat);
    kv.add("s2_single_ci_high", d.s2_single.ci_high);
    kv.add("s1_bound", d.s1_bound);
    kv.add("s2_bound", d.s2_bound);
    kv.add("max_growth", d.max_growth);
    kv.add("mean_growth", d.mean_growth);
    kv.add("paths_above_K", d.paths_above_K);
    kv.add("path_count", d.path_count);
    kv.add("nonfinite", d.nonfinite);
    if (d.cover_subsampled) r.warnings.push_back("dispersion: cover centres subsampled to 16 per axis");
  } else if (kind == "moment") {
    ex::MomentCheckSpec m;
    m.model = spec.model;
    m.hp = hp;
    m.model_hp = hp;
    m.sde_model = spec.sde_model;
    m.q = c.number("q");
    m.horizon = spec.horizon;
    m.n_steps = spec.n_steps;
    m.path_count = spec.path_count;
    m.seed = spec.seed;
    m.workers = spec.workers;
    const auto anchors = static_cast<std::size_t>(c.integer("anchors"));
    std::vector<double> radii = c.list("radii");
    double span = 1.0;
    if (spec.model == ex::ModelKind::bump) {
      m.bump_spacing = default_spacing(c, hp, spec.horizon);
      span = m.bump_spacing * static_cast<double>(anchors);
      if (radii.empty()) {
        for (double f : {1.0 / 16, 0.25, 1.0, 4.0}) radii.push_back(f * m.bump_spacing);
      }
    } else if (radii.empty()) {
      radii = {0.01, 0.1, 0.5, 1.0};
    }
    m.pairs = ex::axis_pairs(hp.dim, anchors, span, radii);
    const auto rep = ex::moment_hypothesis_check(m);
    r.table.header = {"pair", "x", "y", "distance", "ratio", "ratio_stderr", "bound", "rel_stderr",
                      "heavy_tail", "pass"};
    for (std::size_t k = 0; k < rep.pairs.size(); ++k) {
      const auto& p = rep.pairs[k];
      r.table.add({static_cast<std::uint64_t>(k), m.pairs[k].x[0], m.pairs[k].y[0], p.distance, p.ratio,
                   p.ratio_stderr, p.bound, p.rel_stderr, p.heavy_tail, p.pass});
    }
    for (const auto& w : rep.warnings) r.warnings.push_back(w);
    r.results["pairs"] = table_json(r.table);
    r.results["pass"] = rep.pass;
    r.results["order_violations"] = rep.order_violations;
    r.results["refined_paths"] = rep.refined_paths;
    r.results["nonfinite"] = rep.nonfinite;
    r.console.emplace_back("pass", rep.pass ? "true" : "false");
    r.console.emplace_back("order_violations", std::to_string(rep.order_violations));
    if (!rep.pass || rep.order_violations > 0) r.exit_code = kExitViolation;
  } else {
    throw std::runtime_error("experiment: unknown kind '" + kind + "'");
  }
}

// ---------------------------------------------------------------------------

void run_grr(const RunConfig& c, RunResult& r) {
  ex::GrrAuditSpec s;
  s.field = ex::parse_audit_field(c.string("field"));
  s.grid = static_cast<std::size_t>(c.integer("grid"));
  s.q = c.number("q");
  s.alpha = c.number("alpha");
  s.slope = c.number("slope");
  s.path_count = c.params.at("paths").get<std::uint64_t>();
  s.seed = c.seed;
  s.workers = c.workers;
  const auto rep = ex::grr_pathwise_audit(s);
  KeyValues kv(r);
  kv.add("paths", rep.paths);
  kv.add("excluded_infinite", rep.excluded_infinite);
  kv.add("pairs_checked", rep.pairs_checked);
  kv.add("violations", rep.violations);
  kv.add("min_ratio", rep.min_ratio);
  kv.add("median_ratio", rep.median_ratio);
  kv.add("max_ratio", rep.max_ratio);
  kv.add("max_V", rep.max_V);
  if (rep.violations > 0) r.exit_code = kExitViolation;
}

}  // namespace

RunResult execute(const RunConfig& config) {
  RunResult r;
  if (config.cmd == "bounds") {
    run_bounds(config, r);
  } else if (config.cmd == "rates") {
    run_rates(config, r);
  } else if (config.cmd == "simulate") {
    run_simulate(config, r);
  } else if (config.cmd == "experiment") {
    run_experiment(config, r);
  } else if (config.cmd == "grr-check") {
    run_grr(config, r);
  } else {
    throw ConfigError("unknown cmd '" + config.cmd + "'");
  }
  return r;
}

json build_report(const RunConfig& config, const RunResult& result, const std::string& timestamp) {
  json report = json::object();
  report["cmd"] = config.cmd;
  report["config"] = config.params;
  report["config_hash"] = config.hash();
  report["seed"] = config.seed;
  report["version"] = version();
  report["timestamp"] = timestamp;
  report["runtime"] = {{"workers", config.workers}, {"out", config.out}};
  report["results"] = result.results;
  report["warnings"] = result.warnings;
  report["status"] = result.exit_code == kExitOk ? "ok" : "violation";
  return report;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    const RunResult result = execute(config);
    write_report(config.out, build_report(config, result, utc_timestamp()), result.table);
    for (const auto& [name, value] : result.console) out << name << " = " << value << "\n";
    for (const auto& w : result.warnings) err << "warning: " << w << "\n";
    if (result.exit_code == kExitViolation) err << "flowchain: violation detected (see report.json)\n";
    return result.exit_code;
  } catch (const std::exception& e) {
    err << "flowchain " << config.cmd << ": " << e.what() << "\n";
    return kExitError;
  }
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"flowchain: chaining tail bounds, rate functions and stochastic flow experiments"};
  app.set_version_flag("--version", version());
  app.require_subcommand(0, 1);
  std::map<std::string, std::string> global_text;
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its keys");
  for (const char* key : {"seed", "workers", "out"}) {
    app.add_option(std::string("--") + key, global_text[key], find_key(key)->help);
  }
  std::map<std::string, std::map<std::string, std::string>> sub_text;
  std::map<std::string, CLI::App*> subs;
  for (const auto& cmd : commands()) {
    static const std::map<std::string, std::string> blurb{
        {"bounds", "finite-T small-ball tail bounds, exponents and entropy integrals"},
        {"rates", "closed-form rate functions and growth constants"},
        {"simulate", "per-path samples from the linear flow, bump field or SDE flow"},
        {"experiment", "Monte Carlo tails, rate fits, bound comparisons and moment checks"},
        {"grr-check", "pathwise audit of the Garsia-Rodemich-Rumsey modulus bound"}};
    CLI::App* sub = app.add_subcommand(cmd, blurb.at(cmd));
    sub->fallthrough();
    subs[cmd] = sub;
    for (const auto& k : schema()) {
      if (k.key == "cmd" || k.key == "seed" || k.key == "workers" || k.key == "out") continue;
      if (!key_applies(k, cmd)) continue;
      sub->add_option("--" + k.key, sub_text[cmd][k.key], k.help);
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }
  std::string cmd_label = "config";
  try {
    json doc = json::object();
    if (!config_path.empty()) {
      std::ifstream f(config_path, std::ios::binary);
      if (!f) throw ConfigError("cannot read config file '" + config_path + "'");
      std::stringstream ss;
      ss << f.rdbuf();
      try {
        doc = json::parse(ss.str());
      } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + config_path + "' is not valid JSON: " + e.what());
      }
      if (!doc.is_object()) throw ConfigError("config file '" + config_path + "' must hold a JSON object");
    }
    std::string cmd;
    for (const auto& [name, sub] : subs) {
      if (sub->parsed()) cmd = name;
    }
    if (!cmd.empty()) {
      if (doc.contains("cmd") && doc.at("cmd").is_string() && doc.at("cmd").get<std::string>() != cmd) {
        throw ConfigError("subcommand '" + cmd + "' conflicts with config cmd '" + doc.at("cmd").get<std::string>() + "'");
      }
      doc["cmd"] = cmd;
    } else if (!doc.contains("cmd")) {
      throw ConfigError("no subcommand given (expected bounds, rates, simulate, experiment or grr-check)");
    }
    const auto apply = [&](CLI::App& owner, const std::string& key, const std::string& text) {
      if (owner.count("--" + key) > 0) doc[key] = value_from_text(*find_key(key), text);
    };
    for (const char* key : {"seed", "workers", "out"}) apply(app, key, global_text[key]);
    if (!cmd.empty()) {
      for (const auto& [key, text] : sub_text[cmd]) apply(*subs[cmd], key, text);
    }
    cmd_label = doc.at("cmd").is_string() ? doc.at("cmd").get<std::string>() : cmd_label;
    const RunConfig config = parse_config(doc);
    return run(config, out, err);
  } catch (const std::exception& e) {
    err << "flowchain " << cmd_label << ": " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace flowchain::cli
