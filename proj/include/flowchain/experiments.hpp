#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "flowchain/bounds.hpp"
#include "flowchain/flows.hpp"
#include "flowchain/params.hpp"
#include "flowchain/rates.hpp"

namespace flowchain::experiments {

// ---------------------------------------------------------------------------
// Deterministic parallel runner
// ---------------------------------------------------------------------------

/// Paths are split into fixed chunks of chunk_size consecutive ids. body(chunk, begin, end)
/// runs once per chunk on some worker; callers keep one accumulator per chunk and reduce in
/// chunk order, so results never depend on the worker count or scheduling.
void for_each_chunk(std::uint64_t path_count, unsigned workers, std::uint64_t chunk_size,
                    const std::function<void(std::size_t chunk, std::uint64_t begin,
                                             std::uint64_t end)>& body);

std::size_t chunk_count(std::uint64_t path_count, std::uint64_t chunk_size);

/// FLOWCHAIN_WORKERS if set, otherwise hardware concurrency (at least 1).
unsigned default_workers();

// ---------------------------------------------------------------------------
// Tail estimation
// ---------------------------------------------------------------------------

struct TailEstimate {
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  std::uint64_t exceed_count = 0;
  std::uint64_t path_count = 0;
  std::uint64_t nonfinite = 0;  // excluded paths
  std::uint64_t seed = 0;
  double threshold = 0.0;
  double horizon = 0.0;
  double level = 0.99;
};

TailEstimate make_tail_estimate(std::uint64_t exceed, std::uint64_t paths, double level);

enum class ModelKind { linear, bump, sde };

std::string_view model_name(ModelKind kind);
ModelKind parse_model(std::string_view name);

struct ExperimentSpec {
  ModelKind model = ModelKind::linear;
  HParams hp;
  double gamma = 2.0;     // cube side exp(-gamma T)
  double u = 1.0;         // diameter threshold
  double horizon = 1.0;
  std::vector<double> horizons;  // T grid for rate fits
  std::uint64_t path_count = 100000;
  std::uint64_t seed = 0;
  std::size_t n_steps = 256;
  flows::SupMode sup_mode = flows::SupMode::bridge;
  double bump_spacing = 0.0;     // 0: exp(-(lambda + sigma^2 d) T)
  std::string sde_model = "sine";
  unsigned workers = 1;
  double level = 0.99;
  double delta = 0.0;            // box dimension of the compact set; 0 means d

  void validate() const;
};

flows::SdeFlowModel sde_model_by_name(const std::string& name);

/// log sup_t diam(image of the cube) per path; NaN marks a nonfinite SDE path.
std::vector<double> simulate_log_diameters(const ExperimentSpec& spec, double horizon);

/// Tail estimates for several thresholds from one set of paths (nested events).
std::vector<TailEstimate> estimate_tails(const ExperimentSpec& spec, double horizon,
                                         const std::vector<double>& thresholds);

TailEstimate estimate_tail(const ExperimentSpec& spec);

// ---------------------------------------------------------------------------
// Rate fits
// ---------------------------------------------------------------------------

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<double> horizons;
  std::vector<double> log_p;
  std::vector<double> per_T;  // log p / T
  double residual_max = 0.0;
  std::vector<std::string> warnings;
};

/// Least squares of log p against T from stored values (>= 3 points).
RateFit fit_rate_values(const std::vector<double>& horizons, const std::vector<double>& log_p);

/// Drops horizons with zero exceedances, then fits.
RateFit fit_rate(const std::vector<TailEstimate>& estimates);

// ---------------------------------------------------------------------------
// Dispersion
// ---------------------------------------------------------------------------

struct DispersionReport {
  double log_cover_count = 0.0;  // log ceil(e^{gamma T})^d for the unit cube
  double cover_count = 0.0;
  double epsilon_min = 0.0;      // smallest eps with count <= exp(gamma T (delta + eps))
  bool cover_subsampled = false;
  std::size_t centres_simulated = 0;
  double kappa = 0.0;
  TailEstimate s1_single;        // max over simulated centres of P{escape beyond kappa T - 1}
  TailEstimate s2_single;        // P{small-cube diameter >= 1}
  double s1_bound = 0.0;         // cover_count * s1 ci_high
  double s2_bound = 0.0;
  double K = 0.0;
  double max_growth = 0.0;       // max over paths of sup_{t, x} |phi_t(x)| / T
  double mean_growth = 0.0;
  std::uint64_t paths_above_K = 0;
  std::uint64_t path_count = 0;
  std::uint64_t nonfinite = 0;
};

/// Compact set = unit cube [0, 1]^d (delta = d unless declared). kappa <= 0 selects K.
DispersionReport dispersion_experiment(const ExperimentSpec& spec, const rates::DispersionParams& dp,
                                       double kappa = 0.0);

// ---------------------------------------------------------------------------
// GRR audit
// ---------------------------------------------------------------------------

enum class AuditField { brownian, linear, constant };

std::string_view audit_field_name(AuditField f);
AuditField parse_audit_field(std::string_view name);

struct GrrAuditSpec {
  AuditField field = AuditField::brownian;
  std::size_t grid = 256;  // points i / (grid - 1) on [0, 1], masses 1 / grid
  double q = 4.0;
  double alpha = 1.0;      // gauge p(s) = s^alpha
  double slope = 1.0;      // linear field f(x) = slope x
  std::uint64_t path_count = 100;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

struct GrrAuditReport {
  std::uint64_t paths = 0;
  std::uint64_t excluded_infinite = 0;
  std::uint64_t pairs_checked = 0;
  std::uint64_t violations = 0;
  double min_ratio = 0.0;     // min bound_v / increment over pairs with increment > 0
  double median_ratio = 0.0;
  double max_ratio = 0.0;
  double max_V = 0.0;
};

GrrAuditReport grr_pathwise_audit(const GrrAuditSpec& spec);

// ---------------------------------------------------------------------------
// Moment hypothesis check
// ---------------------------------------------------------------------------

struct PointPair {
  std::vector<double> x;
  std::vector<double> y;
};

/// Pairs (x, x + r e_1) for anchors x = span (j + 0.3) / anchors e_1, j < anchors, and every
/// radius r.
std::vector<PointPair> axis_pairs(int dim, std::size_t anchors, double span,
                                  const std::vector<double>& radii);

struct MomentCheckSpec {
  ModelKind model = ModelKind::linear;
  HParams hp;                 // constants under test
  HParams model_hp;           // linear / bump dynamics (ignored for sde)
  double bump_spacing = 1.0;
  std::string sde_model = "sine";
  double q = 2.0;
  double horizon = 1.0;
  std::size_t n_steps = 1000;
  std::vector<PointPair> pairs;
  std::uint64_t path_count = 100000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

struct PairMoment {
  double distance = 0.0;
  double ratio = 0.0;         // (E sup rho^q)^{1/q} / |x - y|
  double ratio_stderr = 0.0;  // delta method
  double bound = 0.0;         // cbar exp((lambda + q sigma^2 / 2) T)
  double rel_stderr = 0.0;    // of the q-moment estimator
  bool pass = false;          // ratio - 3 stderr <= bound
  bool heavy_tail = false;    // rel_stderr > 20%
};

struct MomentCheckReport {
  std::vector<PairMoment> pairs;
  bool pass = true;
  std::uint64_t order_violations = 0;  // sde, d = 1
  std::uint64_t refined_paths = 0;
  std::uint64_t nonfinite = 0;
  std::vector<std::string> warnings;
};

MomentCheckReport moment_hypothesis_check(const MomentCheckSpec& spec);

// ---------------------------------------------------------------------------
// Bound versus estimate
// ---------------------------------------------------------------------------

struct CompareRow {
  Route route = Route::basic;
  double gamma = 0.0;
  double horizon = 0.0;
  double u = 0.0;
  double bound = 0.0;      // capped
  double bound_raw = 0.0;
  double log_bound = 0.0;
  double q = 0.0;
  TailEstimate estimate;
  bool dominated = false;  // bound >= ci_high
};

struct CompareGrid {
  std::vector<double> gammas;
  std::vector<double> horizons;
  std::vector<double> thresholds;
  std::vector<Route> routes{Route::kolmogorov, Route::basic, Route::lt};
};

/// Bounds use spec.hp; estimates come from spec.model with the same (gamma, T, u).
std::vector<CompareRow> compare_bounds(const ExperimentSpec& spec, const CompareGrid& grid);

}  // namespace flowchain::experiments
