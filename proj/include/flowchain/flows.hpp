#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "flowchain/params.hpp"
#include "flowchain/rng.hpp"

namespace flowchain::flows {

/// How the running supremum of a log-path over [0, T] is taken.
///  grid:   maximum over the time grid (biased low).
///  bridge: exact supremum of the Brownian bridge within every step, sampled from its
///          conditional law; the reported supremum then has the continuous-time law.
enum class SupMode { grid, bridge };

std::string_view sup_mode_name(SupMode mode);
SupMode parse_sup_mode(std::string_view name);

/// One path of X_t = lambda t + sigma W_t on a uniform grid.
struct LogPathSummary {
  double running_max = 0.0;  // sup_t X_t (X_0 = 0 included)
  double terminal = 0.0;     // X_T
};

/// Reads one normal and one uniform per step in both modes, so grid and bridge summaries
/// of the same stream describe the same path.
LogPathSummary simulate_log_path(RandomStream& stream, double lambda, double sigma, double horizon,
                                 std::size_t n_steps, SupMode mode);

// ---------------------------------------------------------------------------
// Linear flow phi_t(x) = x exp(lambda t + sigma W_t)
// ---------------------------------------------------------------------------

struct LinearFlowModel {
  HParams hp;
};

struct LinearFlowOptions {
  SupMode sup_mode = SupMode::bridge;
  bool zero_noise = false;  // test hook: W identically zero
};

struct LinearFlowSample {
  double log_sup = 0.0;        // sup_t (lambda t + sigma W_t)
  double terminal_log = 0.0;   // lambda T + sigma W_T
  double sup_diam = 0.0;       // sqrt(d) L exp(log_sup)
  double cube_side = 0.0;
  int dim = 1;

  /// sup over pairs with |x - y| <= r and t <= T of |phi_t(x) - phi_t(y)|.
  double modulus(double r) const;
};

LinearFlowSample simulate_linear(const LinearFlowModel& model, double cube_side, double horizon,
                                 std::size_t n_steps, std::uint64_t path_id, std::uint64_t seed,
                                 const LinearFlowOptions& options = {});

double log_linear_sup_diam(const LinearFlowSample& s);

// ---------------------------------------------------------------------------
// Bump field phi_t(x) = sum_i delta h(x / delta - i) exp(lambda t + sigma W^i_t)
// ---------------------------------------------------------------------------

using BumpFn = std::function<double(std::span<const double>)>;

/// max(0, 1 - 2 |x|_inf): value 1 at the origin, support [-1/2, 1/2]^d, Lipschitz 2 in the
/// Euclidean norm.
BumpFn pyramid_bump();

struct BumpFieldModel {
  HParams hp;
  double spacing = 0.1;
  BumpFn bump = pyramid_bump();

  /// Checks h(0) = 1, support, and the Lipschitz constant on a sample grid.
  void validate(std::size_t grid_per_axis = 41) const;
};

struct BumpFieldOptions {
  std::size_t grid_per_axis = 0;  // spatial samples per axis; 0 picks the coarsest legal grid
  std::vector<double> origin;     // lower cube corner; empty means the origin
  bool keep_cell_maxima = false;
};

struct BumpFieldSample {
  double sup_field = 0.0;       // sup_{t, x} phi_t(x) over the sample grid (bridge sup in t)
  double inf_field = 0.0;       // inf_{t, x} phi_t(x) (time grid)
  double sup_diam = 0.0;        // sup_t (max_x phi_t - min_x phi_t), time grid
  double terminal_sup = 0.0;    // max_x phi_T(x)
  double terminal_inf = 0.0;    // min_x phi_T(x)
  std::size_t cells = 0;
  std::vector<double> cell_log_max;  // sup_t X^i_t per touched cell (optional)
};

BumpFieldSample simulate_bump_field(const BumpFieldModel& model, double cube_side, double horizon,
                                    std::size_t n_steps, std::uint64_t path_id, std::uint64_t seed,
                                    const BumpFieldOptions& options = {});

/// delta h(x / delta - i) for the one cell i whose bump can be nonzero at x; the field is
/// this height times exp(lambda t + sigma W^i_t).
double bump_height(const BumpFieldModel& model, std::span<const double> x);

/// Lattice index of the cell whose bump can be nonzero at x.
std::vector<std::int64_t> bump_cell(double spacing, std::span<const double> x);

/// Substream id of a lattice cell's Brownian motion.
std::uint32_t bump_cell_substream(std::span<const std::int64_t> cell);

/// sup_t |phi_t(x) - phi_t(y)| for one path. Same-cell pairs use the exact bridge supremum;
/// pairs in different cells take the maximum over the time grid.
double bump_pair_sup(const BumpFieldModel& model, std::span<const double> x,
                     std::span<const double> y, double horizon, std::size_t n_steps,
                     std::uint64_t path_id, std::uint64_t seed);

// ---------------------------------------------------------------------------
// SDE flow, Euler-Maruyama with shared noise
// ---------------------------------------------------------------------------

struct SdeFlowModel {
  int dim = 1;
  int noise_dim = 1;
  /// b(x) written into out (size dim).
  std::function<void(std::span<const double> x, std::span<double> out)> drift;
  /// sigma(x) as a dim x noise_dim row-major matrix written into out.
  std::function<void(std::span<const double> x, std::span<double> out)> diffusion;
  double b_lip = 0.0;
  double a_lip = 0.0;
  std::string name = "custom";

  /// Sampled-pair Lipschitz estimates must not exceed the declared constants.
  void validate(std::size_t sample_pairs = 2000) const;
};

/// b = -sin x, sigma = 1 + 0.5 sin x (d = 1, a = 0.5, b_lip = 1).
SdeFlowModel sine_model();
/// b = 0.5 tanh x, sigma = 1 + 0.5 sin x (d = 1): radial drift bound B = 0.5, |sigma| <= 1.5.
SdeFlowModel tanh_model();
/// b = -x, constant sigma (d = 1).
SdeFlowModel ou_model(double sigma);
/// b = 0, sigma = 0 in dimension d.
SdeFlowModel zero_model(int dim);

/// (lambda, sigma, cbar) = (b_lip + (d - 1) a^2 / 2, a, 2).
HParams lipschitz_to_H_params(const SdeFlowModel& model);

struct SdeOptions {
  bool store_path = true;           // keep every time step; otherwise terminal only
  bool check_order = true;          // d = 1: refine on order violations
  int max_refinements = 4;
  bool enforce_stability = true;
};

struct PathEnsemble {
  std::vector<double> initial_points;  // points x dim, row-major
  std::vector<double> time_grid;       // stored times (all steps, or {0, T})
  std::vector<double> values;          // times x points x dim
  std::vector<double> sup_norm;        // per point: sup_t |phi_t(x)|
  std::size_t points = 0;
  int dim = 1;
  std::uint64_t seed = 0;
  std::uint64_t path_id = 0;
  std::size_t n_steps = 0;             // after refinement
  int refinements = 0;
  bool order_violation = false;        // persisted after refinement
  bool nonfinite = false;

  double at(std::size_t t, std::size_t p, int k = 0) const {
    return values[(t * points + p) * static_cast<std::size_t>(dim) + static_cast<std::size_t>(k)];
  }
  /// sup over stored times of |phi_t(x_i) - phi_t(x_j)|.
  double pair_sup_distance(std::size_t i, std::size_t j) const;
};

double sde_max_stable_step(const SdeFlowModel& model);

PathEnsemble simulate_sde_flow(const SdeFlowModel& model, std::span<const double> initial_points,
                               double horizon, std::size_t n_steps, std::uint64_t path_id,
                               std::uint64_t seed, const SdeOptions& options = {});

// ---------------------------------------------------------------------------
// Analytic oracle
// ---------------------------------------------------------------------------

/// P{sup_{t<=T} (mu t + W_t) >= a}.
double crossing_prob(double a, double mu, double horizon);
double log_crossing_prob(double a, double mu, double horizon);

}  // namespace flowchain::flows
