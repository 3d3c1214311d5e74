#include "flowchain/flows.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

#include "flowchain/numerics.hpp"

namespace flowchain::flows {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw std::invalid_argument(std::string(what) + " must be > 0");
}

// Maximum of a Brownian bridge from a to b over a step of variance v, by inversion of
// P{max >= m} = exp(-2 (m - a)(m - b) / v).
inline double bridge_max(double a, double b, double v, double u) {
  const double diff = b - a;
  return 0.5 * (a + b + std::sqrt(diff * diff - 2.0 * v * std::log(u)));
}

// Advances one log-path per step; every call consumes one normal and one uniform.
struct LogPathStepper {
  RandomStream stream;
  double drift_step;
  double vol_step;
  double var_step;
  double x = 0.0;
  double grid_max = 0.0;
  double bridge_sup = 0.0;

  LogPathStepper(RandomStream s, double lambda, double sigma, double dt)
      : stream(s), drift_step(lambda * dt), vol_step(sigma * std::sqrt(dt)),
        var_step(sigma * sigma * dt) {}

  void step() {
    const double z = stream.next_normal();
    const double u = stream.next_uniform();
    const double next = x + drift_step + vol_step * z;
    bridge_sup = std::max(bridge_sup, bridge_max(x, next, var_step, u));
    x = next;
    grid_max = std::max(grid_max, x);
  }
};

}  // namespace

std::string_view sup_mode_name(SupMode mode) { return mode == SupMode::grid ? "grid" : "bridge"; }

SupMode parse_sup_mode(std::string_view name) {
  if (name == "grid") return SupMode::grid;
  if (name == "bridge") return SupMode::bridge;
  throw std::invalid_argument("unknown sup mode '" + std::string(name) + "' (expected grid or bridge)");
}

LogPathSummary simulate_log_path(RandomStream& stream, double lambda, double sigma, double horizon,
                                 std::size_t n_steps, SupMode mode) {
  require_positive(horizon, "simulate_log_path: T");
  if (n_steps == 0) throw std::invalid_argument("simulate_log_path: n_steps must be >= 1");
  LogPathStepper path(stream, lambda, sigma, horizon / static_cast<double>(n_steps));
  for (std::size_t k = 0; k < n_steps; ++k) path.step();
  stream = path.stream;
  return {mode == SupMode::bridge ? path.bridge_sup : path.grid_max, path.x};
}

// ---------------------------------------------------------------------------

double LinearFlowSample::modulus(double r) const {
  if (!(r >= 0.0)) throw std::invalid_argument("LinearFlowSample::modulus: r must be >= 0");
  const double reach = std::min(r, std::sqrt(static_cast<double>(dim)) * cube_side);
  return reach * std::exp(log_sup);
}

LinearFlowSample simulate_linear(const LinearFlowModel& model, double cube_side, double horizon,
                                 std::size_t n_steps, std::uint64_t path_id, std::uint64_t seed,
                                 const LinearFlowOptions& options) {
  model.hp.validate();
  require_positive(cube_side, "simulate_linear: cube side");
  LinearFlowSample s;
  s.cube_side = cube_side;
  s.dim = model.hp.dim;
  if (options.zero_noise) {
    s.log_sup = std::max(0.0, model.hp.lambda * horizon);
    s.terminal_log = model.hp.lambda * horizon;
  } else {
    RandomStream stream(seed, path_id);
    const auto path =
        simulate_log_path(stream, model.hp.lambda, model.hp.sigma, horizon, n_steps, options.sup_mode);
    s.log_sup = path.running_max;
    s.terminal_log = path.terminal;
  }
  s.sup_diam = std::exp(log_linear_sup_diam(s));
  return s;
}

double log_linear_sup_diam(const LinearFlowSample& s) {
  return 0.5 * std::log(static_cast<double>(s.dim)) + std::log(s.cube_side) + s.log_sup;
}

// ---------------------------------------------------------------------------
// Bump field
// ---------------------------------------------------------------------------

BumpFn pyramid_bump() {
  return [](std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return std::max(0.0, 1.0 - 2.0 * m);
  };
}

void BumpFieldModel::validate(std::size_t grid_per_axis) const {
  hp.validate();
  require_positive(spacing, "BumpFieldModel.spacing");
  if (!bump) throw std::invalid_argument("BumpFieldModel: bump function missing");
  const int d = hp.dim;
  std::vector<double> origin(static_cast<std::size_t>(d), 0.0);
  if (std::abs(bump(origin) - 1.0) > 1e-12) throw std::invalid_argument("BumpFieldModel: h(0) must be 1");
  if (grid_per_axis < 3) grid_per_axis = 3;
  // Samples on [-0.75, 0.75]^d so the support check sees points outside [-1/2, 1/2]^d.
  const double lo = -0.75;
  const double step = 1.5 / static_cast<double>(grid_per_axis - 1);
  std::size_t total = 1;
  for (int k = 0; k < d; ++k) total *= grid_per_axis;
  if (total > 2'000'000) throw std::invalid_argument("BumpFieldModel: validation grid too large");
  std::vector<std::vector<double>> pts(total, std::vector<double>(static_cast<std::size_t>(d)));
  std::vector<double> vals(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    bool outside = false;
    for (int k = 0; k < d; ++k) {
      pts[idx][static_cast<std::size_t>(k)] = lo + step * static_cast<double>(rem % grid_per_axis);
      rem /= grid_per_axis;
      if (std::abs(pts[idx][static_cast<std::size_t>(k)]) > 0.5 + 1e-12) outside = true;
    }
    vals[idx] = bump(pts[idx]);
    if (vals[idx] < 0.0) throw std::invalid_argument("BumpFieldModel: h must be nonnegative");
    if (outside && vals[idx] != 0.0) {
      throw std::invalid_argument("BumpFieldModel: h must vanish outside [-1/2, 1/2]^d");
    }
  }
  // Lipschitz check on grid neighbours along each axis and the diagonal.
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t stride = 1, k = 0; k <= static_cast<std::size_t>(d); ++k) {
      const std::size_t j = k < static_cast<std::size_t>(d) ? i + stride : i + (total - 1) / (grid_per_axis - 1);
      if (k < static_cast<std::size_t>(d)) stride *= grid_per_axis;
      if (j >= total) continue;
      double dist2 = 0.0;
      for (int c = 0; c < d; ++c) {
        const double diff = pts[i][static_cast<std::size_t>(c)] - pts[j][static_cast<std::size_t>(c)];
        dist2 += diff * diff;
      }
      if (std::abs(vals[i] - vals[j]) > (2.0 + 1e-9) * std::sqrt(dist2)) {
        throw std::invalid_argument("BumpFieldModel: h is not 2-Lipschitz on the sample grid");
      }
    }
  }
}

std::vector<std::int64_t> bump_cell(double spacing, std::span<const double> x) {
  std::vector<std::int64_t> cell(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    cell[k] = static_cast<std::int64_t>(std::llround(x[k] / spacing));
  }
  return cell;
}

std::uint32_t bump_cell_substream(std::span<const std::int64_t> cell) {
  if (cell.size() == 1) return static_cast<std::uint32_t>(cell[0] + 0x80000000LL);
  // FNV-1a over the coordinates.
  std::uint32_t h = 2166136261u;
  for (std::int64_t c : cell) {
    auto v = static_cast<std::uint64_t>(c);
    for (int b = 0; b < 8; ++b) {
      h ^= static_cast<std::uint32_t>(v & 0xFFu);
      h *= 16777619u;
      v >>= 8;
    }
  }
  return h;
}

double bump_height(const BumpFieldModel& model, std::span<const double> x) {
  const auto cell = bump_cell(model.spacing, x);
  std::vector<double> local(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    local[k] = x[k] / model.spacing - static_cast<double>(cell[k]);
  }
  return model.spacing * model.bump(local);
}

BumpFieldSample simulate_bump_field(const BumpFieldModel& model, double cube_side, double horizon,
                                    std::size_t n_steps, std::uint64_t path_id, std::uint64_t seed,
                                    const BumpFieldOptions& options) {
  model.hp.validate();
  require_positive(cube_side, "simulate_bump_field: cube side");
  require_positive(horizon, "simulate_bump_field: T");
  if (n_steps == 0) throw std::invalid_argument("simulate_bump_field: n_steps must be >= 1");
  const int d = model.hp.dim;
  const auto du = static_cast<std::size_t>(d);
  std::vector<double> origin = options.origin.empty() ? std::vector<double>(du, 0.0) : options.origin;
  if (origin.size() != du) throw std::invalid_argument("simulate_bump_field: origin has wrong dimension");

  std::size_t n_grid = options.grid_per_axis;
  if (n_grid == 0) n_grid = static_cast<std::size_t>(std::ceil(cube_side / model.spacing)) + 1;
  if (n_grid < 2) n_grid = 2;
  const double step = cube_side / static_cast<double>(n_grid - 1);
  if (step > model.spacing * (1.0 + 1e-12)) {
    throw std::invalid_argument("simulate_bump_field: spatial grid is coarser than the bump spacing");
  }
  std::size_t total = 1;
  for (int k = 0; k < d; ++k) total *= n_grid;
  if (total > 4'000'000) throw std::invalid_argument("simulate_bump_field: spatial grid too large");

  // Per-cell extreme heights over the grid points the cell owns.
  std::map<std::vector<std::int64_t>, std::pair<double, double>> cell_extremes;
  std::vector<double> x(du);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    for (std::size_t k = 0; k < du; ++k) {
      x[k] = origin[k] + step * static_cast<double>(rem % n_grid);
      rem /= n_grid;
    }
    const double hgt = bump_height(model, x);
    auto [it, inserted] = cell_extremes.try_emplace(bump_cell(model.spacing, x), hgt, hgt);
    if (!inserted) {
      it->second.first = std::max(it->second.first, hgt);
      it->second.second = std::min(it->second.second, hgt);
    }
  }

  const double dt = horizon / static_cast<double>(n_steps);
  std::vector<LogPathStepper> paths;
  std::vector<double> hmax, hmin;
  paths.reserve(cell_extremes.size());
  for (const auto& [cell, ext] : cell_extremes) {
    paths.emplace_back(RandomStream(seed, path_id, bump_cell_substream(cell)), model.hp.lambda,
                       model.hp.sigma, dt);
    hmax.push_back(ext.first);
    hmin.push_back(ext.second);
  }

  BumpFieldSample out;
  out.cells = paths.size();
  const auto field_extremes = [&](double& hi, double& lo) {
    hi = -kInf;
    lo = kInf;
    for (std::size_t c = 0; c < paths.size(); ++c) {
      const double e = std::exp(paths[c].x);
      hi = std::max(hi, hmax[c] * e);
      lo = std::min(lo, hmin[c] * e);
    }
  };
  double hi = 0.0, lo = 0.0;
  field_extremes(hi, lo);
  out.sup_diam = hi - lo;
  out.inf_field = lo;
  for (std::size_t k = 0; k < n_steps; ++k) {
    for (auto& p : paths) p.step();
    field_extremes(hi, lo);
    out.sup_diam = std::max(out.sup_diam, hi - lo);
    out.inf_field = std::min(out.inf_field, lo);
  }
  out.terminal_sup = hi;
  out.terminal_inf = lo;
  out.sup_field = 0.0;
  for (std::size_t c = 0; c < paths.size(); ++c) {
    out.sup_field = std::max(out.sup_field, hmax[c] * std::exp(paths[c].bridge_sup));
    if (options.keep_cell_maxima) out.cell_log_max.push_back(paths[c].bridge_sup);
  }
  return out;
}

double bump_pair_sup(const BumpFieldModel& model, std::span<const double> x,
                     std::span<const double> y, double horizon, std::size_t n_steps,
                     std::uint64_t path_id, std::uint64_t seed) {
  const auto cx = bump_cell(model.spacing, x);
  const auto cy = bump_cell(model.spacing, y);
  const double hx = bump_height(model, x);
  const double hy = bump_height(model, y);
  const double dt = horizon / static_cast<double>(n_steps);
  const auto& hp = model.hp;
  LogPathStepper px(RandomStream(seed, path_id, bump_cell_substream(cx)), hp.lambda, hp.sigma, dt);
  if (cx == cy) {
    for (std::size_t k = 0; k < n_steps; ++k) px.step();
    return std::abs(hx - hy) * std::exp(px.bridge_sup);
  }
  LogPathStepper py(RandomStream(seed, path_id, bump_cell_substream(cy)), hp.lambda, hp.sigma, dt);
  double best = std::abs(hx - hy);
  for (std::size_t k = 0; k < n_steps; ++k) {
    px.step();
    py.step();
    best = std::max(best, std::abs(hx * std::exp(px.x) - hy * std::exp(py.x)));
  }
  return best;
}

// ---------------------------------------------------------------------------
// SDE flows
// ---------------------------------------------------------------------------

namespace {

// Largest singular value of a rows x cols row-major matrix, by power iteration on M M^T.
double spectral_norm(const std::vector<double>& m, int rows, int cols) {
  if (rows == 1 || cols == 1) {
    double s = 0.0;
    for (double v : m) s += v * v;
    return std::sqrt(s);
  }
  std::vector<double> v(static_cast<std::size_t>(rows), 1.0), w(static_cast<std::size_t>(rows));
  std::vector<double> tmp(static_cast<std::size_t>(cols));
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int r = 0; r < rows; ++r) s += m[static_cast<std::size_t>(r * cols + c)] * v[static_cast<std::size_t>(r)];
      tmp[static_cast<std::size_t>(c)] = s;
    }
    double norm = 0.0;
    for (int r = 0; r < rows; ++r) {
      double s = 0.0;
      for (int c = 0; c < cols; ++c) s += m[static_cast<std::size_t>(r * cols + c)] * tmp[static_cast<std::size_t>(c)];
      w[static_cast<std::size_t>(r)] = s;
      norm += s * s;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (int r = 0; r < rows; ++r) v[static_cast<std::size_t>(r)] = w[static_cast<std::size_t>(r)] / norm;
    if (std::abs(norm - lambda) <= 1e-14 * norm) {
      lambda = norm;
      break;
    }
    lambda = norm;
  }
  return std::sqrt(lambda);
}

}  // namespace

void SdeFlowModel::validate(std::size_t sample_pairs) const {
  if (dim < 1 || noise_dim < 1) throw std::invalid_argument("SdeFlowModel: dimensions must be >= 1");
  if (!drift || !diffusion) throw std::invalid_argument("SdeFlowModel: drift or diffusion missing");
  if (!(b_lip >= 0.0 && a_lip >= 0.0)) throw std::invalid_argument("SdeFlowModel: negative Lipschitz constant");
  const auto d = static_cast<std::size_t>(dim);
  const auto m = static_cast<std::size_t>(noise_dim);
  std::mt19937_64 gen(0xbb67ae8584caa73bULL);
  std::uniform_real_distribution<double> coord(-5.0, 5.0);
  std::vector<double> x(d), y(d), bx(d), by(d), sx(d * m), sy(d * m), diff(d * m);
  for (std::size_t s = 0; s < sample_pairs; ++s) {
    double dist2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      x[k] = coord(gen);
      // Mix far and near pairs; near pairs probe the local derivative.
      y[k] = (s % 2 == 0) ? coord(gen) : x[k] + 1e-3 * (coord(gen) / 5.0);
      dist2 += (x[k] - y[k]) * (x[k] - y[k]);
    }
    const double dist = std::sqrt(dist2);
    if (dist == 0.0) continue;
    drift(x, bx);
    drift(y, by);
    double db2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) db2 += (bx[k] - by[k]) * (bx[k] - by[k]);
    if (std::sqrt(db2) > b_lip * dist * (1.0 + 1e-6) + 1e-15) {
      throw std::invalid_argument("SdeFlowModel '" + name + "': drift exceeds its Lipschitz constant");
    }
    diffusion(x, sx);
    diffusion(y, sy);
    for (std::size_t k = 0; k < d * m; ++k) diff[k] = sx[k] - sy[k];
    // ||A(x, y)|| = ||(S(x) - S(y))(S(x) - S(y))^T|| = s_max^2.
    if (spectral_norm(diff, dim, noise_dim) > a_lip * dist * (1.0 + 1e-6) + 1e-15) {
      throw std::invalid_argument("SdeFlowModel '" + name + "': diffusion exceeds its Lipschitz constant");
    }
  }
}

SdeFlowModel sine_model() {
  SdeFlowModel m;
  m.name = "sine";
  m.drift = [](std::span<const double> x, std::span<double> out) { out[0] = -std::sin(x[0]); };
  m.diffusion = [](std::span<const double> x, std::span<double> out) { out[0] = 1.0 + 0.5 * std::sin(x[0]); };
  m.b_lip = 1.0;
  m.a_lip = 0.5;
  return m;
}

SdeFlowModel tanh_model() {
  SdeFlowModel m;
  m.name = "tanh";
  m.drift = [](std::span<const double> x, std::span<double> out) { out[0] = 0.5 * std::tanh(x[0]); };
  m.diffusion = [](std::span<const double> x, std::span<double> out) { out[0] = 1.0 + 0.5 * std::sin(x[0]); };
  m.b_lip = 0.5;
  m.a_lip = 0.5;
  return m;
}

SdeFlowModel ou_model(double sigma) {
  SdeFlowModel m;
  m.name = "ou";
  m.drift = [](std::span<const double> x, std::span<double> out) { out[0] = -x[0]; };
  m.diffusion = [sigma](std::span<const double>, std::span<double> out) { out[0] = sigma; };
  m.b_lip = 1.0;
  m.a_lip = 0.0;
  return m;
}

SdeFlowModel zero_model(int dim) {
  SdeFlowModel m;
  m.name = "zero";
  m.dim = dim;
  m.noise_dim = 1;
  m.drift = [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
  m.diffusion = [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
  return m;
}

HParams lipschitz_to_H_params(const SdeFlowModel& model) {
  if (!(model.a_lip > 0.0)) {
    throw std::invalid_argument("lipschitz_to_H_params: a_lip must be > 0 (sigma = a_lip)");
  }
  HParams hp;
  hp.sigma = model.a_lip;
  hp.lambda = model.b_lip + 0.5 * (model.dim - 1) * model.a_lip * model.a_lip;
  hp.cbar = 2.0;
  hp.dim = model.dim;
  return hp;
}

double PathEnsemble::pair_sup_distance(std::size_t i, std::size_t j) const {
  double best = 0.0;
  for (std::size_t t = 0; t < time_grid.size(); ++t) {
    double s = 0.0;
    for (int k = 0; k < dim; ++k) {
      const double diff = at(t, i, k) - at(t, j, k);
      s += diff * diff;
    }
    best = std::max(best, s);
  }
  return std::sqrt(best);
}

double sde_max_stable_step(const SdeFlowModel& model) {
  const double scale = std::max(model.b_lip, model.a_lip * model.a_lip);
  return scale > 0.0 ? 0.1 / scale : kInf;
}

namespace {

struct SdeRun {
  std::vector<double> values;
  std::vector<double> sup_norm;
  bool nonfinite = false;
  bool order_violation = false;
};

SdeRun run_euler(const SdeFlowModel& model, std::span<const double> x0, std::size_t points,
                 const std::vector<double>& increments, std::size_t n_steps, double dt,
                 bool store_path, const std::vector<std::size_t>& order) {
  const auto d = static_cast<std::size_t>(model.dim);
  const auto m = static_cast<std::size_t>(model.noise_dim);
  SdeRun run;
  std::vector<double> state(x0.begin(), x0.end());
  std::vector<double> b(d), s(d * m);
  run.sup_norm.assign(points, 0.0);
  const auto record = [&]() {
    for (std::size_t p = 0; p < points; ++p) {
      double n2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) n2 += state[p * d + k] * state[p * d + k];
      run.sup_norm[p] = std::max(run.sup_norm[p], std::sqrt(n2));
    }
    if (!order.empty()) {
      for (std::size_t r = 1; r < order.size(); ++r) {
        if (!(state[order[r - 1]] < state[order[r]])) run.order_violation = true;
      }
    }
  };
  record();
  if (store_path) run.values.insert(run.values.end(), state.begin(), state.end());
  for (std::size_t step = 0; step < n_steps; ++step) {
    const double* dw = &increments[step * m];
    for (std::size_t p = 0; p < points; ++p) {
      std::span<double> xp(&state[p * d], d);
      model.drift(xp, b);
      model.diffusion(xp, s);
      for (std::size_t k = 0; k < d; ++k) {
        double noise = 0.0;
        for (std::size_t i = 0; i < m; ++i) noise += s[k * m + i] * dw[i];
        xp[k] += b[k] * dt + noise;
      }
    }
    for (double v : state) {
      if (!std::isfinite(v)) {
        run.nonfinite = true;
        return run;
      }
    }
    record();
    if (store_path) run.values.insert(run.values.end(), state.begin(), state.end());
  }
  if (!store_path) run.values = state;
  return run;
}

}  // namespace

PathEnsemble simulate_sde_flow(const SdeFlowModel& model, std::span<const double> initial_points,
                               double horizon, std::size_t n_steps, std::uint64_t path_id,
                               std::uint64_t seed, const SdeOptions& options) {
  if (model.dim < 1 || model.noise_dim < 1 || !model.drift || !model.diffusion) {
    throw std::invalid_argument("simulate_sde_flow: incomplete model");
  }
  require_positive(horizon, "simulate_sde_flow: T");
  if (n_steps == 0) throw std::invalid_argument("simulate_sde_flow: n_steps must be >= 1");
  const auto d = static_cast<std::size_t>(model.dim);
  const auto m = static_cast<std::size_t>(model.noise_dim);
  if (initial_points.empty() || initial_points.size() % d != 0) {
    throw std::invalid_argument("simulate_sde_flow: initial points must be a nonempty points x dim array");
  }
  double dt = horizon / static_cast<double>(n_steps);
  if (options.enforce_stability && dt > sde_max_stable_step(model)) {
    throw std::invalid_argument("simulate_sde_flow: step exceeds 0.1 / max(b_lip, a_lip^2)");
  }
  const std::size_t points = initial_points.size() / d;

  std::vector<std::size_t> order;
  if (options.check_order && d == 1 && points > 1) {
    order.resize(points);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return initial_points[a] < initial_points[b]; });
    order.erase(std::unique(order.begin(), order.end(),
                            [&](std::size_t a, std::size_t b) {
                              return initial_points[a] == initial_points[b];
                            }),
                order.end());
  }

  // Base increments; refinement splits each through its Brownian bridge midpoint.
  std::vector<double> increments(n_steps * m);
  {
    RandomStream stream(seed, path_id, 0);
    const double sd = std::sqrt(dt);
    for (double& v : increments) v = sd * stream.next_normal();
  }

  PathEnsemble out;
  out.initial_points.assign(initial_points.begin(), initial_points.end());
  out.points = points;
  out.dim = model.dim;
  out.seed = seed;
  out.path_id = path_id;
  SdeRun run;
  std::size_t steps = n_steps;
  for (int level = 0;; ++level) {
    run = run_euler(model, initial_points, points, increments, steps, dt, options.store_path, order);
    if (run.nonfinite || !run.order_violation || level >= options.max_refinements) break;
    RandomStream stream(seed, path_id, static_cast<std::uint32_t>(level + 1));
    const double half_sd = 0.5 * std::sqrt(dt);
    std::vector<double> finer(2 * steps * m);
    for (std::size_t k = 0; k < steps; ++k) {
      for (std::size_t i = 0; i < m; ++i) {
        const double w = increments[k * m + i];
        const double first = 0.5 * w + half_sd * stream.next_normal();
        finer[(2 * k) * m + i] = first;
        finer[(2 * k + 1) * m + i] = w - first;
      }
    }
    increments = std::move(finer);
    steps *= 2;
    dt *= 0.5;
    ++out.refinements;
  }
  out.n_steps = steps;
  out.nonfinite = run.nonfinite;
  out.order_violation = run.order_violation;
  out.sup_norm = std::move(run.sup_norm);
  out.values = std::move(run.values);
  if (options.store_path) {
    out.time_grid.resize(out.values.size() / (points * d));
    for (std::size_t t = 0; t < out.time_grid.size(); ++t) out.time_grid[t] = static_cast<double>(t) * dt;
  } else {
    out.time_grid = {horizon};
  }
  return out;
}

// ---------------------------------------------------------------------------

double log_crossing_prob(double a, double mu, double horizon) {
  require_positive(horizon, "crossing_prob: T");
  if (a <= 0.0) return 0.0;
  const double rt = std::sqrt(horizon);
  const double first = numerics::log_norm_sf((a - mu * horizon) / rt);
  const double second = 2.0 * mu * a + numerics::log_norm_sf((a + mu * horizon) / rt);
  return numerics::log_add_exp(first, second);
}

double crossing_prob(double a, double mu, double horizon) {
  return std::min(1.0, std::exp(log_crossing_prob(a, mu, horizon)));
}

}  // namespace flowchain::flows
