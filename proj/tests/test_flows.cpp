#include <doctest.h>

#include <cmath>
#include <vector>

#include "flowchain/flows.hpp"
#include "flowchain/numerics.hpp"
#include "oracles.hpp"

using namespace flowchain;
using namespace flowchain::flows;

namespace {

HParams make_hp(double lambda, double sigma, double cbar, int dim) {
  HParams hp;
  hp.lambda = lambda;
  hp.sigma = sigma;
  hp.cbar = cbar;
  hp.dim = dim;
  return hp;
}

}  // namespace

TEST_CASE("crossing probability against the reflection formula") {
  CHECK(crossing_prob(-1.0, 0.3, 2.0) == 1.0);
  CHECK(crossing_prob(1.0, 0.0, 2.0) == doctest::Approx(2.0 * oracle::phibar(1.0 / std::sqrt(2.0))).epsilon(1e-14));
  CHECK(crossing_prob(1.0, 1.0, 1.0) == doctest::Approx(0.5 + std::exp(2.0) * oracle::phibar(2.0)).epsilon(1e-14));
  CHECK(crossing_prob(1.0, 1.0, 1.0) == doctest::Approx(0.6681).epsilon(1e-3));
  for (double mu : {-2.0, -0.5, 0.0, 0.7}) {
    for (double a : {0.1, 1.0, 4.0}) {
      CHECK(crossing_prob(a, mu, 1.7) == doctest::Approx(oracle::crossing(a, mu, 1.7)).epsilon(1e-12));
    }
  }
  // Deep tail in logs.
  CHECK(log_crossing_prob(40.0, 0.0, 1.0) == doctest::Approx(std::log(2.0) + numerics::log_norm_sf(40.0)).epsilon(1e-12));
}

TEST_CASE("bridge supremum has the continuous-time law") {
  const double lambda = 0.5, sigma = 1.0, T = 1.0, a = 1.0;
  const int n = 200000;
  int hits_bridge = 0, hits_grid = 0;
  for (int p = 0; p < n; ++p) {
    RandomStream s1(21, p), s2(21, p);
    const auto b = simulate_log_path(s1, lambda, sigma, T, 8, SupMode::bridge);
    const auto g = simulate_log_path(s2, lambda, sigma, T, 8, SupMode::grid);
    REQUIRE(g.running_max <= b.running_max);
    REQUIRE(g.terminal == b.terminal);
    hits_bridge += b.running_max >= a;
    hits_grid += g.running_max >= a;
  }
  const double p_ref = oracle::crossing(a / sigma, lambda / sigma, T);
  const double se = std::sqrt(p_ref * (1 - p_ref) / n);
  CHECK(std::abs(static_cast<double>(hits_bridge) / n - p_ref) < 4.0 * se);
  // An 8-step grid misses a visible share of crossings.
  CHECK(static_cast<double>(hits_grid) / n < p_ref - 10.0 * se);
}

TEST_CASE("linear flow") {
  LinearFlowModel m{make_hp(0.0, 1.0, 1.0, 3)};
  LinearFlowOptions still;
  still.zero_noise = true;
  const auto s = simulate_linear(m, 0.2, 1.0, 64, 0, 0, still);
  CHECK(s.sup_diam == doctest::Approx(std::sqrt(3.0) * 0.2).epsilon(1e-15));
  const auto r = simulate_linear(m, 0.2, 1.0, 64, 5, 9);
  CHECK(r.sup_diam == doctest::Approx(std::sqrt(3.0) * 0.2 * std::exp(r.log_sup)).epsilon(1e-14));
  CHECK(r.modulus(0.01) == doctest::Approx(0.01 * std::exp(r.log_sup)).epsilon(1e-14));
  CHECK(log_linear_sup_diam(r) == doctest::Approx(std::log(r.sup_diam)).epsilon(1e-14));
  CHECK(r.log_sup >= 0.0);
  CHECK(r.log_sup >= r.terminal_log);
}

TEST_CASE("bump functions") {
  BumpFieldModel m;
  m.hp = make_hp(0.0, 1.0, 1.0, 2);
  m.spacing = 0.1;
  CHECK_NOTHROW(m.validate());
  // The product of one-dimensional tents has Euclidean Lipschitz constant above 2 in d = 2.
  m.bump = [](std::span<const double> x) {
    double v = 1.0;
    for (double xi : x) v *= std::max(0.0, 1.0 - 2.0 * std::abs(xi));
    return v;
  };
  CHECK_THROWS(m.validate());
  m.bump = [](std::span<const double> x) { return std::max(0.0, 1.0 - std::abs(x[0])); };
  CHECK_THROWS(m.validate());  // support too wide
}

TEST_CASE("bump field") {
  BumpFieldModel m;
  m.hp = make_hp(0.0, 1.0, 1.0, 1);
  m.spacing = 0.1;
  const std::vector<double> centre{0.3};
  CHECK(bump_height(m, centre) == doctest::Approx(0.1));
  CHECK(bump_cell(0.1, centre)[0] == 3);
  // Same-cell pair factorises to |h(x) - h(y)| exp(sup X).
  const std::vector<double> x{0.31}, y{0.33};
  const double s = bump_pair_sup(m, x, y, 1.0, 64, 4, 2);
  const double hx = bump_height(m, x), hy = bump_height(m, y);
  CHECK(s >= std::abs(hx - hy));
  // Disjoint cells carry independent Brownian motions.
  const int n = 10000;
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  BumpFieldOptions opt;
  opt.keep_cell_maxima = true;
  for (int p = 0; p < n; ++p) {
    const auto f = simulate_bump_field(m, 0.2, 1.0, 16, p, 13, opt);
    REQUIRE(f.cell_log_max.size() >= 2);
    const double a = f.cell_log_max[0], b = f.cell_log_max[1];
    sa += a;
    sb += b;
    saa += a * a;
    sbb += b * b;
    sab += a * b;
  }
  const double cov = sab / n - sa / n * sb / n;
  const double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  CHECK(std::abs(corr) < 0.05);
  // Grid step must not exceed the spacing.
  BumpFieldOptions coarse;
  coarse.grid_per_axis = 2;
  CHECK_THROWS(simulate_bump_field(m, 1.0, 1.0, 16, 0, 0, coarse));
}

TEST_CASE("single cell at its centre reduces to the linear statistic") {
  BumpFieldModel m;
  m.hp = make_hp(0.0, 1.0, 1.0, 1);
  m.spacing = 1.0;
  BumpFieldOptions opt;
  opt.keep_cell_maxima = true;
  const auto f = simulate_bump_field(m, 1e-3, 1.0, 32, 0, 0, opt);
  REQUIRE(f.cells == 1);
  CHECK(f.sup_field <= std::exp(f.cell_log_max[0]) + 1e-12);
  CHECK(f.sup_field >= (1.0 - 2e-3) * std::exp(f.cell_log_max[0]));
}

TEST_CASE("SDE models and Lipschitz parameters") {
  const auto sine = sine_model();
  CHECK_NOTHROW(sine.validate());
  const HParams hp = lipschitz_to_H_params(sine);
  CHECK(hp.lambda == doctest::Approx(1.0));
  CHECK(hp.sigma == doctest::Approx(0.5));
  CHECK(hp.cbar == doctest::Approx(2.0));
  SdeFlowModel three = zero_model(3);
  three.a_lip = 1.0;
  CHECK(lipschitz_to_H_params(three).lambda == doctest::Approx(1.0));
  CHECK_THROWS(lipschitz_to_H_params(ou_model(1.0)));
  SdeFlowModel lying = sine_model();
  lying.b_lip = 0.5;
  CHECK_THROWS(lying.validate());
  CHECK_NOTHROW(tanh_model().validate());
}

TEST_CASE("SDE flow simulation") {
  const std::vector<double> x0{-1.0, 0.0, 0.5, 2.0};
  const auto id = simulate_sde_flow(zero_model(1), x0, 1.0, 50, 0, 0);
  for (std::size_t t = 0; t < id.time_grid.size(); ++t) {
    for (std::size_t i = 0; i < x0.size(); ++i) REQUIRE(id.at(t, i) == x0[i]);
  }
  const auto e = simulate_sde_flow(sine_model(), x0, 1.0, 200, 3, 8);
  for (std::size_t i = 0; i < x0.size(); ++i) CHECK(e.at(0, i) == x0[i]);
  for (std::size_t t = 1; t < e.time_grid.size(); ++t) REQUIRE(e.time_grid[t] > e.time_grid[t - 1]);
  CHECK(e.time_grid.back() == doctest::Approx(1.0));
  CHECK_FALSE(e.nonfinite);
  CHECK(e.pair_sup_distance(1, 2) >= 0.5);
  // Shared noise keeps one-dimensional flows ordered.
  int violations = 0;
  for (int p = 0; p < 500; ++p) {
    const auto f = simulate_sde_flow(sine_model(), std::vector<double>{0.0, 0.01}, 1.0, 100, p, 1);
    violations += f.order_violation ? 1 : 0;
  }
  CHECK(violations == 0);
  // OU mean decays like e^{-T}.
  double mean = 0.0;
  const int n = 4000;
  for (int p = 0; p < n; ++p) {
    SdeOptions o;
    o.store_path = false;
    mean += simulate_sde_flow(ou_model(0.3), std::vector<double>{1.0}, 1.0, 200, p, 2, o).values.back();
  }
  CHECK(mean / n == doctest::Approx(std::exp(-1.0)).epsilon(0.02));
}
