#include <doctest.h>

#include <cmath>
#include <random>

#include "flowchain/rates.hpp"
#include "oracles.hpp"

using namespace flowchain;
using namespace flowchain::rates;

namespace {

HParams make_hp(double lambda, double sigma, double cbar, int dim) {
  HParams hp;
  hp.lambda = lambda;
  hp.sigma = sigma;
  hp.cbar = cbar;
  hp.dim = dim;
  return hp;
}

DispersionParams make_dp(double lambda, double sigma, int dim, double delta, double A, double B) {
  DispersionParams dp;
  dp.hp = make_hp(lambda, sigma, 1.0, dim);
  dp.delta = delta;
  dp.a_diff = A;
  dp.b_drift = B;
  return dp;
}

}  // namespace

TEST_CASE("small-ball rate spot values") {
  const HParams hp = make_hp(0.0, 1.0, 1.0, 2);
  CHECK(small_ball_rate(hp, 1.0) == 0.0);
  CHECK(small_ball_rate(hp, 1.5) == doctest::Approx(1.0));
  CHECK(small_ball_rate(hp, 3.0) == doctest::Approx(4.5));
  CHECK(small_ball_rate(hp, 2.0) == doctest::Approx(2.0));
  CHECK(small_ball_rate_homeo(make_hp(0.0, 1.0, 1.0, 3), 3.0) == doctest::Approx(4.5));
  const HParams one = make_hp(0.5, 2.0, 1.0, 1);
  CHECK(small_ball_rate_homeo(one, 0.4) == 0.0);
  CHECK(small_ball_rate_homeo(one, 1.5) == doctest::Approx(1.0 / 8.0));
}

TEST_CASE("small-ball rate matches the piecewise oracle") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int draw = 0; draw < 200; ++draw) {
    const HParams hp = make_hp(2.0 * U(gen), 0.2 + 2.0 * U(gen), 1.0, 1 + static_cast<int>(4 * U(gen)));
    const double g = 10.0 * U(gen);
    CHECK(small_ball_rate(hp, g) == doctest::Approx(oracle::rate_I(hp.lambda, hp.sigma, hp.dim, g)).epsilon(1e-13));
  }
}

TEST_CASE("gamma0, lambda0 and K") {
  const auto up = make_dp(0.0, 1.0, 2, 1.0, 1.0, 0.0);
  CHECK(lambda0(up) == doctest::Approx(0.0));
  const auto g_up = gamma0_detail(up);
  CHECK(g_up.upper_branch);
  CHECK(g_up.value == doctest::Approx(2.0));
  CHECK(small_ball_rate(up.hp, 2.0) == doctest::Approx(2.0 * up.delta));
  CHECK(growth_constant_K(up) == doctest::Approx(2.0));

  const auto lowb = make_dp(0.0, 1.0, 2, 0.5, 1.0, 0.0);
  CHECK(lambda0(lowb) == doctest::Approx(2.0));
  const auto g_low = gamma0_detail(lowb);
  CHECK_FALSE(g_low.upper_branch);
  CHECK(g_low.value == doctest::Approx(4.0 / 3.0));
  CHECK(growth_constant_K(lowb) == doctest::Approx(std::sqrt(4.0 / 3.0)));

  // delta > d lands on the upper branch.
  const auto wide = make_dp(0.0, 1.0, 2, 2.5, 1.0, 0.0);
  CHECK(gamma0_detail(wide).upper_branch);
  CHECK(gamma0(wide) == doctest::Approx(oracle::gamma0_root(0.0, 1.0, 2, 2.5)).epsilon(1e-10));

  // Breakpoint: lambda == lambda0 takes the upper branch.
  auto tie = make_dp(0.0, 1.0, 2, 1.0, 1.0, 0.0);
  CHECK(gamma0_detail(tie).upper_branch);

  CHECK(growth_constant_homeo(make_dp(0.0, 1.0, 2, 2.0, 1.0, 0.0)).K == doctest::Approx(2.0));
  const auto deg = growth_constant_homeo(make_dp(0.0, 1.0, 1, 1.0, 1.0, 0.3));
  CHECK(deg.degenerate);
  CHECK(deg.K == doctest::Approx(0.3));
  const auto same = make_dp(0.3, 0.7, 3, 1.5, 1.2, 0.1);
  CHECK(growth_constant_homeo(same).K == doctest::Approx(growth_constant_K(same)).epsilon(1e-15));

  auto neg = make_dp(0.0, 1.0, 2, 1.0, 1.0, -2.0);
  const auto nb = negative_drift_growth_bound(neg);
  CHECK(nb.value == doctest::Approx(0.5));
  CHECK(nb.valid);
  neg.b_drift = -1e9;
  CHECK(negative_drift_growth_bound(neg).value < 1e-8);
}

TEST_CASE("gamma0 closed form against an independent root") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int draw = 0; draw < 300; ++draw) {
    const int d = 1 + static_cast<int>(3 * U(gen));
    auto dp = make_dp(2.0 * U(gen), 0.3 + 1.5 * U(gen), d, 0.05 + (d - 0.1) * U(gen), 0.5 + U(gen), U(gen) - 0.5);
    const double ref = oracle::gamma0_root(dp.hp.lambda, dp.hp.sigma, d, dp.delta);
    const auto g = gamma0_detail(dp);
    CHECK_FALSE(g.fallback);
    CHECK(g.closed_form == doctest::Approx(ref).epsilon(1e-10));
    CHECK(growth_constant_K(dp) ==
          doctest::Approx(dp.b_drift + dp.a_diff * std::sqrt(2.0 * ref * dp.delta)).epsilon(1e-9));
  }
}

TEST_CASE("one-point rate and Schilder infimum") {
  CHECK(one_point_rate(3.0, 1.0, 1.0) == doctest::Approx(-2.0));
  CHECK(one_point_rate(0.5, 1.0, -1.0) == doctest::Approx(-1.0));
  CHECK(one_point_rate(0.5, 1.0, 1.0) == 0.0);
  CHECK(schilder_infimum(2.0, 1.0, 1.0) == doctest::Approx(4.5));
  CHECK(schilder_infimum(1.0, 1.0, 3.0) == doctest::Approx(6.0));
  CHECK(schilder_infimum(2.0, 1.0, 2.0) == doctest::Approx(8.0));
  for (const auto& [k, A, Bt] : std::vector<std::tuple<double, double, double>>{{2, 1, 1}, {1, 1, 3}, {1, 2, 0.5}}) {
    const double brute = oracle::schilder_bruteforce(k, A, Bt, 200);
    CHECK(schilder_infimum(k, A, Bt) <= brute + 1e-12);
    CHECK(schilder_infimum(k, A, Bt) >= 0.95 * brute);
  }
}

TEST_CASE("Brownian range density") {
  // Overlap region: the library's small-r form against Feller's series.
  for (double r : {0.5, 1.0, 2.0, 3.0, 5.0}) {
    CHECK(bm_range_density(r) == doctest::Approx(oracle::range_density_feller(r)).epsilon(1e-10));
  }
  CHECK(bm_range_density(1e-3) >= 0.0);
  CHECK(bm_range_density(0.0) == 0.0);
  const double mass = oracle::simpson([](double r) { return bm_range_density(r); }, 0.0, 12.0, 24000);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
  const double mean = oracle::simpson([](double r) { return r * bm_range_density(r); }, 0.0, 12.0, 24000);
  CHECK(mean == doctest::Approx(2.0 * std::sqrt(2.0 / M_PI)).epsilon(1e-8));
  for (double u = 0.0; u <= 5.0; u += 0.5) {
    const auto t = bm_range_tail(u);
    CHECK(t.numeric_tail <= t.analytic_dominator);
    if (u > 0.0) CHECK(t.numeric_tail == doctest::Approx(t.series_tail).epsilon(1e-7));
  }
}

TEST_CASE("hitting Laplace transform") {
  CHECK(hitting_laplace(0.5, make_hp(0.0, 1.0, 1.0, 1), std::exp(1.0)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(hitting_laplace(1.5, make_hp(1.0, 1.0, 1.0, 1), std::exp(1.0)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(hitting_laplace(1e-14, make_hp(0.3, 1.0, 1.0, 1), 5.0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS(hitting_laplace(1.0, make_hp(0.0, 1.0, 2.0, 1), 1.5));
}

TEST_CASE("diffusive rate and its finite-T bound") {
  CHECK(diff_flow_rate(0.0, 1.0) == 0.0);
  CHECK(diff_flow_rate(2.0, 1.0) == doctest::Approx(-2.0));
  DiffFlowParams p;
  p.hp = make_hp(0.0, 1.0, 1.0, 1);
  p.xi = 1.0;
  p.z = 1e3;
  p.eps = 1e-4;
  p.u_hat = 1.0;
  const auto b = diff_flow_finite_bound(p, 1e3);
  CHECK_FALSE(b.vacuous);
  CHECK(b.per_T == doctest::Approx(-0.5).epsilon(0.10));
  // Smaller eps tightens the bound.
  DiffFlowParams q = p;
  q.eps = 1e-6;
  CHECK(diff_flow_finite_bound(q, 1e3).log_bound <= b.log_bound);
  // Short horizons give no information.
  CHECK(diff_flow_finite_bound(p, 1.0).vacuous);
  p.xi = 0.0;
  CHECK_THROWS(diff_flow_finite_bound(p, 1e3));
  const auto opt = optimize_diff_flow_z(make_hp(0.0, 1.0, 1.0, 1), 1.0, 1e-4, 1.0, 1e3);
  CHECK(opt.bound.log_bound <= b.log_bound + 1e-9);
}

TEST_CASE("bump-field rate") {
  const HParams hp = make_hp(0.0, 1.0, 1.0, 2);
  CHECK(bump_field_rate(1.5, 2.0, hp) == doctest::Approx(-1.0));
  for (double g = 0.05; g < 1.0; g += 0.05) CHECK(bump_field_rate_capped(g, 2.0, hp) == 0.0);
  for (double g = 1.0; g < 2.0; g += 0.01) {
    CHECK(bump_field_rate_capped(g, 2.0, hp) == doctest::Approx(-oracle::rate_I(0, 1, 2, g)).epsilon(1e-12));
  }
}
