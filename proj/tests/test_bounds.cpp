#include <cmath>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "doctest.h"
#include "pileup/bounds.hpp"
#include "pileup/error.hpp"
#include "pileup/kernel.hpp"

using namespace pileup;

TEST_CASE("scale constants") {
  const ScaleFrame f = make_frame_alpha(256, 8.0, make_power(2.0));
  const ContinuumSolution c = minimize_continuum(f);
  const ScaleConstants k = scale_constants(f, c.rho);
  CHECK(k.q2_sup == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(k.q_alpha == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(k.A_scale == doctest::Approx(8.0 / 256.0 * std::log(256.0 / 8.0 * 7.0)).epsilon(1e-12));
  CHECK(k.A_scale <= 1.0);

  const ScaleFrame g = make_frame_alpha(16, 16.0, make_power(2.0));
  const ScaleConstants kg = scale_constants(g, minimize_continuum(g).rho);
  CHECK(kg.A_scale == std::min(std::log(1.0 + kg.q2_sup), 1.0));
  CHECK(to_json(kg).contains("A_scale"));
}

TEST_CASE("quantiles") {
  const Grid g{-1.0, 2.0, 300};
  const GridDensity u = uniform_density(g, 0.0, 1.0);
  const Eigen::VectorXd q = quantile_points(u, 4);
  REQUIRE(q.size() == 5);
  for (int i = 0; i <= 4; ++i) CHECK(std::abs(q[i] - 0.25 * i) <= 1e-12);
  const Eigen::VectorXd mid = quantile_init(u, 4);
  REQUIRE(mid.size() == 4);
  CHECK(mid[0] == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(density_mass(u, 0.25, 0.5) == doctest::Approx(0.25).epsilon(1e-14));

  const ScaleFrame f = make_frame_alpha(128, 4.0, make_power(2.0));
  const ContinuumSolution c = minimize_continuum(f);
  const double hmax = c.rho.max_density();
  const Eigen::VectorXd x = quantile_points(c.rho, 128);
  for (int i = 1; i <= 128; ++i) {
    CHECK(std::abs(density_mass(c.rho, x[i - 1], x[i]) - 1.0 / 128.0) <= 1e-10);
    CHECK(x[i] - x[i - 1] >= 1.0 / (128.0 * hmax));
  }
  for (int i = 0; i <= 128; ++i) CHECK(std::abs(x[i] + x[128 - i]) <= c.rho.grid.h());
}

TEST_CASE("diagonal energies") {
  const Grid g{-1.0, 2.0, 300};
  const GridDensity u = uniform_density(g, 0.0, 1.0);
  const ScaleFrame f = make_frame_alpha(2, 3.0, make_power(2.0));
  const Eigen::VectorXd xhat = quantile_points(u, 1);
  const DiagonalEnergies d = diagonal_energies(xhat, u, f, 7.0);

  boost::math::quadrature::tanh_sinh<double> ts;
  // (1/l^2) int int_{[0,1]^2} K_alpha(x - y) = 2 int_0^1 (1 - t) K_alpha(t) dt
  const double self = 2.0 * ts.integrate([](double t) { return (1.0 - t) * kernel_alpha(t, 3.0); }, 0.0, 1.0, 1e-14);
  CHECK(d.D_phi == doctest::Approx(0.5 * self).epsilon(1e-8));
  CHECK(d.D_n == doctest::Approx(kernel_alpha(1.0, 3.0)).epsilon(1e-14));
  CHECK(d.pass_order);

  const ScaleFrame h = make_frame_alpha(256, 8.0, make_power(2.0));
  const ContinuumSolution c = minimize_continuum(h);
  const DiagonalEnergies e = diagonal_energies(quantile_points(c.rho, 256), c.rho, h, 7.0);
  CHECK(e.pass_order);
  CHECK(e.pass_gap);
  CHECK(e.max_mass_error <= 1e-10);
  CHECK(e.D_n <= 2.0 * e.D_phi);
  CHECK(e.scale == doctest::Approx(8.0 / 256.0 * std::log(7.0 * 256.0 / 8.0)));
}

TEST_CASE("theorem checks") {
  for (int n : {64, 128}) {
    CAPTURE(n);
    const ScaleFrame f = make_frame_alpha(n, 8.0, make_power(2.0));
    const SolvedPair s = solve_pair(f);
    const BoundsReport r = verify_theorems(s);
    CHECK(r.pass_sign);
    CHECK(r.pass_raw_sign);
    CHECK(r.energy_diff == doctest::Approx(r.E_disc - r.E_cont).epsilon(1e-12));
    CHECK(r.potential_diff == doctest::Approx(r.F_disc - r.F_cont).epsilon(1e-12));
    CHECK(r.raw_energy_diff == doctest::Approx(r.gamma * r.energy_diff).epsilon(1e-12));
    CHECK(r.FD == doctest::Approx(r.gamma * r.F_disc).epsilon(1e-12));
    CHECK(r.ratio_E == doctest::Approx(std::abs(r.energy_diff) / r.A_scale).epsilon(1e-12));
    CHECK(r.ratio_F == doctest::Approx(-r.potential_diff / std::sqrt(r.A_scale)).epsilon(1e-12));
    CHECK(r.num_tol == doctest::Approx(1e-4 * std::max(1.0, std::abs(r.F_cont))));
    CHECK_FALSE(r.pass_ratio.has_value());
    CHECK(to_json(r).contains("ratio_E"));
  }

  const SolvedPair tiny = solve_pair(make_frame_alpha(2, 1.0, make_power(2.0)));
  const BoundsReport t = verify_theorems(tiny);
  CHECK(std::isfinite(t.ratio_E));

  SolvedPair broken = tiny;
  broken.discrete.report.converged = false;
  CHECK_THROWS_AS(verify_theorems(broken), DomainError);
}

TEST_CASE("ratio stability") {
  CHECK(ratio_stability({1.0, 2.0, 5.0}).pass);
  CHECK(ratio_stability({1.0, 2.0, 5.0}).spread == doctest::Approx(5.0));
  CHECK_FALSE(ratio_stability({1.0, 20.0}).pass);
  CHECK(ratio_stability({3.0}).pass);
  CHECK(ratio_stability({}).pass);
  CHECK(ratio_stability({1.0, 20.0}, 25.0).pass);
}

TEST_CASE("robin bracket") {
  const RobinBracket r = robin_bracket(64, 1.0, make_power(2.0));
  CHECK(r.lower == doctest::Approx(-r.FC / 63.0).epsilon(1e-14));
  CHECK(r.upper == doctest::Approx(-r.FD / 64.0).epsilon(1e-14));
  CHECK(r.width == doctest::Approx(r.upper - r.lower).epsilon(1e-14));
  CHECK(std::abs(r.width - r.width_decomposed) <= 1e-12 * std::max(1.0, std::abs(r.width)));
  CHECK(r.ordered);
  CHECK(r.lower <= r.upper);
  CHECK(r.alpha == doctest::Approx(std::cbrt(192.0)).epsilon(1e-10));
  CHECK(to_json(r).contains("ht19_ratio"));
}

TEST_CASE("improvement factor") {
  const PotentialPtr p1 = make_power(1.0);
  double prev = 1e300;
  for (int n = 16; n <= 4096; n *= 2) {
    const double v = improvement_factor(n, *p1);
    CHECK(v < prev);
    prev = v;
  }
  const double e = std::exp(1.0);
  const PotentialPtr p2 = make_power(2.0);
  CHECK(improvement_factor(e, *p2) == doctest::Approx(std::sqrt(p2->inverse_primitive(e) / e)).epsilon(1e-14));

  // the power family spans sqrt(log n / n) (fast growth) to sqrt(log n / sqrt n) (p = 1)
  const double n = 1e6;
  const double lo = std::sqrt(std::log(n) / n), hi = std::sqrt(std::log(n) / std::sqrt(n));
  for (double p : {1.0, 2.0, 4.0}) {
    const double v = improvement_factor(n, *make_power(p));
    CHECK(v >= lo);
    CHECK(v <= 2.0 * hi);
  }
}
