#include <cmath>
#include <random>

#include "doctest.h"
#include "pileup/continuum.hpp"
#include "pileup/error.hpp"
#include "pileup/kernel.hpp"

using namespace pileup;

TEST_CASE("cell-pair coefficients") {
  CHECK(cell_pair_coefficient(0, 0.1, 1.0) == doctest::Approx(3.8031401308106459).epsilon(1e-10));
  CHECK(cell_pair_coefficient(1, 0.1, 1.0) == doctest::Approx(2.4201636451263866).epsilon(1e-10));
  CHECK(cell_pair_coefficient(3, 0.05, 4.0) == doctest::Approx(2.5298981054530304).epsilon(1e-10));
  CHECK(cell_pair_coefficient(-3, 0.05, 4.0) == cell_pair_coefficient(3, 0.05, 4.0));
  CHECK(self_cell_coefficient(0.1, 1.0) == cell_pair_coefficient(0, 0.1, 1.0));

  const double h = 0.05, alpha = 4.0;
  for (int k = 2; k < 200; ++k) {
    if (k * h < 5.0 / alpha) continue;
    CHECK(cell_pair_coefficient(k, h, alpha) <= kernel_alpha((k - 1) * h, alpha));
  }
}

TEST_CASE("kernel matrix") {
  const Grid g{-2.0, 2.0, 128};
  const KernelMatrix a(g, 3.0);
  const Eigen::MatrixXd d = a.dense();
  CHECK((d - d.transpose()).norm() == 0.0);
  CHECK(d.minCoeff() > 0.0);
  for (int k = 1; k < 128; ++k) CHECK(a.coefficients()[k] < a.coefficients()[k - 1]);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd m(128);
  for (int i = 0; i < 128; ++i) m[i] = i % 3 == 0 ? 0.0 : u(rng);
  const Eigen::VectorXd fast = a.apply(m), exact = a.apply_exact(m), dense = d * m;
  CHECK((fast - exact).lpNorm<Eigen::Infinity>() <= 1e-12 * exact.lpNorm<Eigen::Infinity>());
  CHECK((dense - exact).lpNorm<Eigen::Infinity>() <= 1e-12 * exact.lpNorm<Eigen::Infinity>());

  CHECK_THROWS_AS(validate(Grid{1.0, 0.0, 10}), ConfigError);
  CHECK_THROWS_AS(validate(Grid{0.0, 1.0, 0}), ConfigError);
}

TEST_CASE("continuum energy of simple densities") {
  const Grid g;
  const ScaleFrame f = make_frame_alpha(1024, 32.0, make_power(2.0));
  const GridDensity u = uniform_density(g, 0.0, 1.0);
  CHECK(u.mass.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(u.y1 == doctest::Approx(0.0));
  CHECK(u.y2 == doctest::Approx(1.0));
  const ContinuumEnergy e = continuum_energy(f, u);
  CHECK(e.confinement == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e.energy == doctest::Approx(e.interaction + e.confinement).epsilon(1e-15));
  CHECK(e.F == doctest::Approx(e.energy - 0.5 * e.confinement).epsilon(1e-15));
  // int_0^1 int_0^1 K_alpha(x - y) -> int K = pi^2/4 as alpha grows
  CHECK(2.0 * e.interaction == doctest::Approx(kKernelMass).epsilon(0.05));

  Eigen::VectorXd mass(g.m);
  for (int i = 0; i < g.m; ++i) mass[i] = std::exp(-std::pow(g.center(i) - 0.3, 2) * 4.0);
  const GridDensity rho = make_density(g, mass);
  const GridDensity mirrored = make_density(g, mass.reverse());
  CHECK(continuum_energy(f, mirrored).energy == doctest::Approx(continuum_energy(f, rho).energy).epsilon(1e-12));
  CHECK_THROWS_AS(make_density(Grid{-1.0, 1.0, 4}, Eigen::VectorXd::Zero(3)), DomainError);
}

TEST_CASE("minimizer") {
  const Grid g;
  for (const auto& desc : catalog_descriptors()) {
    CAPTURE(desc.dump());
    const ScaleFrame f = make_frame_alpha(256, 8.0, make_potential(desc));
    ContinuumOptions opt;
    opt.grid = g;
    const ContinuumSolution s = minimize_continuum(f, opt);
    const ContinuumReport& r = s.report;
    CHECK(r.converged);
    CHECK(s.rho.mass.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.rho.mass.minCoeff() >= 0.0);
    CHECK(r.el.on_support_max_dev <= r.el_tol);
    CHECK(r.el.off_support_min_slack >= -r.el_tol);
    CHECK(std::abs(r.F_el - r.F) <= r.el_tol);
    CHECK(r.el_tol == doctest::Approx(1e-5 * std::max(1.0, r.F)));
    CHECK(0.5 * r.energy <= r.F);
    CHECK(r.F <= r.energy);
    CHECK(r.F_raw == doctest::Approx(f.gamma * r.F).epsilon(1e-14));
    CHECK(r.energy <= continuum_energy(f, uniform_density(g, 0.0, 1.0)).energy);

    const DensityDiagnostics d = density_diagnostics(s.rho, f);
    CHECK(d.contains_zero);
    CHECK(d.y1 <= 0.0);
    CHECK(d.y2 >= 0.0);
    CHECK(d.width == doctest::Approx(d.y2 - d.y1));

    // interaction lower bound on random windows
    const KernelMatrix a(g, f.alpha);
    const double inter = s.rho.mass.dot(a.apply(s.rho.mass));
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int k = 0; k < 5; ++k) {
      double z1 = u(rng), z2 = u(rng);
      if (z1 > z2) std::swap(z1, z2);
      double inside = 0.0;
      for (int i = 0; i < g.m; ++i) {
        const double lo = std::max(z1, g.left(i)), hi = std::min(z2, g.left(i) + g.h());
        if (hi > lo) inside += s.rho.mass[i] * (hi - lo) / g.h();
      }
      CHECK(inter >= kernel(1.0) / (z2 - z1) * inside * inside);
    }

    const Eigen::VectorXd diff = s.rho.mass - s.rho.mass.reverse();
    CHECK(diff.lpNorm<Eigen::Infinity>() / g.h() <= 1e-6);
  }
}

TEST_CASE("uniform density violates the EL conditions") {
  const ScaleFrame f = make_frame_alpha(256, 8.0, make_power(2.0));
  const ContinuumSolution s = minimize_continuum(f);
  const ElResidual r = el_residual(uniform_density(Grid{}, -0.5, 0.5), f);
  CHECK(r.on_support_max_dev > 100.0 * s.report.el_tol);
}

TEST_CASE("grid refinement") {
  const ScaleFrame f = make_frame_alpha(256, 4.0, make_power(2.0));
  double e[3];
  for (int k = 0; k < 3; ++k) {
    ContinuumOptions opt;
    opt.grid = Grid{-2.0, 2.0, 256 << k};
    e[k] = minimize_continuum(f, opt).report.energy;
  }
  const double rate = std::log2(std::abs(e[0] - e[1]) / std::abs(e[1] - e[2]));
  CAPTURE(rate);
  CHECK(rate >= 0.9);
}

TEST_CASE("support reaching the domain boundary") {
  ContinuumOptions opt;
  opt.grid = Grid{-0.3, 0.3, 128};
  CHECK_THROWS_AS(minimize_continuum(make_frame_alpha(256, 8.0, make_power(2.0)), opt), DomainError);
}

TEST_CASE("json") {
  const ContinuumSolution s = minimize_continuum(make_frame_alpha(64, 4.0, make_power(2.0)));
  const nlohmann::json j = to_json(s.report);
  CHECK(j.at("converged") == true);
  CHECK(j.contains("F_alpha_el"));
  CHECK(to_json(density_diagnostics(s.rho, make_frame_alpha(64, 4.0, make_power(2.0)))).contains("y1"));
}
