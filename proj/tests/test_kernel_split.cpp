#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "doctest.h"
#include "pileup/analysis.hpp"
#include "pileup/bounds.hpp"
#include "pileup/error.hpp"
#include "pileup/kernel.hpp"
#include "pileup/kernel_split.hpp"
#include "pileup/quadrature.hpp"

using namespace pileup;

namespace {

SignedMeasureOnGrid random_measure(const Grid& g, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> pos(g.x_lo + 0.5, g.x_hi - 0.5);
  SignedMeasureOnGrid nu{g, Eigen::VectorXd::Zero(g.m), {}};
  for (int i = 0; i < g.m; ++i) nu.cells[i] = n01(rng) / g.m;
  for (int k = 0; k < 3; ++k) nu.atoms.emplace_back(pos(rng), 0.1 * n01(rng));
  return nu;
}

}  // namespace

TEST_CASE("split pieces") {
  const KernelSplit s(0.1, 1.0);
  CHECK(s.L(0.0) == doctest::Approx(kernel(0.1) - 0.1 * kernel_d1(0.1)).epsilon(1e-12));
  CHECK(s.L(0.2) == kernel(0.2));
  CHECK(s.M(0.2) == 0.0);
  CHECK(s.L(-0.05) == s.L(0.05));

  for (double sigma : {1e-3, 0.05, 0.3}) {
    const KernelSplit k(sigma, 2.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-3.0 * sigma, 3.0 * sigma);
    for (int i = 0; i < 1000; ++i) {
      const double x = u(rng);
      if (x == 0.0) continue;
      CHECK(std::abs(k.L(x) + k.M(x) - kernel(x)) <= 1e-14 * std::max(1.0, kernel(x)));
      CHECK(k.M(x) >= 0.0);
      if (std::abs(x) >= sigma) CHECK(k.M(x) == 0.0);
      CHECK(k.L_alpha(x) + k.M_alpha(x) == doctest::Approx(kernel_alpha(x, 2.0)).epsilon(1e-13));
    }
    for (int i = 1; i < 200; ++i) {
      const double x = 0.02 * i * sigma, h = 0.01 * sigma;
      CHECK(k.L(x - h) + k.L(x + h) - 2.0 * k.L(x) >= -1e-12);
    }
  }
  CHECK_THROWS_AS(KernelSplit(0.0, 1.0), DomainError);
}

TEST_CASE("split bounds") {
  boost::math::quadrature::tanh_sinh<double> ts;
  double prev = 1e300;
  for (double sigma : {1e-1, 1e-2, 1e-3}) {
    const KernelSplit s(sigma, 1.0);
    const double direct = 2.0 * ts.integrate([&](double x) { return s.M(x); }, 0.0, sigma, 1e-14);
    CHECK(s.M_integral() == doctest::Approx(direct).epsilon(1e-12));
    CHECK(s.M_integral() <= 4.0 * sigma * (std::abs(std::log(sigma)) + 1.0));
    CHECK(s.M_integral() < prev);
    prev = s.M_integral();
  }
  for (int k = 0; k <= 40; ++k) {
    const double sigma = std::pow(10.0, -6.0 + k * std::log10(0.5e6) / 40.0);
    CHECK(KernelSplit(sigma, 1.0).L(0.0) <= 3.0 * (std::abs(std::log(sigma)) + 1.0));
  }
}

TEST_CASE("antiderivatives of L") {
  const KernelSplit s(0.2, 3.0);
  const auto l = [&](double u) { return s.L(u); };
  const auto l1 = [&](double u) { return s.L_integral(u); };
  const auto l2 = [&](double u) { return s.L_second_integral(u); };
  const std::vector<double> pts{-1.0, -0.1, 0.05, 0.15, 0.5, 2.0};
  CHECK(fd_check(l1, l, pts) < 1e-8);
  CHECK(fd_check(l2, l1, pts) < 1e-8);
  CHECK(s.L_integral(0.0) == 0.0);

  for (int k : {0, 1, 2, 7}) {
    const double h = 0.03;
    const auto inner = [&](double x) {
      return quad::adaptive_split([&](double y) { return s.L_alpha(y - x); }, k * h, (k + 1) * h, {x});
    };
    const double direct = quad::adaptive(inner, 0.0, h, 1e-12) / (h * h);
    CHECK(s.cell_pair_coefficient(k, h) == doctest::Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("inner product") {
  const Grid g{-2.0, 2.0, 64};
  const KernelSplit s(0.1, 4.0);
  std::mt19937_64 rng(23);

  std::vector<SignedMeasureOnGrid> nus;
  for (int k = 0; k < 20; ++k) nus.push_back(random_measure(g, rng));
  Eigen::MatrixXd gram(20, 20);
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) gram(i, j) = l_inner_product(nus[i], nus[j], s);
  }
  CHECK((gram - gram.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * gram.cwiseAbs().maxCoeff());
  const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram).eigenvalues().minCoeff();
  CHECK(lmin >= -1e-8 * gram.diagonal().maxCoeff());
  for (const auto& nu : nus) CHECK(l_inner_product(nu, nu, s) >= -1e-10);

  SignedMeasureOnGrid sum = nus[0];
  sum.cells += nus[1].cells;
  sum.atoms.insert(sum.atoms.end(), nus[1].atoms.begin(), nus[1].atoms.end());
  const double lhs = l_inner_product(sum, nus[2], s);
  const double rhs = l_inner_product(nus[0], nus[2], s) + l_inner_product(nus[1], nus[2], s);
  CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));

  SignedMeasureOnGrid dipole{g, Eigen::VectorXd::Zero(g.m), {{0.3, 1.0}, {-0.25, -1.0}}};
  CHECK(l_inner_product(dipole, dipole, s) ==
        doctest::Approx(2.0 * s.L_alpha(0.0) - 2.0 * s.L_alpha(0.55)).epsilon(1e-14));
  CHECK(l_inner_product(dipole, dipole, s) >= 0.0);

  SignedMeasureOnGrid other{Grid{-2.0, 2.0, 32}, Eigen::VectorXd::Zero(32), {}};
  CHECK_THROWS_AS(l_inner_product(dipole, other, s), DomainError);
}

TEST_CASE("discrepancy") {
  const ScaleFrame f0 = make_frame_alpha(64, 4.0, make_power(2.0));
  const ContinuumSolution c = minimize_continuum(f0);
  const KernelSplit s(0.05, 4.0);

  const SignedMeasureOnGrid rho = from_density(c.rho);
  CHECK(rho.total_mass() == doctest::Approx(1.0).epsilon(1e-14));
  SignedMeasureOnGrid zero = rho;
  zero.cells -= from_density(c.rho).cells;
  CHECK(l_inner_product(zero, zero, s) == 0.0);

  double prev = 1e300;
  for (int n : {64, 128, 256, 512}) {
    const Eigen::VectorXd x = quantile_init(c.rho, n);
    const SignedMeasureOnGrid nu = discrepancy_measure(x, c.rho);
    CHECK(std::abs(nu.total_mass()) <= 1e-12);
    const double norm = std::sqrt(std::max(0.0, l_inner_product(nu, nu, s)));
    CHECK(norm < prev);
    prev = norm;
  }

  bool clamped = false;
  CHECK(default_sigma(4.0, 7.0, 64, &clamped) == doctest::Approx(4.0 / 448.0));
  CHECK_FALSE(clamped);
  CHECK(default_sigma(64.0, 1.0, 64, &clamped) == 0.5);
  CHECK(clamped);

  const ScaleFrame f = make_frame_alpha(128, 4.0, make_power(2.0));
  const ContinuumSolution cs = minimize_continuum(f);
  const DiscreteSolution ds = minimize_discrete(f, quantile_init(cs.rho, 128));
  const DiscrepancyReport r =
      discrepancy_norm(f, ds.x, ds.report.energy, cs.rho, cs.report.energy, 7.0);
  CHECK(r.sigma == doctest::Approx(4.0 / (7.0 * 128.0)));
  CHECK(r.norm >= 0.0);
  CHECK(r.half_norm_sq == doctest::Approx(0.5 * r.norm * r.norm));
  CHECK(r.energy_gap == doctest::Approx(ds.report.energy - cs.report.energy).epsilon(1e-14));
  CHECK(std::isfinite(r.measured_C));
  CHECK(to_json(r).contains("sigma_clamped"));
}
