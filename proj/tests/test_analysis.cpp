#include <cmath>

#include "doctest.h"
#include "pileup/analysis.hpp"
#include "pileup/error.hpp"

using namespace pileup;

TEST_CASE("test function catalog") {
  const auto cat = test_function_catalog();
  REQUIRE(cat.size() == 3);
  for (const TestFunction& f : cat) {
    CAPTURE(f.name);
    CHECK(test_function(f.name).name == f.name);
    std::vector<double> pts;
    for (int k = 1; k < 10; ++k) pts.push_back(f.a + (f.b - f.a) * k / 10.0);
    CHECK(fd_check(f.f, f.d1, pts) < 1e-7);
    CHECK(fd_check(f.d1, f.d2, pts) < 1e-7);
    for (double j : f.jumps) CHECK((j <= f.a || j >= f.b));
    CHECK(std::abs(f.f(f.support_hi + 1.0)) < 1e-17);
  }
  CHECK_THROWS_AS(test_function("nope"), ConfigError);
}

TEST_CASE("second derivative of the convolution") {
  const TestFunction& g = test_function("gaussian");
  const QuadValue v = convolution_second_derivative(g, 1.0, 0.0);
  const double fd = convolution_second_difference(g, 1.0, 0.0);
  CHECK(std::abs(v.value - fd) <= 1e-4 * std::abs(fd));

  // jumps at +-1, three smoothing widths away from x
  const TestFunction& p = test_function("piecewise");
  for (double alpha : {4.0, 16.0}) {
    const double x = 0.2;
    const double exact = convolution_second_derivative(p, alpha, x).value;
    CHECK(std::abs(exact - convolution_second_difference(p, alpha, x)) <= 1e-4 * std::abs(exact));
  }

  CHECK_THROWS_AS(convolution_second_derivative(p, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(convolution_second_derivative(p, 1.0, -2.0), DomainError);
}

TEST_CASE("affine functions are annihilated") {
  TestFunction f;
  f.name = "affine";
  f.a = -1.0;
  f.b = 1.0;
  f.support_lo = -1.0;
  f.support_hi = 1.0;
  f.jumps = {-1.0, 1.0};
  f.f = [](double x) { return std::abs(x) <= 1.0 ? 2.0 + 3.0 * x : 0.0; };
  f.d1 = [](double x) { return std::abs(x) <= 1.0 ? 3.0 : 0.0; };
  f.d2 = [](double) { return 0.0; };
  const QuadValue v = convolution_second_derivative(f, 64.0, 0.1);
  CHECK(std::abs(v.value) <= 1e-8);
}

TEST_CASE("quadrature convergence") {
  for (const TestFunction& f : test_function_catalog()) {
    CAPTURE(f.name);
    const double x = 0.5 * (f.a + f.b) + 0.1 * (f.b - f.a);
    const QuadValue coarse = convolution_second_derivative(f, 4.0, x, 1e-10);
    const QuadValue fine = convolution_second_derivative(f, 4.0, x, 5e-11);
    CHECK(std::abs(coarse.value - fine.value) <= coarse.error);
  }
}

TEST_CASE("finite-difference checks") {
  CHECK(fd_check([](double) { return 3.0; }, [](double) { return 0.0; }, {-1.0, 0.0, 2.0}) == 0.0);
  CHECK(fd_check([](double x) { return std::sin(x); }, [](double x) { return std::cos(x); }, {0.1, 1.0, 2.0}) < 1e-9);
  CHECK(fd_check([](double x) { return std::sin(x); }, [](double x) { return 1.1 * std::cos(x); }, {0.0}) ==
        doctest::Approx(0.1 / 1.1).epsilon(1e-6));

  const auto op = [](const Eigen::VectorXd& x) { return x.squaredNorm() + x[0] * x[1]; };
  const auto grad = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd g = 2.0 * x;
    g[0] += x[1];
    g[1] += x[0];
    return g;
  };
  Eigen::VectorXd p(3);
  p << 0.3, -1.2, 2.0;
  CHECK(fd_check_gradient(op, grad, {p}) < 1e-9);
}
