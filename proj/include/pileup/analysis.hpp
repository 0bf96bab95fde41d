#pragma once

// Second derivative of K_alpha * f through the Taylor-remainder integral
// int [f(x+z) - f(x) - z f'(x)] K_alpha''(z) dz, a direct double-quadrature
// oracle for it, and finite-difference checks of analytic derivatives.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pileup {

struct TestFunction {
  std::string name;
  double a = 0.0, b = 0.0;               // f is C^2 on (a, b)
  double support_lo = 0.0, support_hi = 0.0;  // |f| < 1e-17 outside
  std::vector<double> jumps;             // discontinuities (outside (a, b))
  std::function<double(double)> f, d1, d2;
};

/// Compact bump, Gaussian, and a piecewise function with jumps at +-1.
std::vector<TestFunction> test_function_catalog();
const TestFunction& test_function(const std::string& name);

struct QuadValue {
  double value = 0.0;
  double error = 0.0;  // accumulated Gauss-Kronrod estimate
};

/// Throws DomainError unless a < x < b.
QuadValue convolution_second_derivative(const TestFunction& f, double alpha, double x, double rel_tol = 1e-10);

/// (K_alpha * f)(x) by adaptive quadrature split at x and at the jumps of f.
double convolution_value(const TestFunction& f, double alpha, double x);

/// Second central difference of convolution_value with step h.
double convolution_second_difference(const TestFunction& f, double alpha, double x, double h = 1e-3);

/// Worst |deriv(x) - R(x)| over the points, where R is the Richardson
/// extrapolation of central differences at h = 1e-4 and 1e-5, relative to
/// max(1, max |deriv|).
double fd_check(const std::function<double(double)>& op, const std::function<double(double)>& deriv,
                const std::vector<double>& points);

/// Same for a gradient: every coordinate of every point is differenced.
double fd_check_gradient(const std::function<double(const Eigen::VectorXd&)>& op,
                         const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                         const std::vector<Eigen::VectorXd>& points);

}  // namespace pileup
