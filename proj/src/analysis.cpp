#include "pileup/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "pileup/error.hpp"
#include "pileup/kernel.hpp"

namespace pileup {

namespace {

TestFunction make_bump() {
  TestFunction t;
  t.name = "bump";
  t.a = -1.0;
  t.b = 1.0;
  t.support_lo = -1.0;
  t.support_hi = 1.0;
  // exp(-1 / (1 - x^2)); s = 1 - x^2
  t.f = [](double x) {
    const double s = 1.0 - x * x;
    return s > 0.0 ? std::exp(-1.0 / s) : 0.0;
  };
  t.d1 = [](double x) {
    const double s = 1.0 - x * x;
    return s > 0.0 ? std::exp(-1.0 / s) * (-2.0 * x / (s * s)) : 0.0;
  };
  t.d2 = [](double x) {
    const double s = 1.0 - x * x;
    if (s <= 0.0) return 0.0;
    const double g = -2.0 * x / (s * s);
    const double dg = -2.0 / (s * s) - 8.0 * x * x / (s * s * s);
    return std::exp(-1.0 / s) * (g * g + dg);
  };
  return t;
}

TestFunction make_gaussian() {
  TestFunction t;
  t.name = "gaussian";
  t.a = -4.0;
  t.b = 4.0;
  t.support_lo = -7.0;
  t.support_hi = 7.0;
  t.f = [](double x) { return std::exp(-x * x); };
  t.d1 = [](double x) { return -2.0 * x * std::exp(-x * x); };
  t.d2 = [](double x) { return (4.0 * x * x - 2.0) * std::exp(-x * x); };
  return t;
}

// 1 + sin(2x)/2 on (-1, 1), e^{-(|x| - 1)}/4 outside.
TestFunction make_piecewise() {
  TestFunction t;
  t.name = "piecewise";
  t.a = -1.0;
  t.b = 1.0;
  t.support_lo = -40.0;
  t.support_hi = 40.0;
  t.jumps = {-1.0, 1.0};
  t.f = [](double x) {
    const double ax = std::abs(x);
    return ax < 1.0 ? 1.0 + 0.5 * std::sin(2.0 * x) : 0.25 * std::exp(1.0 - ax);
  };
  t.d1 = [](double x) {
    const double ax = std::abs(x);
    if (ax < 1.0) return std::cos(2.0 * x);
    return -std::copysign(0.25 * std::exp(1.0 - ax), x);
  };
  t.d2 = [](double x) {
    const double ax = std::abs(x);
    return ax < 1.0 ? -2.0 * std::sin(2.0 * x) : 0.25 * std::exp(1.0 - ax);
  };
  return t;
}

// Effective kernel reach: e^{-alpha z} < 1e-12.
constexpr double kTailExponent = 27.631021115928547;

}  // namespace

std::vector<TestFunction> test_function_catalog() { return {make_bump(), make_gaussian(), make_piecewise()}; }

const TestFunction& test_function(const std::string& name) {
  static const std::vector<TestFunction> catalog = test_function_catalog();
  for (const auto& t : catalog) {
    if (t.name == name) return t;
  }
  throw ConfigError("unknown test function '" + name + "'");
}

QuadValue convolution_second_derivative(const TestFunction& f, double alpha, double x, double rel_tol) {
  if (!(x > f.a && x < f.b)) {
    std::ostringstream os;
    os << "x = " << x << " is not inside (" << f.a << ", " << f.b << ")";
    throw DomainError(os.str());
  }
  if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
  const double fx = f.f(x), f2 = f.d2(x);
  const double Z = kTailExponent / alpha;

  // Symmetrized integrand on z > 0; the odd term z f'(x) cancels.
  const auto g = [&](double z) {
    const double bracket = f.f(x + z) + f.f(x - z) - 2.0 * fx;
    return bracket * kernel_alpha_d2(z, alpha);
  };

  // On (0, z0] the bracket is f''(x) z^2 + O(z^4) and K_alpha'' = alpha/z^2 + 2 alpha^3/3 + O(alpha^5 z^2).
  const double z0 = 1e-3 * std::min(1.0 / alpha, std::min(x - f.a, f.b - x));
  QuadValue out;
  out.value = f2 * (alpha * z0 + 2.0 / 9.0 * alpha * alpha * alpha * z0 * z0 * z0);

  std::vector<double> cuts;
  for (double z = z0; z < Z; z *= 4.0) cuts.push_back(z);
  cuts.push_back(Z);
  for (double j : f.jumps) {
    const double z = std::abs(j - x);
    if (z > z0 && z < Z) cuts.push_back(z);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double err = 0.0;
    out.value += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, cuts[i], cuts[i + 1], 10, rel_tol,
                                                                               &err);
    out.error += err;
  }
  // z > Z: only -2 f(x) K_alpha'' survives; int_Z^inf K_alpha'' = -K_alpha'(Z).
  out.value += 2.0 * fx * kernel_alpha_d1(Z, alpha);
  return out;
}

double convolution_value(const TestFunction& f, double alpha, double x) {
  boost::math::quadrature::tanh_sinh<double> ts;
  double sum = 0.0;
  // integrate in the distance d = |y - x| so the log singularity sits at d = 0
  for (double side : {1.0, -1.0}) {
    const double reach = side > 0.0 ? f.support_hi - x : x - f.support_lo;
    if (reach <= 0.0) continue;
    std::vector<double> cuts = {0.0, reach, 1.0 / alpha, 4.0 / alpha};
    for (double j : f.jumps) cuts.push_back(side * (j - x));
    std::sort(cuts.begin(), cuts.end());
    const auto integrand = [&](double d) { return d <= 0.0 ? 0.0 : kernel_alpha(d, alpha) * f.f(x + side * d); };
    double lo = 0.0;
    for (double c : cuts) {
      if (c <= lo || c > reach) continue;
      sum += lo == 0.0 ? ts.integrate(integrand, lo, c, 1e-14)
                       : boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, lo, c, 15, 1e-14);
      lo = c;
    }
  }
  return sum;
}

double convolution_second_difference(const TestFunction& f, double alpha, double x, double h) {
  const double c = convolution_value(f, alpha, x);
  return (convolution_value(f, alpha, x + h) - 2.0 * c + convolution_value(f, alpha, x - h)) / (h * h);
}

namespace {

double richardson(const std::function<double(double)>& op, double x) {
  const auto central = [&](double h) { return (op(x + h) - op(x - h)) / (2.0 * h); };
  const double d1 = central(1e-4), d2 = central(1e-5);
  return (100.0 * d2 - d1) / 99.0;
}

}  // namespace

double fd_check(const std::function<double(double)>& op, const std::function<double(double)>& deriv,
                const std::vector<double>& points) {
  double worst = 0.0, scale = 1.0;
  for (double x : points) {
    const double d = deriv(x);
    scale = std::max(scale, std::abs(d));
    worst = std::max(worst, std::abs(d - richardson(op, x)));
  }
  return worst / scale;
}

double fd_check_gradient(const std::function<double(const Eigen::VectorXd&)>& op,
                         const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                         const std::vector<Eigen::VectorXd>& points) {
  double worst = 0.0, scale = 1.0;
  for (const auto& p : points) {
    const Eigen::VectorXd g = grad(p);
    scale = std::max(scale, g.lpNorm<Eigen::Infinity>());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const auto coord = [&](double t) {
        Eigen::VectorXd q = p;
        q[i] = t;
        return op(q);
      };
      worst = std::max(worst, std::abs(g[i] - richardson(coord, p[i])));
    }
  }
  return worst / scale;
}

}  // namespace pileup
