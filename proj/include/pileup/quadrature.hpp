#pragma once

// Thin layer over Boost.Math quadrature used across the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace pileup::quad {

// Fixed N-point Gauss-Legendre rule on [a, b].
template <unsigned N, class F>
double gauss(F&& f, double a, double b) {
  return boost::math::quadrature::gauss<double, N>::integrate(f, a, b);
}

// Composite N-point Gauss-Legendre on `panels` equal panels of [a, b].
template <unsigned N, class F>
double gauss_composite(F&& f, double a, double b, int panels) {
  const double w = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    sum += boost::math::quadrature::gauss<double, N>::integrate(f, a + p * w, a + (p + 1) * w);
  }
  return sum;
}

// Adaptive Gauss-Kronrod (G15/K31 pairs) on [a, b].
template <class F>
double adaptive(F&& f, double a, double b, double rel_tol = 1e-13, unsigned max_depth = 12) {
  if (a == b) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, max_depth, rel_tol);
}

// Adaptive integration over [a, b] split at every breakpoint strictly inside.
template <class F>
double adaptive_split(F&& f, double a, double b, std::vector<double> breaks,
                      double rel_tol = 1e-13, unsigned max_depth = 12) {
  std::sort(breaks.begin(), breaks.end());
  double sum = 0.0;
  double left = a;
  for (double x : breaks) {
    if (x <= left || x >= b) continue;
    sum += adaptive(f, left, x, rel_tol, max_depth);
    left = x;
  }
  sum += adaptive(f, left, b, rel_tol, max_depth);
  return sum;
}

}  // namespace pileup::quad
