#include "pileup/kernel.hpp"

#include <cmath>

#include "pileup/quadrature.hpp"

namespace pileup {

namespace {

// Below this point the antiderivatives use -log t + S(t); above it the
// expansion -log tanh t = 2 sum_{k odd} e^{-2kt} / k converges fast.
constexpr double kSeriesSwitch = 0.5;

// sum_{k odd} e^{-2ku} / k^p, truncated once terms drop below 1e-18.
double odd_exp_series(double u, int p) {
  double sum = 0.0;
  for (int k = 1; k < 4000; k += 2) {
    const double term = std::exp(-2.0 * k * u) / std::pow(static_cast<double>(k), p);
    sum += term;
    if (term < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

}  // namespace

double kernel_integral(double u) {
  if (u < 0.0) return -kernel_integral(-u);
  if (u == 0.0) return 0.0;
  if (u >= kSeriesSwitch) {
    // int_u^inf K = sum_{k odd} e^{-2ku} / k^2
    return std::numbers::pi * std::numbers::pi / 8.0 - odd_exp_series(u, 2);
  }
  const double smooth =
      quad::gauss<20>([](double t) { return kernel_smooth_part(t); }, 0.0, u);
  return u - u * std::log(u) + smooth;
}

double kernel_second_integral(double u) {
  u = std::abs(u);
  if (u == 0.0) return 0.0;
  if (u >= kSeriesSwitch) {
    // K2(u) = u K1(u) - int_0^u t K(t) dt, with the first moment tail summed
    // term by term: int_u^inf t 2 e^{-2kt}/k dt = e^{-2ku} (u/k^2 + 1/(2k^3)).
    double tail = 0.0;
    for (int k = 1; k < 4000; k += 2) {
      const double kk = k;
      const double term = std::exp(-2.0 * kk * u) * (u / (kk * kk) + 0.5 / (kk * kk * kk));
      tail += term;
      if (term < 1e-18 * std::abs(tail)) break;
    }
    return u * kernel_integral(u) - (kKernelFirstMoment - tail);
  }
  const double smooth = quad::gauss<20>(
      [u](double t) { return (u - t) * kernel_smooth_part(t); }, 0.0, u);
  // int_0^u (u - t)(-log t) dt = -u^2 log(u) / 2 + 3 u^2 / 4
  return -0.5 * u * u * std::log(u) + 0.75 * u * u + smooth;
}

}  // namespace pileup
