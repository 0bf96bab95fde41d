#pragma once

// The interaction kernel K(x) = -log|tanh x| and the pieces of it that the
// quadrature code needs: closed-form derivatives, the smooth remainder of the
// logarithmic singularity and the first two antiderivatives.

#include <cmath>
#include <numbers>

#include "pileup/error.hpp"

namespace pileup {

/// \f$\int_{\mathbb R} K = \pi^2/4\f$.
inline constexpr double kKernelMass = std::numbers::pi * std::numbers::pi / 4.0;

/// \f$\int_0^\infty x K(x)\,dx = 7\zeta(3)/16\f$.
inline constexpr double kKernelFirstMoment = 7.0 * 1.2020569031595942853997 / 16.0;

template <typename Scalar>
inline void require_nonzero(Scalar x) {
  if (x == Scalar(0)) throw DomainError("interaction kernel is singular at 0");
}

/// K(x) = -log|tanh x|, x != 0.
template <typename Scalar>
Scalar kernel(Scalar x) {
  using std::abs, std::exp, std::log, std::log1p, std::tanh;
  require_nonzero(x);
  const Scalar ax = abs(x);
  if (ax < Scalar(0.5)) return -log(tanh(ax));
  // tanh x = 1 - 2 / (e^{2x} + 1)
  return -log1p(Scalar(-2) / (exp(Scalar(2) * ax) + Scalar(1)));
}

/// K'(x) = -2 / sinh(2x); odd.
template <typename Scalar>
Scalar kernel_d1(Scalar x) {
  using std::sinh;
  require_nonzero(x);
  return Scalar(-2) / sinh(Scalar(2) * x);
}

/// K''(x) = 4 cosh(2x) / sinh(2x)^2 > 0; even.
template <typename Scalar>
Scalar kernel_d2(Scalar x) {
  using std::abs, std::sinh, std::tanh;
  require_nonzero(x);
  const Scalar t = Scalar(2) * abs(x);
  return Scalar(4) / (sinh(t) * tanh(t));
}

/// Smooth remainder S(x) = K(x) + log|x| = -log(tanh|x| / |x|), S(0) = 0.
template <typename Scalar>
Scalar kernel_smooth_part(Scalar x) {
  using std::abs, std::log, std::tanh;
  const Scalar ax = abs(x);
  if (ax < Scalar(1e-4)) {
    const Scalar x2 = ax * ax;
    return x2 / Scalar(3) - Scalar(7) * x2 * x2 / Scalar(90);
  }
  if (ax < Scalar(0.5)) return -log(tanh(ax) / ax);
  return kernel(ax) + log(ax);
}

/// \f$\mathcal K(u) = \int_0^u K(t)\,dt\f$; odd in u.
double kernel_integral(double u);

/// \f$\mathcal K_2(u) = \int_0^u (u - t) K(t)\,dt\f$; even in u.
double kernel_second_integral(double u);

/// Rescaled kernel K_alpha(x) = alpha K(alpha x) and its derivatives.
template <typename Scalar>
Scalar kernel_alpha(Scalar x, Scalar alpha) {
  return alpha * kernel(alpha * x);
}

template <typename Scalar>
Scalar kernel_alpha_d1(Scalar x, Scalar alpha) {
  return alpha * alpha * kernel_d1(alpha * x);
}

template <typename Scalar>
Scalar kernel_alpha_d2(Scalar x, Scalar alpha) {
  return alpha * alpha * alpha * kernel_d2(alpha * x);
}

}  // namespace pileup
