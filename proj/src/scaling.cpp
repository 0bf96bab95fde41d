#include "pileup/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pileup/discrete.hpp"
#include "pileup/error.hpp"
#include "pileup/kernel.hpp"

namespace pileup {

namespace {

// P^{-1}(y) >= -P^{-1}(-y) with y = P(alpha) is equivalent to |P(-alpha)| >= P(alpha),
// which stays finite in log form for fast-growing Q.
void check_orientation(const ScaleFrame& f) {
  const double right = f.log_p_alpha;
  const double left = f.potential->log_primitive(-f.alpha);
  if (left < right - 1e-10 * std::max(1.0, std::abs(right))) {
    std::ostringstream os;
    os << "orientation condition fails: |P(-alpha)| < P(alpha) at alpha = " << f.alpha
       << "; reflect the potential (x -> -x)";
    throw FrameError(os.str());
  }
}

void check_alpha(const ScaleFrame& f) {
  const double q2 = f.potential->flat_interval().second;
  if (!(f.alpha > q2) || !(f.alpha > 0.0) || !std::isfinite(f.alpha)) {
    std::ostringstream os;
    os << "alpha = " << f.alpha << " must be finite and exceed q2 = " << q2;
    throw FrameError(os.str());
  }
}

}  // namespace

ScaleFrame make_frame(int n, double beta, PotentialPtr q) {
  if (n < 2) throw FrameError("frame needs n >= 2");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw FrameError("frame needs beta > 0 (n/beta > 0)");
  if (!q) throw FrameError("frame needs a potential");
  ScaleFrame f;
  f.n = n;
  f.beta = beta;
  f.potential = std::move(q);
  f.alpha = f.potential->inverse_primitive(n / beta);
  check_alpha(f);
  f.gamma = 2.0 * n * n / f.alpha;
  f.log_p_alpha = f.potential->log_primitive(f.alpha);
  check_orientation(f);
  return f;
}

ScaleFrame make_frame_alpha(int n, double alpha, PotentialPtr q) {
  if (n < 2) throw FrameError("frame needs n >= 2");
  if (!q) throw FrameError("frame needs a potential");
  ScaleFrame f;
  f.n = n;
  f.alpha = alpha;
  f.potential = std::move(q);
  check_alpha(f);
  f.gamma = 2.0 * n * n / alpha;
  f.log_p_alpha = f.potential->log_primitive(alpha);
  f.beta = std::exp(std::log(static_cast<double>(n)) - f.log_p_alpha);
  check_orientation(f);
  return f;
}

Derivs q_alpha(const ScaleFrame& f, double x) {
  const double a = f.alpha;
  const Derivs d = f.potential->scaled(a * x, std::log(a) - f.log_p_alpha);
  return {d.value, a * d.d1, a * a * d.d2};
}

double q_alpha_d2_sup(const ScaleFrame& f, double lo, double hi) {
  const double a = f.alpha;
  return a * a * f.potential->scaled_d2_sup(a * lo, a * hi, std::log(a) - f.log_p_alpha);
}

bool in_gamma_window(const ScaleFrame& f, double gamma_window) {
  const double lower = std::exp(std::log(static_cast<double>(f.n)) - f.potential->log_primitive(f.n));
  return f.beta >= lower * (1.0 - 1e-12) && f.beta <= gamma_window * f.n * (1.0 + 1e-12);
}

double raw_discrete_energy(const ScaleFrame& f, const Eigen::VectorXd& a) {
  require_ordered(a);
  const Eigen::Index n = a.size();
  double pair = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) pair += kernel(a[j] - a[i]);
  }
  double conf = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) conf += f.potential->value(a[i]);
  return 2.0 * pair * n / (n - 1.0) + 2.0 * f.beta * conf;
}

EnergyIdentity rescale_energy_identity(const ScaleFrame& f, const Eigen::VectorXd& x) {
  return {raw_discrete_energy(f, f.alpha * x), f.gamma * discrete_energy(f, x)};
}

nlohmann::json to_json(const ScaleFrame& f) {
  return {{"n", f.n},
          {"beta", f.beta},
          {"alpha", f.alpha},
          {"gamma", f.gamma},
          {"potential", f.potential ? f.potential->descriptor() : nlohmann::json()}};
}

}  // namespace pileup
