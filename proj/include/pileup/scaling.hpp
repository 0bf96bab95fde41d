#pragma once

// The (n, beta) <-> (n, alpha) change of frame and the rescaled potential
// Q_alpha(x) = alpha Q(alpha x) / P(alpha).

#include <Eigen/Dense>

#include "json.hpp"
#include "pileup/potential.hpp"

namespace pileup {

struct ScaleFrame {
  int n = 0;
  double beta = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;       // 2 n^2 / alpha
  double log_p_alpha = 0.0; // log P(alpha), kept in log form for fast-growing Q
  PotentialPtr potential;
};

/// alpha = P^{-1}(n / beta).  Throws FrameError for n < 2, beta <= 0,
/// alpha <= q2 or a failing orientation condition.
ScaleFrame make_frame(int n, double beta, PotentialPtr q);

/// Frame with alpha given and beta = n / P(alpha).
ScaleFrame make_frame_alpha(int n, double alpha, PotentialPtr q);

/// Q_alpha and its first two x-derivatives.
Derivs q_alpha(const ScaleFrame& f, double x);
inline double q_alpha_value(const ScaleFrame& f, double x) { return q_alpha(f, x).value; }

/// sup of Q_alpha'' over [lo, hi].
double q_alpha_d2_sup(const ScaleFrame& f, double lo, double hi);

/// Theorem 2.2's window n / P(n) <= beta <= Gamma n.
bool in_gamma_window(const ScaleFrame& f, double gamma_window);

/// Raw discrete energy I_n^D(a) = n/(n-1) sum_{i != j} K(a_i - a_j) + 2 beta sum Q(a_i).
double raw_discrete_energy(const ScaleFrame& f, const Eigen::VectorXd& a);

struct EnergyIdentity {
  double raw = 0.0;       // I_n^D(alpha x)
  double rescaled = 0.0;  // gamma E_n^alpha(x)
};

/// Both sides of gamma E_n^alpha(x) = I_n^D(alpha x).
EnergyIdentity rescale_energy_identity(const ScaleFrame& f, const Eigen::VectorXd& x);

/// Raw potential value from a rescaled one: F^D = gamma F_n^alpha (same for C).
inline double to_raw(const ScaleFrame& f, double rescaled) { return f.gamma * rescaled; }

nlohmann::json to_json(const ScaleFrame& f);

}  // namespace pileup
