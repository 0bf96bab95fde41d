#pragma once

// Rescaled discrete energy
//   E_n^alpha(x) = 1/(2n(n-1)) sum_{i != j} K_alpha(x_i - x_j) + 1/n sum_i Q_alpha(x_i)
// on ordered configurations, its derivatives and a damped Newton minimizer.

#include <optional>
#include <string>

#include <Eigen/Dense>

#include "json.hpp"
#include "pileup/error.hpp"
#include "pileup/scaling.hpp"

namespace pileup {

enum class Space { raw, rescaled };

struct ParticleConfig {
  Eigen::VectorXd positions;
  ScaleFrame frame;
  Space space = Space::rescaled;

  /// The same configuration in the other space (a = alpha x).
  ParticleConfig to(Space target) const;
};

/// Throws DomainError unless x is finite and strictly increasing.
void require_ordered(const Eigen::VectorXd& x);

double discrete_energy(const ScaleFrame& f, const Eigen::VectorXd& x);
inline double discrete_energy(const ParticleConfig& c) {
  return discrete_energy(c.frame, c.to(Space::rescaled).positions);
}

struct DiscreteDerivatives {
  double energy = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;  // empty unless requested
};

DiscreteDerivatives discrete_derivatives(const ScaleFrame& f, const Eigen::VectorXd& x,
                                         bool with_hessian = true);

struct DiscreteOptions {
  double tol_g_rel = 1e-10;  // stop when |grad|_inf <= tol_g_rel * max(1, |E|)
  int max_iter = 200;
};

struct DiscreteReport {
  double energy = 0.0;
  double F = 0.0;        // F_n^alpha
  double F_raw = 0.0;    // F_n^D
  double confinement = 0.0;  // 1/n sum Q_alpha(x_i)
  double grad_norm = 0.0;
  double tol_g = 0.0;
  int iterations = 0;
  int regularized_steps = 0;
  bool converged = false;
};

struct DiscreteSolution {
  Eigen::VectorXd x;
  DiscreteReport report;
};

class DiscreteConvergenceError : public ConvergenceError {
 public:
  DiscreteConvergenceError(const std::string& what, DiscreteSolution best)
      : ConvergenceError(what), best_(std::move(best)) {}
  const DiscreteSolution& best() const { return best_; }

 private:
  DiscreteSolution best_;
};

/// Damped Newton with an ordering-preserving backtracking line search.  The
/// default start is uniform on [-1, 1].
DiscreteSolution minimize_discrete(const ScaleFrame& f, std::optional<Eigen::VectorXd> init = std::nullopt,
                                   const DiscreteOptions& opt = {});

struct PotentialValues {
  double F_alpha = 0.0;  // E_n^alpha(x) - 1/(2n) sum Q_alpha(x_i)
  double F_raw = 0.0;    // F_n^D = gamma F_n^alpha
};

PotentialValues discrete_potential_values(const ScaleFrame& f, const Eigen::VectorXd& xbar);

nlohmann::json to_json(const DiscreteReport& r);

}  // namespace pileup
