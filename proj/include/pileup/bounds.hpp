#pragma once

// Theorem-shaped checks on solved (discrete, continuum) pairs: the error
// scales A_n^alpha and B_n^beta, the sign and ratio tests of Theorems 2.2 and
// 2.5, the Robin bracket on log E_n^min, the HT19 comparison and the
// quantile construction with its diagonal energies.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "pileup/continuum.hpp"
#include "pileup/discrete.hpp"
#include "pileup/scaling.hpp"

namespace pileup {

struct ScaleConstants {
  double q2_sup = 0.0;   // ||Q_alpha''|| on supp rho
  double q_alpha = 0.0;  // q2_sup + 1
  double A_scale = 0.0;  // min{(alpha/n) log((n/alpha)(1 + q2_sup)), 1}
  double B_scale = 0.0;  // (n^2/alpha) min{(alpha/n) log((n/alpha)(1 + beta alpha^3/n ||Q''||)), 1}
};

ScaleConstants scale_constants(const ScaleFrame& f, const GridDensity& rho);

struct SolvedPair {
  ScaleFrame frame;
  ContinuumSolution continuum;
  DiscreteSolution discrete;
};

/// Solves the continuum problem (or reuses `cached`) and then the discrete
/// problem from the continuum mass-midpoint quantiles.
SolvedPair solve_pair(const ScaleFrame& f, const ContinuumOptions& copt = {}, const DiscreteOptions& dopt = {},
                      const ContinuumSolution* cached = nullptr);

struct VerifyOptions {
  double num_tol_rel = 1e-4;  // sign test: F_n - F <= num_tol_rel * max(1, |F|)
};

struct BoundsReport {
  int n = 0;
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
  double q_alpha = 0.0, A_scale = 0.0, B_scale = 0.0;
  double E_disc = 0.0, E_cont = 0.0;
  double F_disc = 0.0, F_cont = 0.0;
  double FD = 0.0, FC = 0.0;
  double energy_diff = 0.0;      // E_n^alpha - E^alpha
  double potential_diff = 0.0;   // F_n^alpha - F^alpha
  double raw_energy_diff = 0.0;  // I_n^D - I_n^C = gamma * energy_diff
  double raw_potential_diff = 0.0;
  double ratio_E = 0.0;          // |energy_diff| / A_scale
  double ratio_F = 0.0;          // -potential_diff / sqrt(A_scale)
  double ratio_F_linear = 0.0;   // -potential_diff / A_scale
  double raw_ratio_E = 0.0;      // |raw_energy_diff| / B_scale
  double raw_ratio_F = 0.0;      // -raw_potential_diff / sqrt(n^2/alpha B_scale)
  double num_tol = 0.0;
  double improvement = 0.0;
  bool pass_sign = false;
  bool pass_raw_sign = false;
  std::optional<bool> pass_ratio;  // set once a sweep group is aggregated
};

/// Refuses (DomainError) unless both solutions converged.
BoundsReport verify_theorems(const SolvedPair& s, const VerifyOptions& opt = {});

struct RatioStability {
  double min = 0.0, max = 0.0, spread = 0.0;  // spread = max / min
  bool pass = false;
};

/// max/min <= limit over positive values; fewer than two values pass vacuously.
RatioStability ratio_stability(const std::vector<double>& values, double limit = 10.0);

struct RobinBracket {
  int n = 0;
  double beta = 0.0, alpha = 0.0;
  double FD = 0.0, FC = 0.0;
  double lower = 0.0;    // -F_n^C / (n - 1)
  double upper = 0.0;    // -F_n^D / n
  double width = 0.0;    // upper - lower
  double width_decomposed = 0.0;  // F_n^D/(n(n-1)) + (F_n^C - F_n^D)/(n-1)
  bool ordered = false;
  double ht19_new = 0.0;  // sqrt(n^2/alpha * B_scale)
  double ht19_old = 0.0;  // (n+1)/(n-1) F_n^D + (3 + log 2) n^2/(n-1)
  double ht19_ratio = 0.0;
};

RobinBracket robin_bracket(const SolvedPair& s);
RobinBracket robin_bracket(int n, double beta, PotentialPtr q, const ContinuumOptions& copt = {},
                           const DiscreteOptions& dopt = {});

/// sqrt(P^{-1}(n) log n / n).
double improvement_factor(double n, const ConfiningPotential& q);

/// x_0 = y1, x_n = y2 and exact k/n quantiles of the piecewise-constant CDF
/// in between (leftmost point on zero-density plateaus).
Eigen::VectorXd quantile_points(const GridDensity& rho, int n);

/// The n mass-midpoint quantiles (k - 1/2)/n, used to start the discrete solver.
Eigen::VectorXd quantile_init(const GridDensity& rho, int n);

struct DiagonalEnergies {
  double D_n = 0.0;     // (1/n^2) sum K_alpha(l_i)
  double D_phi = 0.0;   // (1/(2n^2)) sum (1/l_i^2) int int_{[0,l_i]^2} K_alpha
  bool pass_order = false;  // D_n <= 2 D_phi
  double scale = 0.0;   // (alpha/n) log(q_alpha n / alpha)
  double ratio = 0.0;   // D_phi / scale
  double min_gap = 0.0;
  double gap_bound = 0.0;  // 1 / (n ||rho||_inf)
  bool pass_gap = false;
  double max_mass_error = 0.0;  // max |int_{x_{i-1}}^{x_i} rho - 1/n|
};

DiagonalEnergies diagonal_energies(const Eigen::VectorXd& xhat, const GridDensity& rho, const ScaleFrame& f,
                                   double q_alpha);

/// Mass of rho on [a, b] (exact for the piecewise-constant density).
double density_mass(const GridDensity& rho, double a, double b);

nlohmann::json to_json(const ScaleConstants& c);
nlohmann::json to_json(const BoundsReport& r);
nlohmann::json to_json(const RobinBracket& r);
nlohmann::json to_json(const DiagonalEnergies& d);

}  // namespace pileup
