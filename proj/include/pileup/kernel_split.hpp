#pragma once

// K = L + M with L affine in |x| on [-sigma, sigma] (tangent to K at sigma)
// and M = K - L >= 0 supported in (-sigma, sigma); the degenerate inner
// product (mu, nu)_L = int (L_alpha * mu) dnu and the discrepancy norm of
// nu_n = mu_n - rho.

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "pileup/continuum.hpp"
#include "pileup/scaling.hpp"

namespace pileup {

class KernelSplit {
 public:
  /// sigma is measured in the unscaled variable of K; L_alpha(x) = alpha L(alpha x).
  KernelSplit(double sigma, double alpha);

  double sigma() const { return sigma_; }
  double alpha() const { return alpha_; }

  double L(double x) const;
  double M(double x) const;
  double L_alpha(double x) const { return alpha_ * L(alpha_ * x); }
  double M_alpha(double x) const { return alpha_ * M(alpha_ * x); }

  /// int_R M = 2 int_0^sigma M.
  double M_integral() const { return 2.0 * m0_; }

  /// Antiderivative of L from 0 (odd) and second antiderivative (even).
  double L_integral(double u) const;
  double L_second_integral(double u) const;

  /// (1/h^2) int_0^h int_{kh}^{(k+1)h} L_alpha(y - x) dy dx.
  double cell_pair_coefficient(int k, double h) const;

 private:
  double sigma_, alpha_;
  double a0_, b0_;  // L(t) = a0 + b0 |t| on |t| <= sigma
  double m0_, m1_;  // int_0^sigma M, int_0^sigma t M
};

inline KernelSplit split_kernel(double sigma, double alpha) { return KernelSplit(sigma, alpha); }

struct SignedMeasureOnGrid {
  Grid grid;
  Eigen::VectorXd cells;                          // signed cell masses, uniform inside each cell
  std::vector<std::pair<double, double>> atoms;   // (position, weight)

  double total_mass() const;
};

SignedMeasureOnGrid from_density(const GridDensity& rho, double weight = 1.0);
SignedMeasureOnGrid empirical_measure(const Grid& g, const Eigen::VectorXd& x);

/// nu_n = (1/n) sum delta_{x_i} - rho.
SignedMeasureOnGrid discrepancy_measure(const Eigen::VectorXd& x, const GridDensity& rho);

/// (nu1, nu2)_L, exact for cell-cell and atom-cell pairs; atom pairs use
/// L_alpha including L_alpha(0) on coincident atoms.  Throws DomainError on
/// mismatched grids.
double l_inner_product(const SignedMeasureOnGrid& nu1, const SignedMeasureOnGrid& nu2, const KernelSplit& split);

/// sigma = alpha / (q_alpha n) clamped to (1e-8, 1/2]; `clamped` reports
/// whether the raw value was above 1/2.
double default_sigma(double alpha, double q_alpha, int n, bool* clamped = nullptr);

struct DiscrepancyReport {
  double sigma = 0.0;
  bool sigma_clamped = false;
  double norm = 0.0;           // ||nu_n||_{L_alpha}
  double half_norm_sq = 0.0;
  double self_correction = 0.0;  // L_alpha(0) / n
  double energy_gap = 0.0;       // E_n^alpha(x) - E^alpha(rho)
  double scale = 0.0;            // (alpha/n) log(q_alpha n / alpha)
  double measured_C = 0.0;       // (half_norm_sq - energy_gap) / scale
};

DiscrepancyReport discrepancy_norm(const ScaleFrame& f, const Eigen::VectorXd& xbar, double discrete_energy,
                                   const GridDensity& rhobar, double continuum_energy, double q_alpha,
                                   double sigma = -1.0);

nlohmann::json to_json(const DiscrepancyReport& r);

}  // namespace pileup
