#pragma once

// Continuum energy E^alpha(rho) = 1/2 <K_alpha * rho, rho> + <Q_alpha, rho>
// for piecewise-constant densities on a uniform grid, and its minimizer over
// the probability simplex.

#include <Eigen/Dense>

#include "json.hpp"
#include "pileup/scaling.hpp"

namespace pileup {

struct Grid {
  double x_lo = -4.0;
  double x_hi = 4.0;
  int m = 2048;

  double h() const { return (x_hi - x_lo) / m; }
  double left(int i) const { return x_lo + i * h(); }
  double center(int i) const { return x_lo + (i + 0.5) * h(); }
  bool operator==(const Grid& o) const { return x_lo == o.x_lo && x_hi == o.x_hi && m == o.m; }
};

void validate(const Grid& g);

struct GridDensity {
  Grid grid;
  Eigen::VectorXd mass;  // per cell, sums to 1
  int first = -1;        // outermost cells with density > support_eps
  int last = -1;
  double y1 = 0.0;       // left edge of cell `first`
  double y2 = 0.0;       // right edge of cell `last`

  double density(int i) const { return mass[i] / grid.h(); }
  double max_density() const { return mass.maxCoeff() / grid.h(); }
};

/// Wraps cell masses, clamps negatives to 0, renormalizes and detects the
/// support with threshold support_eps_rel * max density.
GridDensity make_density(const Grid& g, Eigen::VectorXd mass, double support_eps_rel = 1e-10);

/// Density equal to 1/(b - a) on [a, b] (cells overlapping partially get
/// their share of mass).
GridDensity uniform_density(const Grid& g, double a, double b);

/// (1/h^2) int_0^h int_{kh}^{(k+1)h} K_alpha(y - x) dy dx.
double cell_pair_coefficient(int k, double h, double alpha);

/// (1/l^2) int int_{[0,l]^2} K_alpha(x - y).
inline double self_cell_coefficient(double l, double alpha) { return cell_pair_coefficient(0, l, alpha); }

/// Symmetric Toeplitz matrix A_ij = a_{|i-j|} of cell-pair interactions.
class KernelMatrix {
 public:
  KernelMatrix(const Grid& g, double alpha);

  const Grid& grid() const { return grid_; }
  double alpha() const { return alpha_; }
  double operator()(int i, int j) const { return coeff_[std::abs(i - j)]; }
  const Eigen::VectorXd& coefficients() const { return coeff_; }

  /// A m, evaluated by FFT (circulant embedding).
  Eigen::VectorXd apply(const Eigen::VectorXd& m) const;
  /// A m by direct summation over the nonzero entries of m.
  Eigen::VectorXd apply_exact(const Eigen::VectorXd& m) const;
  Eigen::MatrixXd dense() const;

 private:
  Grid grid_;
  double alpha_;
  Eigen::VectorXd coeff_;
  Eigen::VectorXcd symbol_;  // FFT of the circulant embedding
};

inline KernelMatrix assemble_kernel_matrix(const Grid& g, double alpha) { return KernelMatrix(g, alpha); }

/// Cell averages of Q_alpha (4-point Gauss per cell).
Eigen::VectorXd cell_average_q(const ScaleFrame& f, const Grid& g);

struct ContinuumEnergy {
  double energy = 0.0;
  double interaction = 0.0;  // 1/2 m^T A m
  double confinement = 0.0;  // q^T m
  double F = 0.0;            // energy - confinement / 2
};

ContinuumEnergy continuum_energy(const KernelMatrix& A, const Eigen::VectorXd& q, const GridDensity& rho);
ContinuumEnergy continuum_energy(const ScaleFrame& f, const GridDensity& rho);

struct ContinuumOptions {
  Grid grid;
  double support_eps_rel = 1e-10;
  double el_tol_rel = 1e-5;
  int max_iter = 4000;       // accelerated projected-gradient iterations
  int max_polish = 200;      // active-set rounds
};

struct ElResidual {
  double on_support_max_dev = 0.0;      // max |v - 2F| on the support
  double off_support_min_slack = 0.0;   // min (v - 2F) off the support
  double F = 0.0;
};

struct ContinuumReport {
  double energy = 0.0;
  double interaction = 0.0;
  double confinement = 0.0;
  double F = 0.0;        // from E - 1/2 int Q_alpha rho
  double F_el = 0.0;     // EL multiplier / 2
  double F_raw = 0.0;    // F_n^C = gamma F
  ElResidual el;
  double el_tol = 0.0;
  int iterations = 0;
  int polish_rounds = 0;
  int support_cells = 0;
  bool converged = false;
};

struct ContinuumSolution {
  GridDensity rho;
  ContinuumReport report;
};

/// Accelerated projected gradient on the simplex followed by an active-set
/// polish that solves the EL system A_SS m_S + q_S = lambda 1, sum m_S = 1.
/// Throws DomainError when the support reaches the domain boundary.
ContinuumSolution minimize_continuum(const ScaleFrame& f, const ContinuumOptions& opt = {});
ContinuumSolution minimize_continuum(const ScaleFrame& f, const KernelMatrix& A, const Eigen::VectorXd& q,
                                     const ContinuumOptions& opt);

/// v = A m + q on every cell; the EL constant is 2F with F = E - 1/2 q^T m.
ElResidual el_residual(const GridDensity& rho, const KernelMatrix& A, const Eigen::VectorXd& q);
ElResidual el_residual(const GridDensity& rho, const ScaleFrame& f);

struct DensityDiagnostics {
  double y1 = 0.0, y2 = 0.0, width = 0.0;
  double max_density = 0.0;
  double q2_sup = 0.0;          // ||Q_alpha''|| on [y1, y2]
  double q_sup = 0.0;           // ||Q_alpha|| on [y1, y2]
  double density_ratio = 0.0;   // max density / (q2_sup + 1)
  double edge_ratio = 0.0;      // max rho / sqrt((x - y1)(y2 - x)) over interior cells
  bool contains_zero = false;
};

DensityDiagnostics density_diagnostics(const GridDensity& rho, const ScaleFrame& f);

nlohmann::json to_json(const ContinuumReport& r);
nlohmann::json to_json(const DensityDiagnostics& d);

}  // namespace pileup
