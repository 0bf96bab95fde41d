#include "pileup/kernel_split.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "pileup/error.hpp"
#include "pileup/kernel.hpp"

namespace pileup {

KernelSplit::KernelSplit(double sigma, double alpha) : sigma_(sigma), alpha_(alpha) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("kernel split needs sigma > 0");
  if (!(alpha > 0.0)) throw DomainError("kernel split needs alpha > 0");
  b0_ = kernel_d1(sigma);
  a0_ = kernel(sigma) - sigma * b0_;
  const double k1 = kernel_integral(sigma);
  const double k2 = kernel_second_integral(sigma);
  m0_ = k1 - (a0_ * sigma + b0_ * sigma * sigma / 2.0);
  m1_ = (sigma * k1 - k2) - (a0_ * sigma * sigma / 2.0 + b0_ * sigma * sigma * sigma / 3.0);
}

double KernelSplit::L(double x) const {
  const double ax = std::abs(x);
  if (ax <= sigma_) return a0_ + b0_ * ax;
  return kernel(ax);
}

double KernelSplit::M(double x) const {
  const double ax = std::abs(x);
  if (ax >= sigma_) return 0.0;
  return kernel(ax) - (a0_ + b0_ * ax);
}

double KernelSplit::L_integral(double u) const {
  const double au = std::abs(u);
  const double v = au <= sigma_ ? a0_ * au + b0_ * au * au / 2.0 : kernel_integral(au) - m0_;
  return u < 0.0 ? -v : v;
}

double KernelSplit::L_second_integral(double u) const {
  const double au = std::abs(u);
  if (au <= sigma_) return a0_ * au * au / 2.0 + b0_ * au * au * au / 6.0;
  return kernel_second_integral(au) - au * m0_ + m1_;
}

double KernelSplit::cell_pair_coefficient(int k, double h) const {
  if (k < 0) k = -k;
  const double H = alpha_ * h;
  // L = K on the whole window: reuse the stable kernel coefficient
  if (k >= 1 && (k - 1) * H >= sigma_) return pileup::cell_pair_coefficient(k, h, alpha_);
  const double d2 = L_second_integral((k + 1) * H) - 2.0 * L_second_integral(k * H) +
                    L_second_integral(std::abs(k - 1.0) * H);
  return alpha_ * d2 / (H * H);
}

// ---------------------------------------------------------------------------

double SignedMeasureOnGrid::total_mass() const {
  double s = cells.sum();
  for (const auto& a : atoms) s += a.second;
  return s;
}

SignedMeasureOnGrid from_density(const GridDensity& rho, double weight) {
  return {rho.grid, weight * rho.mass, {}};
}

SignedMeasureOnGrid empirical_measure(const Grid& g, const Eigen::VectorXd& x) {
  SignedMeasureOnGrid mu{g, Eigen::VectorXd::Zero(g.m), {}};
  const double w = 1.0 / static_cast<double>(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) mu.atoms.emplace_back(x[i], w);
  return mu;
}

SignedMeasureOnGrid discrepancy_measure(const Eigen::VectorXd& x, const GridDensity& rho) {
  SignedMeasureOnGrid nu = empirical_measure(rho.grid, x);
  nu.cells = -rho.mass;
  return nu;
}

namespace {

std::vector<int> nonzero_cells(const Eigen::VectorXd& c) {
  std::vector<int> idx;
  for (int i = 0; i < c.size(); ++i) {
    if (c[i] != 0.0) idx.push_back(i);
  }
  return idx;
}

// sum over atoms a of w_a * int L_alpha(a - y) dnu_cells(y)
double atoms_against_cells(const std::vector<std::pair<double, double>>& atoms, const Eigen::VectorXd& cells,
                           const Grid& g, const KernelSplit& s) {
  const std::vector<int> idx = nonzero_cells(cells);
  if (idx.empty() || atoms.empty()) return 0.0;
  const int lo = idx.front(), hi = idx.back();
  const double h = g.h();
  const double alpha = s.alpha();
  std::vector<double> edge(hi - lo + 2);
  double total = 0.0;
  for (const auto& [a, w] : atoms) {
    for (int e = lo; e <= hi + 1; ++e) edge[e - lo] = s.L_integral(alpha * (a - g.left(e)));
    double sum = 0.0;
    for (int j : idx) sum += cells[j] * (edge[j - lo] - edge[j + 1 - lo]);
    total += w * sum / h;
  }
  return total;
}

}  // namespace

double l_inner_product(const SignedMeasureOnGrid& nu1, const SignedMeasureOnGrid& nu2, const KernelSplit& split) {
  if (!(nu1.grid == nu2.grid)) throw DomainError("signed measures live on different grids");
  const Grid& g = nu1.grid;
  if (nu1.cells.size() != g.m || nu2.cells.size() != g.m) throw DomainError("cell vector does not match grid");

  double cell_cell = 0.0;
  const std::vector<int> i1 = nonzero_cells(nu1.cells), i2 = nonzero_cells(nu2.cells);
  if (!i1.empty() && !i2.empty()) {
    const int span = std::max(i1.back(), i2.back()) - std::min(i1.front(), i2.front()) + 1;
    std::vector<double> b(span);
    for (int k = 0; k < span; ++k) b[k] = split.cell_pair_coefficient(k, g.h());
    for (int i : i1) {
      double row = 0.0;
      for (int j : i2) row += b[std::abs(i - j)] * nu2.cells[j];
      cell_cell += nu1.cells[i] * row;
    }
  }
  const double atom_cell = atoms_against_cells(nu1.atoms, nu2.cells, g, split) +
                           atoms_against_cells(nu2.atoms, nu1.cells, g, split);
  double atom_atom = 0.0;
  for (const auto& [a, w] : nu1.atoms) {
    for (const auto& [b, v] : nu2.atoms) atom_atom += w * v * split.L_alpha(a - b);
  }
  return cell_cell + atom_cell + atom_atom;
}

double default_sigma(double alpha, double q_alpha, int n, bool* clamped) {
  const double raw = alpha / (q_alpha * n);
  if (clamped) *clamped = raw > 0.5;
  return std::clamp(raw, 1e-8, 0.5);
}

DiscrepancyReport discrepancy_norm(const ScaleFrame& f, const Eigen::VectorXd& xbar, double discrete_energy,
                                   const GridDensity& rhobar, double continuum_energy, double q_alpha,
                                   double sigma) {
  DiscrepancyReport r;
  if (sigma <= 0.0) {
    r.sigma = default_sigma(f.alpha, q_alpha, f.n, &r.sigma_clamped);
    if (r.sigma_clamped) spdlog::warn("sigma = alpha/(q_alpha n) exceeds 1/2 at n={} alpha={}; clamped", f.n, f.alpha);
  } else {
    r.sigma = sigma;
  }
  const KernelSplit split(r.sigma, f.alpha);
  const SignedMeasureOnGrid nu = discrepancy_measure(xbar, rhobar);
  const double sq = l_inner_product(nu, nu, split);
  r.half_norm_sq = 0.5 * sq;
  r.norm = std::sqrt(std::max(0.0, sq));
  r.self_correction = split.L_alpha(0.0) / f.n;
  r.energy_gap = discrete_energy - continuum_energy;
  r.scale = f.alpha / f.n * std::log(q_alpha * f.n / f.alpha);
  r.measured_C = (r.half_norm_sq - r.energy_gap) / r.scale;
  return r;
}

nlohmann::json to_json(const DiscrepancyReport& r) {
  return {{"sigma", r.sigma},
          {"sigma_clamped", r.sigma_clamped},
          {"norm", r.norm},
          {"half_norm_sq", r.half_norm_sq},
          {"self_correction", r.self_correction},
          {"energy_gap", r.energy_gap},
          {"scale", r.scale},
          {"measured_C", r.measured_C}};
}

}  // namespace pileup
