#include "pileup/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

#include "pileup/error.hpp"
#include "pileup/kernel.hpp"

namespace pileup {

ScaleConstants scale_constants(const ScaleFrame& f, const GridDensity& rho) {
  ScaleConstants c;
  const double n = f.n, a = f.alpha;
  c.q2_sup = q_alpha_d2_sup(f, rho.y1, rho.y2);
  c.q_alpha = c.q2_sup + 1.0;
  c.A_scale = std::min(a / n * std::log(n / a * (1.0 + c.q2_sup)), 1.0);
  // raw route: beta alpha^3 / n sup Q'' over alpha supp rho, with beta = n / P(alpha)
  const double raw_sup =
      f.potential->scaled_d2_sup(a * rho.y1, a * rho.y2, 3.0 * std::log(a) - f.log_p_alpha);
  c.B_scale = n * n / a * std::min(a / n * std::log(n / a * (1.0 + raw_sup)), 1.0);
  return c;
}

SolvedPair solve_pair(const ScaleFrame& f, const ContinuumOptions& copt, const DiscreteOptions& dopt,
                      const ContinuumSolution* cached) {
  SolvedPair s;
  s.frame = f;
  s.continuum = cached ? *cached : minimize_continuum(f, copt);
  s.continuum.report.F_raw = f.gamma * s.continuum.report.F;
  Eigen::VectorXd init = quantile_init(s.continuum.rho, f.n);
  bool ordered = true;
  for (Eigen::Index i = 1; i < init.size(); ++i) ordered = ordered && init[i] > init[i - 1];
  if (!ordered) {
    spdlog::debug("quantile start not strictly ordered at n={} alpha={}; using uniform start", f.n, f.alpha);
    s.discrete = minimize_discrete(f, std::nullopt, dopt);
  } else {
    s.discrete = minimize_discrete(f, init, dopt);
  }
  return s;
}

BoundsReport verify_theorems(const SolvedPair& s, const VerifyOptions& opt) {
  if (!s.discrete.report.converged) throw DomainError("verify_theorems: discrete solution did not converge");
  if (!s.continuum.report.converged) throw DomainError("verify_theorems: continuum solution did not converge");
  const ScaleFrame& f = s.frame;
  const ScaleConstants c = scale_constants(f, s.continuum.rho);
  BoundsReport r;
  r.n = f.n;
  r.alpha = f.alpha;
  r.beta = f.beta;
  r.gamma = f.gamma;
  r.q_alpha = c.q_alpha;
  r.A_scale = c.A_scale;
  r.B_scale = c.B_scale;
  r.E_disc = s.discrete.report.energy;
  r.E_cont = s.continuum.report.energy;
  r.F_disc = s.discrete.report.F;
  r.F_cont = s.continuum.report.F;
  r.FD = f.gamma * r.F_disc;
  r.FC = f.gamma * r.F_cont;
  r.energy_diff = r.E_disc - r.E_cont;
  r.potential_diff = r.F_disc - r.F_cont;
  r.raw_energy_diff = f.gamma * r.energy_diff;
  r.raw_potential_diff = r.FD - r.FC;
  r.ratio_E = std::abs(r.energy_diff) / r.A_scale;
  r.ratio_F = -r.potential_diff / std::sqrt(r.A_scale);
  r.ratio_F_linear = -r.potential_diff / r.A_scale;
  r.raw_ratio_E = std::abs(r.raw_energy_diff) / r.B_scale;
  r.raw_ratio_F = -r.raw_potential_diff / std::sqrt(f.n * static_cast<double>(f.n) / f.alpha * r.B_scale);
  r.num_tol = opt.num_tol_rel * std::max(1.0, std::abs(r.F_cont));
  r.pass_sign = r.potential_diff <= r.num_tol;
  r.pass_raw_sign = r.raw_potential_diff <= f.gamma * r.num_tol;
  try {
    r.improvement = improvement_factor(f.n, *f.potential);
  } catch (const std::exception&) {
    r.improvement = std::nan("");
  }
  return r;
}

RatioStability ratio_stability(const std::vector<double>& values, double limit) {
  RatioStability s;
  if (values.empty()) {
    s.pass = true;
    return s;
  }
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  if (values.size() < 2) {
    s.spread = 1.0;
    s.pass = true;
    return s;
  }
  s.spread = s.min > 0.0 ? s.max / s.min : std::numeric_limits<double>::infinity();
  s.pass = s.min > 0.0 && s.spread <= limit;
  return s;
}

RobinBracket robin_bracket(const SolvedPair& s) {
  const ScaleFrame& f = s.frame;
  const double n = f.n;
  RobinBracket b;
  b.n = f.n;
  b.beta = f.beta;
  b.alpha = f.alpha;
  b.FD = f.gamma * s.discrete.report.F;
  b.FC = f.gamma * s.continuum.report.F;
  b.lower = -b.FC / (n - 1.0);
  b.upper = -b.FD / n;
  b.width = b.upper - b.lower;
  b.width_decomposed = b.FD / (n * (n - 1.0)) + (b.FC - b.FD) / (n - 1.0);
  b.ordered = b.lower <= b.upper;
  const ScaleConstants c = scale_constants(f, s.continuum.rho);
  b.ht19_new = std::sqrt(n * n / f.alpha * c.B_scale);
  b.ht19_old = (n + 1.0) / (n - 1.0) * b.FD + (3.0 + std::log(2.0)) * n * n / (n - 1.0);
  b.ht19_ratio = b.ht19_new / b.ht19_old;
  return b;
}

RobinBracket robin_bracket(int n, double beta, PotentialPtr q, const ContinuumOptions& copt,
                           const DiscreteOptions& dopt) {
  return robin_bracket(solve_pair(make_frame(n, beta, std::move(q)), copt, dopt));
}

double improvement_factor(double n, const ConfiningPotential& q) {
  if (!(n > 1.0)) throw DomainError("improvement factor needs n > 1");
  return std::sqrt(q.inverse_primitive(n) * std::log(n) / n);
}

namespace {

// Leftmost x with CDF(x) = t, 0 < t < 1.
double invert_cdf(const GridDensity& rho, const std::vector<double>& cdf, double t) {
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), t);
  const int e = static_cast<int>(it - cdf.begin());
  if (e == 0) return rho.grid.left(0);
  if (cdf[e] == t) {
    int k = e;
    while (k > 0 && cdf[k - 1] == t) --k;
    return rho.grid.left(k);
  }
  const int j = e - 1;
  return rho.grid.left(j) + rho.grid.h() * (t - cdf[j]) / rho.mass[j];
}

std::vector<double> cumulative(const GridDensity& rho) {
  std::vector<double> cdf(rho.grid.m + 1, 0.0);
  for (int i = 0; i < rho.grid.m; ++i) cdf[i + 1] = cdf[i] + rho.mass[i];
  return cdf;
}

}  // namespace

Eigen::VectorXd quantile_points(const GridDensity& rho, int n) {
  if (n < 1) throw DomainError("quantile points need n >= 1");
  const std::vector<double> cdf = cumulative(rho);
  Eigen::VectorXd x(n + 1);
  x[0] = rho.y1;
  x[n] = rho.y2;
  for (int k = 1; k < n; ++k) x[k] = invert_cdf(rho, cdf, static_cast<double>(k) / n);
  return x;
}

Eigen::VectorXd quantile_init(const GridDensity& rho, int n) {
  if (n < 1) throw DomainError("quantile points need n >= 1");
  const std::vector<double> cdf = cumulative(rho);
  Eigen::VectorXd x(n);
  for (int k = 0; k < n; ++k) x[k] = invert_cdf(rho, cdf, (k + 0.5) / n);
  return x;
}

double density_mass(const GridDensity& rho, double a, double b) {
  if (b < a) return -density_mass(rho, b, a);
  const Grid& g = rho.grid;
  double sum = 0.0;
  for (int i = 0; i < g.m; ++i) {
    const double lo = std::max(a, g.left(i)), hi = std::min(b, g.left(i + 1));
    if (hi > lo) sum += rho.mass[i] * (hi - lo) / g.h();
  }
  return sum;
}

DiagonalEnergies diagonal_energies(const Eigen::VectorXd& xhat, const GridDensity& rho, const ScaleFrame& f,
                                   double q_alpha) {
  const int n = static_cast<int>(xhat.size()) - 1;
  if (n < 1) throw DomainError("diagonal energies need at least two points");
  DiagonalEnergies d;
  d.min_gap = std::numeric_limits<double>::infinity();
  const std::vector<double> cdf = cumulative(rho);
  const auto cdf_at = [&](double x) {
    const Grid& g = rho.grid;
    const double s = (x - g.x_lo) / g.h();
    if (s <= 0.0) return 0.0;
    if (s >= g.m) return 1.0;
    const int i = std::min(static_cast<int>(s), g.m - 1);
    return cdf[i] + rho.mass[i] * (s - i);
  };
  for (int i = 1; i <= n; ++i) {
    const double l = xhat[i] - xhat[i - 1];
    if (!(l > 0.0)) throw DomainError("quantile points are not strictly increasing");
    d.D_n += kernel_alpha(l, f.alpha);
    d.D_phi += self_cell_coefficient(l, f.alpha);
    d.min_gap = std::min(d.min_gap, l);
    d.max_mass_error = std::max(d.max_mass_error, std::abs(cdf_at(xhat[i]) - cdf_at(xhat[i - 1]) - 1.0 / n));
  }
  const double nn = static_cast<double>(n) * n;
  d.D_n /= nn;
  d.D_phi /= 2.0 * nn;
  d.pass_order = d.D_n <= 2.0 * d.D_phi;
  d.scale = f.alpha / n * std::log(q_alpha * n / f.alpha);
  d.ratio = d.D_phi / d.scale;
  d.gap_bound = 1.0 / (n * rho.max_density());
  d.pass_gap = d.min_gap >= d.gap_bound * (1.0 - 1e-12);
  return d;
}

nlohmann::json to_json(const ScaleConstants& c) {
  return {{"q2_sup", c.q2_sup}, {"q_alpha", c.q_alpha}, {"A_scale", c.A_scale}, {"B_scale", c.B_scale}};
}

nlohmann::json to_json(const BoundsReport& r) {
  nlohmann::json j = {{"n", r.n},
                      {"alpha", r.alpha},
                      {"beta", r.beta},
                      {"gamma", r.gamma},
                      {"q_alpha", r.q_alpha},
                      {"A_scale", r.A_scale},
                      {"B_scale", r.B_scale},
                      {"E_disc", r.E_disc},
                      {"E_cont", r.E_cont},
                      {"F_disc", r.F_disc},
                      {"F_cont", r.F_cont},
                      {"FD", r.FD},
                      {"FC", r.FC},
                      {"energy_diff", r.energy_diff},
                      {"potential_diff", r.potential_diff},
                      {"raw_energy_diff", r.raw_energy_diff},
                      {"raw_potential_diff", r.raw_potential_diff},
                      {"ratio_E", r.ratio_E},
                      {"ratio_F", r.ratio_F},
                      {"ratio_F_linear", r.ratio_F_linear},
                      {"raw_ratio_E", r.raw_ratio_E},
                      {"raw_ratio_F", r.raw_ratio_F},
                      {"num_tol", r.num_tol},
                      {"improvement_factor", r.improvement},
                      {"pass_sign", r.pass_sign},
                      {"pass_raw_sign", r.pass_raw_sign}};
  j["pass_ratio"] = r.pass_ratio ? nlohmann::json(*r.pass_ratio) : nlohmann::json();
  return j;
}

nlohmann::json to_json(const RobinBracket& r) {
  return {{"n", r.n},
          {"beta", r.beta},
          {"alpha", r.alpha},
          {"FD", r.FD},
          {"FC", r.FC},
          {"lower", r.lower},
          {"upper", r.upper},
          {"width", r.width},
          {"width_decomposed", r.width_decomposed},
          {"ordered", r.ordered},
          {"ht19_new", r.ht19_new},
          {"ht19_old", r.ht19_old},
          {"ht19_ratio", r.ht19_ratio}};
}

nlohmann::json to_json(const DiagonalEnergies& d) {
  return {{"D_n", d.D_n},
          {"D_phi", d.D_phi},
          {"pass_order", d.pass_order},
          {"scale", d.scale},
          {"ratio", d.ratio},
          {"min_gap", d.min_gap},
          {"gap_bound", d.gap_bound},
          {"pass_gap", d.pass_gap},
          {"max_mass_error", d.max_mass_error}};
}

}  // namespace pileup
