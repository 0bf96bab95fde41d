#include "pileup/continuum.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>
#include <vector>

#include <spdlog/spdlog.h>
#include <unsupported/Eigen/FFT>

#include "pileup/error.hpp"
#include "pileup/kernel.hpp"
#include "pileup/quadrature.hpp"

namespace pileup {

void validate(const Grid& g) {
  if (!(g.x_hi > g.x_lo) || !std::isfinite(g.x_lo) || !std::isfinite(g.x_hi)) {
    throw ConfigError("grid needs finite x_lo < x_hi");
  }
  if (g.m < 2) throw ConfigError("grid needs m >= 2");
}

GridDensity make_density(const Grid& g, Eigen::VectorXd mass, double support_eps_rel) {
  validate(g);
  if (mass.size() != g.m) throw DomainError("mass vector does not match the grid");
  mass = mass.cwiseMax(0.0);
  const double total = mass.sum();
  if (!(total > 0.0)) throw DomainError("density has no mass");
  mass /= total;
  GridDensity rho;
  rho.grid = g;
  rho.mass = std::move(mass);
  const double eps = support_eps_rel * rho.mass.maxCoeff();
  for (int i = 0; i < g.m; ++i) {
    if (rho.mass[i] > eps) {
      if (rho.first < 0) rho.first = i;
      rho.last = i;
    }
  }
  rho.y1 = g.left(rho.first);
  rho.y2 = g.left(rho.last + 1);
  return rho;
}

GridDensity uniform_density(const Grid& g, double a, double b) {
  validate(g);
  if (!(b > a)) throw DomainError("uniform density needs a < b");
  Eigen::VectorXd m(g.m);
  for (int i = 0; i < g.m; ++i) {
    const double lo = std::max(a, g.left(i));
    const double hi = std::min(b, g.left(i + 1));
    m[i] = std::max(0.0, hi - lo) / (b - a);
  }
  return make_density(g, std::move(m), 0.0);
}

// ---------------------------------------------------------------------------
// Cell-pair coefficients.  With H = alpha h,
//   a_k = alpha c(k, H),  c(k, H) = (1/H^2) int_{-H}^{H} (H - |t|) K(kH + t) dt.
// K = -log|x| + S(x): the log part has the closed form
//   c_log = -log H + 3/2 - T_k,  T_k = [(k+1)^2 log(k+1) - 2k^2 log k + (k-1)^2 log(k-1)] / 2,
// and for k >= 4 the series T_k = log k + 3/2 + sum_{j>=2} c_{2j} k^{2-2j} avoids cancellation.

namespace {

double log_part(int k, double H) {
  if (k < 4) {
    const auto g = [](double j) { return j > 0.0 ? j * j * std::log(j) : 0.0; };
    const double t = 0.5 * (g(k + 1.0) - 2.0 * g(k) + g(std::abs(k - 1.0)));
    return -std::log(H) + 1.5 - t;
  }
  const double s2 = 1.0 / (static_cast<double>(k) * k);
  double sum = 0.0, p = s2;
  for (int j = 2; j < 40; ++j, p *= s2) {
    const double c = -1.0 / (2.0 * j) + 2.0 / (2.0 * j - 1.0) - 1.0 / (2.0 * j - 2.0);
    const double term = c * p;
    sum += term;
    if (std::abs(term) < 1e-18) break;
  }
  return -std::log(H) - std::log(static_cast<double>(k)) - sum;
}

template <class F>
double triangle_average(F&& f, int k, double H) {
  const double c = k * H;
  const double left = quad::gauss<8>([&](double t) { return (H + t) * f(c + t); }, -H, 0.0);
  const double right = quad::gauss<8>([&](double t) { return (H - t) * f(c + t); }, 0.0, H);
  return (left + right) / (H * H);
}

double unit_coefficient(int k, double H) {
  if (k >= 3 && (k - 1) * H >= 1.0) {
    return triangle_average([](double u) { return kernel(u); }, k, H);
  }
  return log_part(k, H) + triangle_average([](double u) { return kernel_smooth_part(u); }, k, H);
}

}  // namespace

double cell_pair_coefficient(int k, double h, double alpha) {
  if (k < 0) k = -k;
  if (!(h > 0.0) || !(alpha > 0.0)) throw DomainError("cell coefficient needs h > 0 and alpha > 0");
  return alpha * unit_coefficient(k, alpha * h);
}

KernelMatrix::KernelMatrix(const Grid& g, double alpha) : grid_(g), alpha_(alpha) {
  validate(g);
  coeff_.resize(g.m);
  const double h = g.h();
  for (int k = 0; k < g.m; ++k) coeff_[k] = cell_pair_coefficient(k, h, alpha);
  const int n = 2 * g.m;
  std::vector<double> c(n, 0.0);
  for (int k = 0; k < g.m; ++k) c[k] = coeff_[k];
  for (int k = 1; k < g.m; ++k) c[n - k] = coeff_[k];
  std::vector<std::complex<double>> spec;
  Eigen::FFT<double> fft;
  fft.fwd(spec, c);
  symbol_ = Eigen::Map<Eigen::VectorXcd>(spec.data(), n);
}

Eigen::VectorXd KernelMatrix::apply(const Eigen::VectorXd& m) const {
  const int n = 2 * grid_.m;
  std::vector<double> in(n, 0.0);
  for (int i = 0; i < grid_.m; ++i) in[i] = m[i];
  std::vector<std::complex<double>> spec;
  Eigen::FFT<double> fft;
  fft.fwd(spec, in);
  for (int i = 0; i < n; ++i) spec[i] *= symbol_[i];
  std::vector<double> out;
  fft.inv(out, spec);
  return Eigen::Map<Eigen::VectorXd>(out.data(), grid_.m);
}

Eigen::VectorXd KernelMatrix::apply_exact(const Eigen::VectorXd& m) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(grid_.m);
  for (int j = 0; j < grid_.m; ++j) {
    if (m[j] == 0.0) continue;
    for (int i = 0; i < grid_.m; ++i) out[i] += coeff_[std::abs(i - j)] * m[j];
  }
  return out;
}

Eigen::MatrixXd KernelMatrix::dense() const {
  Eigen::MatrixXd a(grid_.m, grid_.m);
  for (int i = 0; i < grid_.m; ++i) {
    for (int j = 0; j < grid_.m; ++j) a(i, j) = coeff_[std::abs(i - j)];
  }
  return a;
}

constexpr double kQCap = 1e200;

Eigen::VectorXd cell_average_q(const ScaleFrame& f, const Grid& g) {
  validate(g);
  Eigen::VectorXd q(g.m);
  const double h = g.h();
  for (int i = 0; i < g.m; ++i) {
    q[i] = quad::gauss<4>([&f](double x) { return q_alpha_value(f, x); }, g.left(i), g.left(i + 1)) / h;
    // cells where Q_alpha overflows can never carry mass
    if (!(q[i] < kQCap)) q[i] = kQCap;
  }
  return q;
}

ContinuumEnergy continuum_energy(const KernelMatrix& A, const Eigen::VectorXd& q, const GridDensity& rho) {
  if (!(A.grid() == rho.grid)) throw DomainError("kernel matrix and density use different grids");
  ContinuumEnergy e;
  e.interaction = 0.5 * rho.mass.dot(A.apply_exact(rho.mass));
  e.confinement = q.dot(rho.mass);
  e.energy = e.interaction + e.confinement;
  e.F = e.energy - 0.5 * e.confinement;
  return e;
}

ContinuumEnergy continuum_energy(const ScaleFrame& f, const GridDensity& rho) {
  const KernelMatrix A(rho.grid, f.alpha);
  return continuum_energy(A, cell_average_q(f, rho.grid), rho);
}

// ---------------------------------------------------------------------------

namespace {

// Euclidean projection onto {m >= 0, sum m = 1}.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cumsum += u[i];
    const double t = (cumsum - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

double largest_eigenvalue(const KernelMatrix& A) {
  const int m = A.grid().m;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m) / std::sqrt(static_cast<double>(m));
  double lambda = 0.0;
  for (int it = 0; it < 60; ++it) {
    Eigen::VectorXd w = A.apply(v);
    lambda = w.norm();
    v = w / lambda;
  }
  return lambda;
}

struct KktSolution {
  Eigen::VectorXd m;  // full length
  double lambda = 0.0;
};

KktSolution solve_kkt(const KernelMatrix& A, const Eigen::VectorXd& q, const std::vector<int>& support) {
  const int s = static_cast<int>(support.size());
  Eigen::MatrixXd a(s, s);
  Eigen::VectorXd qs(s);
  for (int i = 0; i < s; ++i) {
    qs[i] = q[support[i]];
    for (int j = 0; j < s; ++j) a(i, j) = A(support[i], support[j]);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  const Eigen::VectorXd y = ldlt.solve(Eigen::VectorXd::Ones(s));
  const Eigen::VectorXd z = ldlt.solve(qs);
  KktSolution out;
  out.lambda = (1.0 + z.sum()) / y.sum();
  out.m = Eigen::VectorXd::Zero(A.grid().m);
  for (int i = 0; i < s; ++i) out.m[support[i]] = out.lambda * y[i] - z[i];
  return out;
}

}  // namespace

ElResidual el_residual(const GridDensity& rho, const KernelMatrix& A, const Eigen::VectorXd& q) {
  const ContinuumEnergy e = continuum_energy(A, q, rho);
  const Eigen::VectorXd v = A.apply_exact(rho.mass) + q;
  const double c = 2.0 * e.F;
  const double eps = 1e-10 * rho.mass.maxCoeff();
  ElResidual r;
  r.F = e.F;
  r.off_support_min_slack = std::numeric_limits<double>::infinity();
  for (int i = 0; i < rho.grid.m; ++i) {
    if (rho.mass[i] > eps) {
      r.on_support_max_dev = std::max(r.on_support_max_dev, std::abs(v[i] - c));
    } else {
      r.off_support_min_slack = std::min(r.off_support_min_slack, v[i] - c);
    }
  }
  return r;
}

ElResidual el_residual(const GridDensity& rho, const ScaleFrame& f) {
  const KernelMatrix A(rho.grid, f.alpha);
  return el_residual(rho, A, cell_average_q(f, rho.grid));
}

ContinuumSolution minimize_continuum(const ScaleFrame& f, const ContinuumOptions& opt) {
  const KernelMatrix A(opt.grid, f.alpha);
  return minimize_continuum(f, A, cell_average_q(f, opt.grid), opt);
}

ContinuumSolution minimize_continuum(const ScaleFrame& f, const KernelMatrix& A, const Eigen::VectorXd& q,
                                     const ContinuumOptions& opt) {
  const Grid& g = opt.grid;
  if (!(A.grid() == g) || q.size() != g.m) throw DomainError("kernel matrix, q and grid disagree");
  if (A.alpha() != f.alpha) throw DomainError("kernel matrix alpha differs from the frame's alpha");
  const int m = g.m;

  // accelerated projected gradient with adaptive restart
  const double step = 1.0 / (1.02 * largest_eigenvalue(A));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) x[i] = std::abs(g.center(i)) <= 1.0 ? 1.0 : 0.0;
  if (x.sum() == 0.0) x.setOnes();
  x /= x.sum();
  Eigen::VectorXd y = x;
  double t = 1.0;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    const Eigen::VectorXd grad = A.apply(y) + q;
    const Eigen::VectorXd xn = project_simplex(y - step * grad);
    const double change = (xn - x).lpNorm<1>();
    if (grad.dot(xn - x) > 0.0) {
      t = 1.0;
      y = xn;
    } else {
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = xn + ((t - 1.0) / tn) * (xn - x);
      t = tn;
    }
    x = xn;
    if (change < 1e-9) break;
  }

  // active-set polish
  std::vector<int> support;
  for (int i = 0; i < m; ++i) {
    if (x[i] > 0.0) support.push_back(i);
  }
  KktSolution kkt;
  int round = 0;
  bool settled = false;
  for (; round < opt.max_polish; ++round) {
    kkt = solve_kkt(A, q, support);
    std::vector<int> kept;
    for (int i : support) {
      if (kkt.m[i] >= 0.0) kept.push_back(i);
    }
    if (kept.size() < support.size()) {
      support = std::move(kept);
      continue;
    }
    const Eigen::VectorXd v = A.apply_exact(kkt.m) + q;
    const double tol = 1e-12 * std::max(1.0, std::abs(kkt.lambda));
    std::vector<bool> in(m, false);
    for (int i : support) in[i] = true;
    bool added = false;
    for (int i = 0; i < m; ++i) {
      if (!in[i] && v[i] - kkt.lambda < -tol) {
        in[i] = true;
        added = true;
      }
    }
    if (!added) {
      settled = true;
      break;
    }
    support.clear();
    for (int i = 0; i < m; ++i) {
      if (in[i]) support.push_back(i);
    }
  }

  ContinuumSolution sol;
  sol.rho = make_density(g, settled ? kkt.m : x, opt.support_eps_rel);
  if (sol.rho.first == 0 || sol.rho.last == m - 1) {
    std::ostringstream os;
    os << "continuum support [" << sol.rho.y1 << ", " << sol.rho.y2 << "] touches the domain [" << g.x_lo << ", "
       << g.x_hi << "]; enlarge the grid domain";
    throw DomainError(os.str());
  }
  ContinuumReport& r = sol.report;
  const ContinuumEnergy e = continuum_energy(A, q, sol.rho);
  r.energy = e.energy;
  r.interaction = e.interaction;
  r.confinement = e.confinement;
  r.F = e.F;
  r.F_el = settled ? 0.5 * kkt.lambda : e.F;
  r.F_raw = f.gamma * e.F;
  r.el = el_residual(sol.rho, A, q);
  r.el_tol = opt.el_tol_rel * std::max(1.0, std::abs(r.F));
  r.iterations = it;
  r.polish_rounds = round;
  r.support_cells = sol.rho.last - sol.rho.first + 1;
  r.converged = settled && r.el.on_support_max_dev <= r.el_tol && r.el.off_support_min_slack >= -r.el_tol &&
                std::abs(r.F - r.F_el) <= r.el_tol;
  spdlog::debug("continuum alpha={} E={:.17g} F={:.17g} it={} polish={} converged={}", f.alpha, r.energy, r.F, it,
                round, r.converged);
  return sol;
}

DensityDiagnostics density_diagnostics(const GridDensity& rho, const ScaleFrame& f) {
  DensityDiagnostics d;
  d.y1 = rho.y1;
  d.y2 = rho.y2;
  d.width = rho.y2 - rho.y1;
  d.max_density = rho.max_density();
  d.q2_sup = q_alpha_d2_sup(f, rho.y1, rho.y2);
  d.q_sup = std::max({q_alpha_value(f, rho.y1), q_alpha_value(f, rho.y2), 0.0});
  d.density_ratio = d.max_density / (d.q2_sup + 1.0);
  for (int i = rho.first + 1; i < rho.last; ++i) {
    const double x = rho.grid.center(i);
    d.edge_ratio = std::max(d.edge_ratio, rho.density(i) / std::sqrt((x - rho.y1) * (rho.y2 - x)));
  }
  d.contains_zero = rho.y1 <= 0.0 && 0.0 <= rho.y2;
  return d;
}

nlohmann::json to_json(const ContinuumReport& r) {
  return {{"energy", r.energy},
          {"interaction", r.interaction},
          {"confinement", r.confinement},
          {"F_alpha", r.F},
          {"F_alpha_el", r.F_el},
          {"F_raw", r.F_raw},
          {"el_on_support_max_dev", r.el.on_support_max_dev},
          {"el_off_support_min_slack", r.el.off_support_min_slack},
          {"el_tol", r.el_tol},
          {"iterations", r.iterations},
          {"polish_rounds", r.polish_rounds},
          {"support_cells", r.support_cells},
          {"converged", r.converged}};
}

nlohmann::json to_json(const DensityDiagnostics& d) {
  return {{"y1", d.y1},
          {"y2", d.y2},
          {"width", d.width},
          {"max_density", d.max_density},
          {"q2_sup", d.q2_sup},
          {"q_sup", d.q_sup},
          {"density_ratio", d.density_ratio},
          {"edge_ratio", d.edge_ratio},
          {"contains_zero", d.contains_zero}};
}

}  // namespace pileup
