#include "pileup/discrete.hpp"

#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

#include "pileup/kernel.hpp"

namespace pileup {

ParticleConfig ParticleConfig::to(Space target) const {
  if (target == space) return *this;
  ParticleConfig out = *this;
  out.space = target;
  out.positions = target == Space::raw ? Eigen::VectorXd(frame.alpha * positions)
                                       : Eigen::VectorXd(positions / frame.alpha);
  return out;
}

void require_ordered(const Eigen::VectorXd& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw DomainError("configuration has a non-finite position");
    if (i > 0 && !(x[i] > x[i - 1])) {
      std::ostringstream os;
      os << "configuration is not strictly increasing at index " << i << " (" << x[i - 1] << ", " << x[i] << ")";
      throw DomainError(os.str());
    }
  }
}

namespace {

bool is_ordered(const Eigen::VectorXd& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) return false;
    if (i > 0 && !(x[i] > x[i - 1])) return false;
  }
  return true;
}

double energy_unchecked(const ScaleFrame& f, const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  const double a = f.alpha;
  double pair = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) pair += kernel(a * (x[j] - x[i]));
  }
  double conf = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) conf += q_alpha_value(f, x[i]);
  return a * pair / (n * (n - 1.0)) + conf / n;
}

double confinement(const ScaleFrame& f, const Eigen::VectorXd& x) {
  double conf = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) conf += q_alpha_value(f, x[i]);
  return conf / static_cast<double>(x.size());
}

}  // namespace

double discrete_energy(const ScaleFrame& f, const Eigen::VectorXd& x) {
  require_ordered(x);
  if (x.size() != f.n) throw DomainError("configuration size does not match the frame's n");
  return energy_unchecked(f, x);
}

DiscreteDerivatives discrete_derivatives(const ScaleFrame& f, const Eigen::VectorXd& x, bool with_hessian) {
  require_ordered(x);
  const Eigen::Index n = x.size();
  if (n != f.n) throw DomainError("configuration size does not match the frame's n");
  const double a = f.alpha;
  const double w = 1.0 / (n * (n - 1.0));
  DiscreteDerivatives out;
  out.gradient = Eigen::VectorXd::Zero(n);
  if (with_hessian) out.hessian = Eigen::MatrixXd::Zero(n, n);
  double pair = 0.0, conf = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double u = a * (x[i] - x[j]);
      pair += kernel(u);
      const double g = w * a * a * kernel_d1(u);
      out.gradient[i] += g;
      out.gradient[j] -= g;
      if (with_hessian) {
        const double h = w * a * a * a * kernel_d2(u);
        out.hessian(i, j) -= h;
        out.hessian(j, i) -= h;
        out.hessian(i, i) += h;
        out.hessian(j, j) += h;
      }
    }
    const Derivs q = q_alpha(f, x[i]);
    conf += q.value;
    out.gradient[i] += q.d1 / n;
    if (with_hessian) out.hessian(i, i) += q.d2 / n;
  }
  out.energy = a * pair * w + conf / n;
  return out;
}

PotentialValues discrete_potential_values(const ScaleFrame& f, const Eigen::VectorXd& xbar) {
  const double e = discrete_energy(f, xbar);
  const double fa = e - 0.5 * confinement(f, xbar);
  return {fa, f.gamma * fa};
}

DiscreteSolution minimize_discrete(const ScaleFrame& f, std::optional<Eigen::VectorXd> init,
                                   const DiscreteOptions& opt) {
  const int n = f.n;
  Eigen::VectorXd x = init ? *init : Eigen::VectorXd::LinSpaced(n, -1.0, 1.0);
  if (x.size() != n) throw DomainError("initial configuration size does not match n");
  require_ordered(x);

  DiscreteSolution sol;
  DiscreteReport& rep = sol.report;
  DiscreteDerivatives d = discrete_derivatives(f, x);
  const auto finish = [&](bool converged) {
    sol.x = x;
    rep.energy = d.energy;
    rep.confinement = confinement(f, x);
    rep.F = d.energy - 0.5 * rep.confinement;
    rep.F_raw = f.gamma * rep.F;
    rep.grad_norm = d.gradient.lpNorm<Eigen::Infinity>();
    rep.tol_g = opt.tol_g_rel * std::max(1.0, std::abs(d.energy));
    rep.converged = converged;
  };

  for (int it = 0;; ++it) {
    const double gnorm = d.gradient.lpNorm<Eigen::Infinity>();
    const double tol = opt.tol_g_rel * std::max(1.0, std::abs(d.energy));
    rep.iterations = it;
    if (gnorm <= tol) {
      finish(true);
      return sol;
    }
    if (it >= opt.max_iter) break;

    Eigen::LLT<Eigen::MatrixXd> llt(d.hessian);
    if (llt.info() != Eigen::Success) {
      double lambda = 1e-12 * d.hessian.trace() / n;
      for (int k = 0; k < 40; ++k, lambda *= 10.0) {
        llt.compute(d.hessian + lambda * Eigen::MatrixXd::Identity(n, n));
        if (llt.info() == Eigen::Success) break;
      }
      ++rep.regularized_steps;
    }
    const Eigen::VectorXd p = -llt.solve(d.gradient);
    const double slope = d.gradient.dot(p);

    // Armijo on E while the predicted decrease is resolvable; below the
    // rounding level of E require an ordered step that reduces the gradient.
    const double round_level = 1e-13 * std::max(1.0, std::abs(d.energy));
    bool accepted = false;
    double t = 1.0;
    for (int k = 0; k < 60 && !accepted; ++k, t *= 0.5) {
      const Eigen::VectorXd xn = x + t * p;
      if (!is_ordered(xn)) continue;
      if (-t * slope > round_level) {
        const double en = energy_unchecked(f, xn);
        if (en <= d.energy + 1e-4 * t * slope) {
          x = xn;
          d = discrete_derivatives(f, x);
          accepted = true;
        }
      } else {
        DiscreteDerivatives dn = discrete_derivatives(f, xn);
        if (dn.energy <= d.energy + round_level && dn.gradient.lpNorm<Eigen::Infinity>() < gnorm) {
          x = xn;
          d = std::move(dn);
          accepted = true;
        }
      }
    }
    if (!accepted) break;
    spdlog::trace("newton it={} E={:.17g} |g|={:.3e}", it, d.energy, d.gradient.lpNorm<Eigen::Infinity>());
  }
  finish(false);
  std::ostringstream os;
  os << "discrete Newton did not converge: |grad|_inf = " << rep.grad_norm << " > tol " << rep.tol_g << " after "
     << rep.iterations << " iterations";
  throw DiscreteConvergenceError(os.str(), sol);
}

nlohmann::json to_json(const DiscreteReport& r) {
  return {{"energy", r.energy},       {"F_alpha", r.F},
          {"F_raw", r.F_raw},         {"confinement", r.confinement},
          {"grad_norm", r.grad_norm}, {"tol_g", r.tol_g},
          {"iterations", r.iterations}, {"regularized_steps", r.regularized_steps},
          {"converged", r.converged}};
}

}  // namespace pileup
