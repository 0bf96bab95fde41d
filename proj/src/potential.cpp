#include "pileup/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "pileup/error.hpp"
#include "pileup/quadrature.hpp"

namespace pileup {

std::string to_string(GrowthClass g) {
  switch (g) {
    case GrowthClass::polynomial: return "polynomial";
    case GrowthClass::exponential: return "exponential";
    case GrowthClass::piecewise: return "piecewise";
    case GrowthClass::pathological: return "pathological";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Base-class defaults

Derivs ConfiningPotential::scaled(double x, double log_factor) const {
  const Derivs d = eval(x);
  const double f = std::exp(log_factor);
  return {d.value * f, d.d1 * f, d.d2 * f};
}

double ConfiningPotential::log_primitive(double x) const { return std::log(std::abs(primitive(x))); }

double ConfiningPotential::inverse_primitive(double y) const {
  if (y == 0.0 || !std::isfinite(y)) throw DomainError("inverse primitive needs finite y != 0");
  const auto [q1, q2] = flat_interval();
  double lo, hi;
  if (y > 0.0) {
    lo = q2;
    hi = std::max(q2, 1.0);
    for (int i = 0; primitive(hi) < y; ++i) {
      if (i > 2000) throw DomainError("inverse primitive: bracket growth failed");
      lo = hi;
      hi *= 2.0;
    }
  } else {
    hi = q1;
    lo = std::min(q1, -1.0);
    for (int i = 0; primitive(lo) > y; ++i) {
      if (i > 2000) throw DomainError("inverse primitive: bracket growth failed");
      hi = lo;
      lo *= 2.0;
    }
  }
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (primitive(mid) < y) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double ConfiningPotential::scaled_d2_sup(double lo, double hi, double log_factor) const {
  if (lo > hi) std::swap(lo, hi);
  std::vector<double> pts{lo, hi};
  if (lo < 0.0 && hi > 0.0) pts.push_back(0.0);
  for (double b : breakpoints()) {
    if (b > lo && b < hi) pts.push_back(b);
  }
  constexpr int kSamples = 400;
  for (int i = 1; i < kSamples; ++i) pts.push_back(lo + (hi - lo) * i / kSamples);
  double best = -std::numeric_limits<double>::infinity();
  for (double x : pts) best = std::max(best, scaled(x, log_factor).d2);
  return best;
}

bool AssumptionReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

const AssumptionCheck* AssumptionReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

namespace {

double sign(double x) { return x < 0.0 ? -1.0 : 1.0; }

// Even quartic b x^2 + c x^4 + a matching (value, d1, d2) of a radial profile
// at x = r.  The constant a is dropped from the potential, so the cap is
// b x^2 + c x^4 and the outer profile is shifted by -a.
struct QuarticCap {
  double r = 0.0, a = 0.0, b = 0.0, c = 0.0;

  QuarticCap() = default;
  QuarticCap(double radius, double v, double d1, double d2) : r(radius) {
    c = (d2 - d1 / r) / (8.0 * r * r);
    b = (d1 / r - 4.0 * c * r * r) / 2.0;
    a = v - b * r * r - c * r * r * r * r;
  }

  Derivs eval(double x) const {
    const double x2 = x * x;
    return {b * x2 + c * x2 * x2, 2.0 * b * x + 4.0 * c * x2 * x, 2.0 * b + 12.0 * c * x2};
  }
  double primitive(double x) const {
    const double x2 = x * x;
    return x * x2 * (b / 3.0 + c * x2 / 5.0);
  }
};

// ---------------------------------------------------------------------------

class PowerPotential final : public ConfiningPotential {
 public:
  PowerPotential(double p, double r) : p_(p), r_(r), regularized_(p < 2.0) {
    if (!(p >= 1.0)) throw ConfigError("power potential needs p >= 1, got " + std::to_string(p));
    if (regularized_) {
      if (!(r > 0.0)) throw ConfigError("power potential with p < 2 needs reg_radius > 0");
      cap_ = QuarticCap(r, std::pow(r, p), p * std::pow(r, p - 1.0),
                        p * (p - 1.0) * std::pow(r, p - 2.0));
      p_at_r_ = cap_.primitive(r);
    }
  }

  Derivs eval(double x) const override {
    const double ax = std::abs(x);
    if (regularized_ && ax <= r_) return cap_.eval(x);
    const double s = sign(x);
    const double shift = regularized_ ? cap_.a : 0.0;
    return {std::pow(ax, p_) - shift, s * p_ * std::pow(ax, p_ - 1.0),
            p_ * (p_ - 1.0) * std::pow(ax, p_ - 2.0)};
  }

  double primitive(double x) const override {
    const double ax = std::abs(x);
    const double s = sign(x);
    if (!regularized_) return s * std::pow(ax, p_ + 1.0) / (p_ + 1.0);
    if (ax <= r_) return cap_.primitive(x);
    return s * (p_at_r_ + (std::pow(ax, p_ + 1.0) - std::pow(r_, p_ + 1.0)) / (p_ + 1.0) -
                cap_.a * (ax - r_));
  }

  double inverse_primitive(double y) const override {
    if (regularized_) return ConfiningPotential::inverse_primitive(y);
    if (y == 0.0) throw DomainError("inverse primitive needs y != 0");
    return sign(y) * std::pow((p_ + 1.0) * std::abs(y), 1.0 / (p_ + 1.0));
  }

  std::pair<double, double> flat_interval() const override { return {0.0, 0.0}; }

  double scaled_d2_sup(double lo, double hi, double log_factor) const override {
    if (lo > hi) std::swap(lo, hi);
    // Q'' is nondecreasing in |x| for p >= 2 and nonincreasing for the
    // regularized p < 2 shapes.
    double x;
    if (!regularized_) {
      x = std::max(std::abs(lo), std::abs(hi));
    } else if (lo <= 0.0 && hi >= 0.0) {
      x = 0.0;
    } else {
      x = std::min(std::abs(lo), std::abs(hi));
    }
    return scaled(x, log_factor).d2;
  }

  std::vector<double> breakpoints() const override {
    if (!regularized_) return {};
    return {-r_, r_};
  }

  std::string name() const override {
    std::ostringstream os;
    os << "power(p=" << p_ << ")";
    return os.str();
  }
  GrowthClass growth() const override { return GrowthClass::polynomial; }
  nlohmann::json descriptor() const override {
    return {{"kind", "power"}, {"p", p_}, {"reg_radius", r_}};
  }

 private:
  double p_, r_;
  bool regularized_;
  QuarticCap cap_;
  double p_at_r_ = 0.0;
};

// ---------------------------------------------------------------------------

class ExpPowerPotential final : public ConfiningPotential {
 public:
  ExpPowerPotential(double p, double r) : p_(p), r_(r), regularized_(p < 2.0) {
    if (!(p >= 1.0)) throw ConfigError("exp_power potential needs p >= 1, got " + std::to_string(p));
    if (regularized_) {
      if (!(r > 0.0)) throw ConfigError("exp_power potential with p < 2 needs reg_radius > 0");
      const double t = std::pow(r, p);
      const double e = std::exp(t);
      cap_ = QuarticCap(r, std::expm1(t), p * std::pow(r, p - 1.0) * e,
                        (p * (p - 1.0) * std::pow(r, p - 2.0) + p * p * std::pow(r, 2.0 * p - 2.0)) * e);
      p_at_r_ = cap_.primitive(r);
    }
  }

  Derivs eval(double x) const override { return scaled(x, 0.0); }

  Derivs scaled(double x, double lf) const override {
    const double ax = std::abs(x);
    if (regularized_ && ax <= r_) {
      const Derivs d = cap_.eval(x);
      const double f = std::exp(lf);
      return {d.value * f, d.d1 * f, d.d2 * f};
    }
    const double s = sign(x);
    const double shift = regularized_ ? cap_.a : 0.0;
    const double t = std::pow(ax, p_);
    Derivs out;
    if (t < 50.0) {
      out.value = std::exp(lf) * (std::expm1(t) - shift);
    } else {
      out.value = std::exp(t + lf) - (1.0 + shift) * std::exp(lf);
    }
    if (ax > 0.0) {
      out.d1 = s * std::exp(t + lf + std::log(p_) + (p_ - 1.0) * std::log(ax));
      const double c2 = p_ * (p_ - 1.0) * std::pow(ax, p_ - 2.0) + p_ * p_ * std::pow(ax, 2.0 * p_ - 2.0);
      out.d2 = c2 > 0.0 ? std::exp(t + lf + std::log(c2)) : 0.0;
    } else {
      out.d1 = 0.0;
      out.d2 = p_ == 2.0 ? 2.0 * std::exp(lf) : 0.0;
    }
    return out;
  }

  double primitive(double x) const override {
    const double ax = std::abs(x);
    const double s = sign(x);
    if (regularized_ && ax <= r_) return cap_.primitive(x);
    const double r0 = regularized_ ? r_ : 0.0;
    const double shift = regularized_ ? cap_.a : 0.0;
    if (std::pow(ax, p_) > 700.0) return s * std::numeric_limits<double>::infinity();
    const double p = p_;
    const double growth = quad::adaptive([p](double y) { return std::exp(std::pow(y, p)); }, r0, ax);
    return s * (p_at_r_ + growth - (1.0 + shift) * (ax - r0));
  }

  double log_primitive(double x) const override {
    const double ax = std::abs(x);
    const double t = std::pow(ax, p_);
    if (t < 600.0) return std::log(std::abs(primitive(x)));
    const double r0 = regularized_ ? r_ : 0.0;
    const double p = p_;
    // int_{r0}^{ax} e^{y^p} dy = e^{ax^p} int e^{y^p - ax^p} dy; the
    // remaining linear terms are below e^{-600} relative.
    const double width = 60.0 / (p * std::pow(ax, p - 1.0));
    const double split = std::max(r0, ax - width);
    const auto f = [p, t](double y) { return std::exp(std::pow(y, p) - t); };
    const double j = quad::adaptive(f, split, ax) + (split > r0 ? quad::adaptive(f, r0, split) : 0.0);
    return t + std::log(j);
  }

  std::pair<double, double> flat_interval() const override { return {0.0, 0.0}; }

  std::vector<double> breakpoints() const override {
    if (!regularized_) return {};
    return {-r_, r_};
  }

  std::string name() const override {
    std::ostringstream os;
    os << "exp_power(p=" << p_ << ")";
    return os.str();
  }
  GrowthClass growth() const override { return GrowthClass::exponential; }
  nlohmann::json descriptor() const override {
    return {{"kind", "exp_power"}, {"p", p_}, {"reg_radius", r_}};
  }

 private:
  double p_, r_;
  bool regularized_;
  QuarticCap cap_;
  double p_at_r_ = 0.0;
};

// ---------------------------------------------------------------------------
// Q(x) = 2 [|x| - 1]_+ with the kink at |x| = 1 smoothed on [1 - r, 1 + r]:
// Q'' = 2 w_r with the biweight density w_r(t) = (15 / 16 r)(1 - (t/r)^2)^2.
// Beyond 1 + r, P(x) = (|x| - 1)^2 + r^2/7 (the biweight variance).

class GapPotential final : public ConfiningPotential {
 public:
  explicit GapPotential(double r) : r_(r) {
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("gap potential needs 0 < reg_radius < 1");
  }

  Derivs eval(double x) const override {
    const double ax = std::abs(x);
    const double s = sign(x);
    const double t = ax - 1.0;
    if (t <= -r_) return {0.0, 0.0, 0.0};
    if (t >= r_) return {2.0 * t, 2.0 * s, 0.0};
    const double u = t / r_;
    return {2.0 * r_ * w2(u), 2.0 * s * w1(u), 2.0 * w0(u) / r_};
  }

  double primitive(double x) const override {
    const double ax = std::abs(x);
    const double s = sign(x);
    const double t = ax - 1.0;
    if (t <= -r_) return 0.0;
    if (t >= r_) return s * (t * t + r_ * r_ / 7.0);
    return s * 2.0 * r_ * r_ * w3(t / r_);
  }

  double inverse_primitive(double y) const override {
    if (y == 0.0) throw DomainError("inverse primitive needs y != 0");
    const double ay = std::abs(y);
    if (ay >= 8.0 * r_ * r_ / 7.0) return sign(y) * (1.0 + std::sqrt(ay - r_ * r_ / 7.0));
    return ConfiningPotential::inverse_primitive(y);
  }

  std::pair<double, double> flat_interval() const override { return {-(1.0 - r_), 1.0 - r_}; }

  double scaled_d2_sup(double lo, double hi, double log_factor) const override {
    if (lo > hi) std::swap(lo, hi);
    double best = 0.0;
    for (double c : {-1.0, 1.0}) best = std::max(best, scaled(std::clamp(c, lo, hi), log_factor).d2);
    return best;
  }

  std::vector<double> breakpoints() const override {
    return {-1.0 - r_, -1.0, -1.0 + r_, 1.0 - r_, 1.0, 1.0 + r_};
  }

  std::string name() const override { return "gap"; }
  GrowthClass growth() const override { return GrowthClass::piecewise; }
  nlohmann::json descriptor() const override { return {{"kind", "gap"}, {"reg_radius", r_}}; }

 private:
  // biweight density on [-1, 1] and its iterated integrals from -1
  static double w0(double u) {
    const double v = 1.0 - u * u;
    return 15.0 / 16.0 * v * v;
  }
  static double w1(double u) {
    return 15.0 / 16.0 * (u - 2.0 * u * u * u / 3.0 + std::pow(u, 5) / 5.0) + 0.5;
  }
  static double w2(double u) {
    const double u2 = u * u;
    return 15.0 / 16.0 * (u2 / 2.0 - u2 * u2 / 6.0 + u2 * u2 * u2 / 30.0) - 11.0 / 32.0 + (u + 1.0) / 2.0;
  }
  static double w3(double u) {
    const double u3 = u * u * u;
    return 15.0 / 16.0 * (u3 / 6.0 - u3 * u * u / 30.0 + u3 * u3 * u / 210.0) + 29.0 / 224.0 -
           11.0 * (u + 1.0) / 32.0 + (u + 1.0) * (u + 1.0) / 4.0;
  }

  double r_;
};

// ---------------------------------------------------------------------------
// Q(0) = Q'(0) = 0, Q'' = sum_{k=1}^{k_max} phi_{e^{-k}}(x + k) + phi_{e^{-k}}(x - k)
// with phi the standard mollifier.  For x >= 0 only the bumps at +k matter;
// past a bump Q gains slope 1, so Q ~ sum_k (x - k)_+.

class PathologicalPotential final : public ConfiningPotential {
 public:
  explicit PathologicalPotential(int k_max) : k_max_(k_max) {
    if (k_max < 1) throw ConfigError("pathological potential needs k_max >= 1");
    const double raw = quad::adaptive([](double u) { return bump_shape(u); }, -1.0, 1.0, 1e-14);
    norm_ = 1.0 / raw;
    m2_ = quad::adaptive([this](double u) { return u * u * phi(u); }, -1.0, 1.0, 1e-14);
  }

  Derivs eval(double x) const override {
    const double ax = std::abs(x);
    const double s = sign(x);
    Derivs d;
    for (int k = 1; k <= k_max_; ++k) {
      const double delta = width(k);
      const double u = (ax - k) / delta;
      if (u <= -1.0) break;
      if (u >= 1.0) {
        d.value += ax - k;
        d.d1 += 1.0;
      } else {
        d.value += delta * psi(u);
        d.d1 += cdf(u);
        d.d2 += phi(u) / delta;
      }
    }
    d.d1 *= s;
    return d;
  }

  double primitive(double x) const override {
    const double ax = std::abs(x);
    double sum = 0.0;
    for (int k = 1; k <= k_max_; ++k) {
      const double delta = width(k);
      const double u = (ax - k) / delta;
      if (u <= -1.0) break;
      if (u >= 1.0) {
        sum += 0.5 * (ax - k) * (ax - k) + 0.5 * delta * delta * m2_;
      } else {
        sum += delta * delta * lambda(u);
      }
    }
    return sign(x) * sum;
  }

  std::pair<double, double> flat_interval() const override {
    const double q = 1.0 - width(1);
    return {-q, q};
  }

  double scaled_d2_sup(double lo, double hi, double log_factor) const override {
    if (lo > hi) std::swap(lo, hi);
    double best = 0.0;
    for (int k = 1; k <= k_max_; ++k) {
      for (double c : {-static_cast<double>(k), static_cast<double>(k)}) {
        if (c + width(k) <= lo || c - width(k) >= hi) continue;
        best = std::max(best, scaled(std::clamp(c, lo, hi), log_factor).d2);
      }
    }
    return best;
  }

  std::vector<double> breakpoints() const override {
    std::vector<double> out;
    for (int k = 1; k <= k_max_; ++k) {
      for (double c : {-static_cast<double>(k), static_cast<double>(k)}) {
        out.push_back(c - width(k));
        out.push_back(c);
        out.push_back(c + width(k));
      }
    }
    return out;
  }

  std::string name() const override { return "pathological(k_max=" + std::to_string(k_max_) + ")"; }
  GrowthClass growth() const override { return GrowthClass::pathological; }
  nlohmann::json descriptor() const override { return {{"kind", "pathological"}, {"k_max", k_max_}}; }

 private:
  static double width(int k) { return std::exp(-static_cast<double>(k)); }
  static double bump_shape(double u) {
    if (std::abs(u) >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - u * u));
  }
  double phi(double u) const { return norm_ * bump_shape(u); }

  // Phi(u) = int_{-1}^u phi
  double cdf(double u) const {
    if (u <= -1.0) return 0.0;
    if (u >= 1.0) return 1.0;
    if (u > 0.0) return 1.0 - cdf(-u);
    return quad::adaptive([this](double s) { return phi(s); }, -1.0, u, 1e-14);
  }
  // Psi(u) = int_{-1}^u (u - s) phi(s) ds, Psi(u) = u for u >= 1
  double psi(double u) const {
    if (u <= 0.0) return quad::adaptive([this, u](double s) { return (u - s) * phi(s); }, -1.0, u, 1e-14);
    return u + quad::adaptive([this, u](double s) { return (s - u) * phi(s); }, u, 1.0, 1e-14);
  }
  // Lambda(u) = int_{-1}^u (u - s)^2 / 2 phi(s) ds, (u^2 + m2) / 2 for u >= 1
  double lambda(double u) const {
    const auto f = [this, u](double s) { return 0.5 * (u - s) * (u - s) * phi(s); };
    if (u <= 0.0) return quad::adaptive(f, -1.0, u, 1e-14);
    return 0.5 * (u * u + m2_) - quad::adaptive(f, u, 1.0, 1e-14);
  }

  int k_max_;
  double norm_ = 1.0;
  double m2_ = 0.0;
};

// ---------------------------------------------------------------------------
// Q'' is the piecewise-linear interpolant of max(d2q, 0); Q' and Q follow by
// exact integration from the sample with the smallest Q, so Q is a C^2
// piecewise cubic that is convex by construction.  Outside the table Q'' is
// held at its end value.

class TabulatedPotential final : public ConfiningPotential {
 public:
  TabulatedPotential(std::vector<double> x, std::vector<double> q, std::vector<double> dq,
                     std::vector<double> d2q, double convexity_tol, double fit_tol)
      : x_(std::move(x)), conv_tol_(convexity_tol), fit_tol_(fit_tol) {
    const std::size_t n = x_.size();
    if (n < 3) throw ConfigError("tabulated potential needs at least 3 samples");
    if (q.size() != n || dq.size() != n || d2q.size() != n) {
      throw ConfigError("tabulated potential: x, q, dq, d2q must have equal length");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(x_[i]) || !std::isfinite(q[i]) || !std::isfinite(dq[i]) || !std::isfinite(d2q[i])) {
        throw ConfigError("tabulated potential: non-finite sample " + std::to_string(i));
      }
      if (i > 0 && !(x_[i] > x_[i - 1])) {
        throw ConfigError("tabulated potential: x not strictly increasing at sample " + std::to_string(i));
      }
    }
    double d2_scale = 1.0;
    for (double v : d2q) d2_scale = std::max(d2_scale, std::abs(v));
    d2_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (d2q[i] < -conv_tol_ * d2_scale) {
        std::ostringstream os;
        os << "tabulated potential violates convexity at sample " << i << " (x=" << x_[i]
           << ", Q''=" << d2q[i] << ")";
        throw ConfigError(os.str());
      }
      d2_[i] = std::max(d2q[i], 0.0);
    }

    const std::size_t anchor = static_cast<std::size_t>(std::min_element(q.begin(), q.end()) - q.begin());
    q_.assign(n, 0.0);
    dq_.assign(n, 0.0);
    q_[anchor] = q[anchor];
    dq_[anchor] = dq[anchor];
    for (std::size_t i = anchor; i + 1 < n; ++i) {
      const double h = x_[i + 1] - x_[i];
      dq_[i + 1] = dq_[i] + h * (d2_[i] + d2_[i + 1]) / 2.0;
      q_[i + 1] = q_[i] + h * dq_[i] + h * h * (2.0 * d2_[i] + d2_[i + 1]) / 6.0;
    }
    for (std::size_t i = anchor; i > 0; --i) {
      const double h = x_[i] - x_[i - 1];
      dq_[i - 1] = dq_[i] - h * (d2_[i - 1] + d2_[i]) / 2.0;
      q_[i - 1] = q_[i] - h * dq_[i] + h * h * (d2_[i - 1] + 2.0 * d2_[i]) / 6.0;
    }
    double q_scale = 1.0, dq_scale = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      q_scale = std::max(q_scale, std::abs(q[i]));
      dq_scale = std::max(dq_scale, std::abs(dq[i]));
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(q_[i] - q[i]) > fit_tol_ * q_scale || std::abs(dq_[i] - dq[i]) > fit_tol_ * dq_scale) {
        std::ostringstream os;
        os << "tabulated potential: Q, Q' samples inconsistent with integrated Q'' at sample " << i
           << " (x=" << x_[i] << ", Q=" << q[i] << " vs " << q_[i] << ", Q'=" << dq[i] << " vs " << dq_[i]
           << ")";
        throw ConfigError(os.str());
      }
    }
    raw_q_ = std::move(q);
    raw_dq_ = std::move(dq);
    raw_d2q_ = std::move(d2q);

    cumulative_.assign(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      cumulative_[i + 1] = cumulative_[i] + piece_integral(i, x_[i + 1] - x_[i]);
    }
    anti_at_zero_ = antiderivative(0.0);
    locate_flat_interval();
  }

  Derivs eval(double x) const override {
    const std::size_t n = x_.size();
    if (x <= x_[0]) {
      const double t = x - x_[0];
      return {q_[0] + dq_[0] * t + d2_[0] * t * t / 2.0, dq_[0] + d2_[0] * t, d2_[0]};
    }
    if (x >= x_[n - 1]) {
      const double t = x - x_[n - 1];
      return {q_[n - 1] + dq_[n - 1] * t + d2_[n - 1] * t * t / 2.0, dq_[n - 1] + d2_[n - 1] * t, d2_[n - 1]};
    }
    const std::size_t i = interval(x);
    const double h = x_[i + 1] - x_[i];
    const double t = x - x_[i];
    const double jump = (d2_[i + 1] - d2_[i]) / h;
    return {q_[i] + dq_[i] * t + d2_[i] * t * t / 2.0 + jump * t * t * t / 6.0,
            dq_[i] + d2_[i] * t + jump * t * t / 2.0, d2_[i] + jump * t};
  }

  double primitive(double x) const override { return antiderivative(x) - anti_at_zero_; }

  std::pair<double, double> flat_interval() const override { return {q1_, q2_}; }

  std::vector<double> breakpoints() const override { return x_; }

  std::string name() const override { return "tabulated(" + std::to_string(x_.size()) + " samples)"; }
  GrowthClass growth() const override { return GrowthClass::piecewise; }
  nlohmann::json descriptor() const override {
    return {{"kind", "tabulated"},       {"x", x_},
            {"q", raw_q_},               {"dq", raw_dq_},
            {"d2q", raw_d2q_},           {"convexity_tolerance", conv_tol_},
            {"fit_tolerance", fit_tol_}};
  }

 private:
  std::size_t interval(double x) const {
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    return static_cast<std::size_t>(it - x_.begin()) - 1;
  }

  // int_{x_i}^{x_i + t} Q
  double piece_integral(std::size_t i, double t) const {
    const double h = x_[i + 1] - x_[i];
    const double jump = (d2_[i + 1] - d2_[i]) / h;
    return q_[i] * t + dq_[i] * t * t / 2.0 + d2_[i] * t * t * t / 6.0 + jump * t * t * t * t / 24.0;
  }

  // int_{x_0}^{x} Q
  double antiderivative(double x) const {
    const std::size_t n = x_.size();
    const auto quad_piece = [](double q, double dq, double d2, double t) {
      return q * t + dq * t * t / 2.0 + d2 * t * t * t / 6.0;
    };
    if (x <= x_[0]) return quad_piece(q_[0], dq_[0], d2_[0], x - x_[0]);
    if (x >= x_[n - 1]) return cumulative_[n - 1] + quad_piece(q_[n - 1], dq_[n - 1], d2_[n - 1], x - x_[n - 1]);
    const std::size_t i = interval(x);
    return cumulative_[i] + piece_integral(i, x - x_[i]);
  }

  void locate_flat_interval() {
    const double span = x_.back() - x_.front();
    double lo = x_.front() - 10.0 * span;
    double hi = x_.back() + 10.0 * span;
    // q1: leftmost x with Q'(x) >= 0;  q2: rightmost x with Q'(x) <= 0
    double a = lo, b = hi;
    for (int it = 0; it < 200; ++it) {
      const double m = 0.5 * (a + b);
      if (d1(m) >= 0.0) b = m; else a = m;
    }
    q1_ = b;
    a = lo;
    b = hi;
    for (int it = 0; it < 200; ++it) {
      const double m = 0.5 * (a + b);
      if (d1(m) <= 0.0) a = m; else b = m;
    }
    q2_ = std::max(a, q1_);
  }

  std::vector<double> x_, q_, dq_, d2_;
  std::vector<double> raw_q_, raw_dq_, raw_d2q_;
  std::vector<double> cumulative_;
  double conv_tol_, fit_tol_;
  double anti_at_zero_ = 0.0;
  double q1_ = 0.0, q2_ = 0.0;
};

// ---------------------------------------------------------------------------
// Q~(x) = Q(s x) + offset, s = -1 when reflected.

class TransformedPotential final : public ConfiningPotential {
 public:
  TransformedPotential(PotentialPtr base, double offset, bool reflect)
      : base_(std::move(base)), offset_(offset), s_(reflect ? -1.0 : 1.0) {}

  Derivs eval(double x) const override {
    const Derivs d = base_->eval(s_ * x);
    return {d.value + offset_, s_ * d.d1, d.d2};
  }
  Derivs scaled(double x, double lf) const override {
    const Derivs d = base_->scaled(s_ * x, lf);
    return {d.value + offset_ * std::exp(lf), s_ * d.d1, d.d2};
  }
  double primitive(double x) const override { return s_ * base_->primitive(s_ * x) + offset_ * x; }
  std::pair<double, double> flat_interval() const override {
    const auto [a, b] = base_->flat_interval();
    return s_ > 0 ? std::pair{a, b} : std::pair{-b, -a};
  }
  double scaled_d2_sup(double lo, double hi, double lf) const override {
    return base_->scaled_d2_sup(s_ * lo, s_ * hi, lf);
  }
  std::vector<double> breakpoints() const override {
    auto b = base_->breakpoints();
    for (double& v : b) v *= s_;
    return b;
  }
  std::string name() const override {
    std::ostringstream os;
    os << base_->name();
    if (s_ < 0) os << "[reflected]";
    if (offset_ != 0.0) os << "[offset=" << offset_ << "]";
    return os.str();
  }
  GrowthClass growth() const override { return base_->growth(); }
  nlohmann::json descriptor() const override {
    auto d = base_->descriptor();
    d["offset"] = offset_;
    d["reflect"] = s_ < 0;
    return d;
  }

 private:
  PotentialPtr base_;
  double offset_;
  double s_;
};

}  // namespace

// ---------------------------------------------------------------------------

PotentialPtr make_power(double p, double reg_radius) {
  return std::make_shared<PowerPotential>(p, reg_radius);
}
PotentialPtr make_exp_power(double p, double reg_radius) {
  return std::make_shared<ExpPowerPotential>(p, reg_radius);
}
PotentialPtr make_gap(double reg_radius) { return std::make_shared<GapPotential>(reg_radius); }
PotentialPtr make_pathological(int k_max) { return std::make_shared<PathologicalPotential>(k_max); }
PotentialPtr make_tabulated(std::vector<double> x, std::vector<double> q, std::vector<double> dq,
                            std::vector<double> d2q, double convexity_tolerance, double fit_tolerance) {
  return std::make_shared<TabulatedPotential>(std::move(x), std::move(q), std::move(dq), std::move(d2q),
                                              convexity_tolerance, fit_tolerance);
}
PotentialPtr make_transformed(PotentialPtr base, double offset, bool reflect) {
  if (offset == 0.0 && !reflect) return base;
  return std::make_shared<TransformedPotential>(std::move(base), offset, reflect);
}

PotentialPtr make_potential(const nlohmann::json& d) {
  if (!d.is_object() || !d.contains("kind") || !d["kind"].is_string()) {
    throw ConfigError("potential descriptor must be an object with a string field \"kind\"");
  }
  const std::string kind = d["kind"];
  const auto num = [&d](const char* key, double fallback) {
    if (!d.contains(key)) return fallback;
    if (!d[key].is_number()) throw ConfigError(std::string("potential field \"") + key + "\" must be a number");
    return d[key].get<double>();
  };
  const auto vec = [&d](const char* key) {
    if (!d.contains(key) || !d[key].is_array()) {
      throw ConfigError(std::string("tabulated potential needs array field \"") + key + "\"");
    }
    return d[key].get<std::vector<double>>();
  };
  PotentialPtr base;
  if (kind == "power") {
    if (!d.contains("p")) throw ConfigError("power potential needs field \"p\"");
    base = make_power(num("p", 2.0), num("reg_radius", 1e-2));
  } else if (kind == "exp_power") {
    if (!d.contains("p")) throw ConfigError("exp_power potential needs field \"p\"");
    base = make_exp_power(num("p", 2.0), num("reg_radius", 1e-2));
  } else if (kind == "gap") {
    base = make_gap(num("reg_radius", 1e-2));
  } else if (kind == "pathological") {
    base = make_pathological(static_cast<int>(num("k_max", 30)));
  } else if (kind == "tabulated") {
    base = make_tabulated(vec("x"), vec("q"), vec("dq"), vec("d2q"), num("convexity_tolerance", 1e-8),
                          num("fit_tolerance", 1e-3));
  } else {
    throw ConfigError("unknown potential kind \"" + kind + "\"");
  }
  const bool reflect = d.contains("reflect") && d["reflect"].is_boolean() && d["reflect"].get<bool>();
  return make_transformed(base, num("offset", 0.0), reflect);
}

std::vector<nlohmann::json> catalog_descriptors() {
  return {
      {{"kind", "power"}, {"p", 1.0}, {"reg_radius", 1e-2}},
      {{"kind", "power"}, {"p", 1.5}, {"reg_radius", 1e-2}},
      {{"kind", "power"}, {"p", 2.0}, {"reg_radius", 1e-2}},
      {{"kind", "power"}, {"p", 4.0}, {"reg_radius", 1e-2}},
      {{"kind", "exp_power"}, {"p", 1.0}, {"reg_radius", 1e-2}},
      {{"kind", "exp_power"}, {"p", 2.0}, {"reg_radius", 1e-2}},
      {{"kind", "gap"}, {"reg_radius", 1e-2}},
      {{"kind", "pathological"}, {"k_max", 30}},
  };
}

// ---------------------------------------------------------------------------

AssumptionReport check_assumptions(const ConfiningPotential& q, int n, double beta) {
  AssumptionReport report;
  const auto [q1, q2] = q.flat_interval();

  // sampling window: well past the flat piece and the O(1) core
  const double window = std::max({5.0, 2.0 * std::abs(q1), 2.0 * std::abs(q2)});
  std::vector<double> xs;
  constexpr int kSamples = 2001;
  for (int i = 0; i < kSamples; ++i) xs.push_back(-window + 2.0 * window * i / (kSamples - 1));
  for (double b : q.breakpoints()) {
    if (std::abs(b) <= window) xs.push_back(b);
  }

  {
    double worst = 0.0, worst_x = 0.0, scale = 1.0;
    for (double x : xs) scale = std::max(scale, std::abs(q.d2(x)));
    for (double x : xs) {
      const double v = q.d2(x);
      if (v < worst) {
        worst = v;
        worst_x = x;
      }
    }
    const bool ok = worst >= -1e-10 * scale;
    std::ostringstream os;
    os << "min sampled Q'' = " << worst << (ok ? "" : " at x = " + std::to_string(worst_x));
    report.checks.push_back({"convexity", ok, os.str()});
  }
  {
    const double q0 = q.value(0.0);
    double min_v = q0, min_x = 0.0;
    for (double x : xs) {
      const double v = q.value(x);
      if (v < min_v) {
        min_v = v;
        min_x = x;
      }
    }
    const bool ok = std::abs(q0) <= 1e-12 && min_v >= -1e-12;
    std::ostringstream os;
    os << "Q(0) = " << q0 << ", min sampled Q = " << min_v << " at x = " << min_x;
    if (!ok) os << "; shift/translate Q so that min Q = Q(0) = 0";
    report.checks.push_back({"normalization", ok, os.str()});
  }
  {
    constexpr double kFar = 100.0;
    const double q0 = q.value(0.0);
    const double left = q.value(-kFar), right = q.value(kFar);
    const bool ok = left > q0 && right > q0;
    std::ostringstream os;
    os << "Q(-" << kFar << ") = " << left << ", Q(" << kFar << ") = " << right;
    report.checks.push_back({"growth", ok, os.str()});
  }
  {
    bool ok = false;
    std::ostringstream os;
    if (!(n >= 1) || !(beta > 0.0)) {
      os << "orientation needs n >= 1 and beta > 0";
    } else {
      const double y = static_cast<double>(n) / beta;
      try {
        const double right = q.inverse_primitive(y);
        const double left = -q.inverse_primitive(-y);
        ok = right >= left - 1e-12 * std::max(1.0, std::abs(right));
        os << "P^-1(n/beta) = " << right << ", -P^-1(-n/beta) = " << left;
        if (!ok) os << "; reflect Q (x -> -x) so that the wider side is on the right";
      } catch (const std::exception& e) {
        os << "could not evaluate P^-1: " << e.what();
      }
    }
    report.checks.push_back({"orientation", ok, os.str()});
  }
  return report;
}

nlohmann::json to_json(const AssumptionReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  return {{"all_pass", r.all_pass()}, {"checks", checks}};
}

}  // namespace pileup
