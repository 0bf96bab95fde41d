#pragma once

// Confining potentials Q: value and derivatives, primitive P(x) = int_0^x Q,
// inverse primitive on y != 0, and the flat-minimum interval [q1, q2].

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace pileup {

enum class GrowthClass { polynomial, exponential, piecewise, pathological };

std::string to_string(GrowthClass g);

/// Value and first two derivatives at one point.
struct Derivs {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

class ConfiningPotential {
 public:
  virtual ~ConfiningPotential() = default;

  virtual Derivs eval(double x) const = 0;
  double value(double x) const { return eval(x).value; }
  double d1(double x) const { return eval(x).d1; }
  double d2(double x) const { return eval(x).d2; }

  /// (Q, Q', Q'')(x) multiplied by exp(log_factor), computed without
  /// intermediate overflow where the potential grows super-exponentially.
  virtual Derivs scaled(double x, double log_factor) const;

  /// P(x) = int_0^x Q.
  virtual double primitive(double x) const = 0;

  /// log|P(x)| for x outside [q1, q2].
  virtual double log_primitive(double x) const;

  /// Inverse of P restricted to R \ [q1, q2]; y != 0.  The default brackets
  /// from max(q2, 1) (resp. min(q1, -1)) geometrically and bisects 80 times.
  virtual double inverse_primitive(double y) const;

  /// [q1, q2] = argmin Q.
  virtual std::pair<double, double> flat_interval() const = 0;

  /// sup of exp(log_factor) Q'' over [lo, hi].  The default samples densely
  /// and adds endpoints, 0 and breakpoints().
  virtual double scaled_d2_sup(double lo, double hi, double log_factor) const;
  double d2_sup(double lo, double hi) const { return scaled_d2_sup(lo, hi, 0.0); }

  /// Points where Q has a localized feature (kinks of the unregularized
  /// shape, bump centres); quadrature splits there.
  virtual std::vector<double> breakpoints() const { return {}; }

  virtual std::string name() const = 0;
  virtual GrowthClass growth() const = 0;
  virtual nlohmann::json descriptor() const = 0;
};

using PotentialPtr = std::shared_ptr<const ConfiningPotential>;

/// Builds a catalog potential from a JSON descriptor:
///   {"kind":"power","p":2.0,"reg_radius":0.01}
///   {"kind":"exp_power","p":2.0,"reg_radius":0.01}
///   {"kind":"gap","reg_radius":0.01}
///   {"kind":"pathological","k_max":30}
///   {"kind":"tabulated","x":[...],"q":[...],"dq":[...],"d2q":[...],
///    "convexity_tolerance":1e-8,"fit_tolerance":1e-3}
/// Every kind also accepts "offset" (additive constant) and "reflect"
/// (x -> -x).  Throws ConfigError on invalid input.
PotentialPtr make_potential(const nlohmann::json& descriptor);

PotentialPtr make_power(double p, double reg_radius = 1e-2);
PotentialPtr make_exp_power(double p, double reg_radius = 1e-2);
PotentialPtr make_gap(double reg_radius = 1e-2);
PotentialPtr make_pathological(int k_max = 30);
PotentialPtr make_tabulated(std::vector<double> x, std::vector<double> q, std::vector<double> dq,
                            std::vector<double> d2q, double convexity_tolerance = 1e-8,
                            double fit_tolerance = 1e-3);
PotentialPtr make_transformed(PotentialPtr base, double offset, bool reflect);

/// Descriptors of the built-in catalog used by sweeps and tests.
std::vector<nlohmann::json> catalog_descriptors();

struct AssumptionCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;
  bool all_pass() const;
  const AssumptionCheck* find(const std::string& name) const;
};

/// Sampled convexity, normalization min Q = Q(0) = 0, growth proxy and the
/// orientation condition P^{-1}(n/beta) >= -P^{-1}(-n/beta).  A failing
/// orientation asks the caller to reflect Q; nothing is reoriented here.
AssumptionReport check_assumptions(const ConfiningPotential& q, int n, double beta);

nlohmann::json to_json(const AssumptionReport& r);

}  // namespace pileup
