#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "pileup/error.hpp"
#include "pileup/potential.hpp"

using namespace pileup;

namespace {

std::vector<double> samples(double lo, double hi, int count) {
  std::vector<double> x;
  for (int i = 0; i < count; ++i) x.push_back(lo + (hi - lo) * (i + 0.5) / count);
  return x;
}

}  // namespace

TEST_CASE("power potential closed forms") {
  const PotentialPtr q = make_power(2.0);
  CHECK(q->primitive(3.0) == doctest::Approx(9.0).epsilon(1e-14));
  CHECK(q->inverse_primitive(9.0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(q->primitive(-3.0) == doctest::Approx(-9.0).epsilon(1e-14));
  CHECK(q->value(0.5) == doctest::Approx(0.25));
  CHECK(q->name().size() > 0);
  CHECK(q->growth() == GrowthClass::polynomial);

  const PotentialPtr p1 = make_power(1.0);
  CHECK(p1->value(0.0) == 0.0);
  CHECK(p1->d1(0.0) == 0.0);
  CHECK(p1->d2(0.0) >= 0.0);
  CHECK(p1->value(0.5) - p1->value(0.3) == doctest::Approx(0.2).epsilon(1e-12));

  CHECK_THROWS_AS(make_power(0.5), ConfigError);
}

TEST_CASE("gap potential closed forms") {
  const PotentialPtr q = make_gap();
  // smoothing the kinks adds r^2/7 to |P| beyond 1 + r
  const double r = 1e-2;
  CHECK(q->primitive(2.0) == doctest::Approx(1.0 + r * r / 7.0).epsilon(1e-12));
  CHECK(q->primitive(-3.0) == doctest::Approx(-4.0 - r * r / 7.0).epsilon(1e-12));
  CHECK(std::abs(q->inverse_primitive(-4.0) + 3.0) < 1e-5);
  CHECK(q->primitive(q->inverse_primitive(-4.0)) == doctest::Approx(-4.0).epsilon(1e-12));
  const auto [q1, q2] = q->flat_interval();
  CHECK(q1 < 0.0);
  CHECK(q2 > 0.0);
  CHECK(q->primitive(0.5) == 0.0);
  CHECK(q->growth() == GrowthClass::piecewise);
}

TEST_CASE("catalog invariants") {
  for (const auto& d : catalog_descriptors()) {
    const PotentialPtr q = make_potential(d);
    CAPTURE(d.dump());
    const auto [q1, q2] = q->flat_interval();
    for (double x : samples(-3.0, 3.0, 1000)) {
      const Derivs v = q->eval(x);
      CHECK(v.value >= 0.0);
      CHECK(v.d2 >= -1e-12);
      const double h = 1e-5 * std::max(1.0, std::abs(x));
      const double dp = (q->primitive(x + h) - q->primitive(x - h)) / (2.0 * h);
      CHECK(std::abs(dp - v.value) <= 1e-8 * std::max(1.0, std::abs(v.value)) + 1e-8);
    }
    CHECK(std::abs(q->value(0.0)) <= 1e-14);
    for (double x : samples(-3.0, 3.0, 60)) {
      if (x > q1 - 0.1 && x < q2 + 0.1) continue;
      const double y = q->primitive(x);
      CHECK(q->inverse_primitive(y) == doctest::Approx(x).epsilon(1e-8));
    }
    const AssumptionReport r = check_assumptions(*q, 9, 1.0);
    CHECK(r.all_pass());
    CHECK(make_potential(q->descriptor())->value(1.3) == doctest::Approx(q->value(1.3)).epsilon(1e-14));
  }
}

TEST_CASE("check_assumptions") {
  const AssumptionReport ok = check_assumptions(*make_power(2.0), 9, 1.0);
  CHECK(ok.all_pass());
  CHECK(ok.checks.size() == 4);

  const PotentialPtr shifted = make_transformed(make_power(2.0), 1.0, false);
  CHECK(shifted->value(0.0) == doctest::Approx(1.0));
  const AssumptionReport bad = check_assumptions(*shifted, 9, 1.0);
  CHECK_FALSE(bad.all_pass());
  REQUIRE(bad.find("normalization") != nullptr);
  CHECK_FALSE(bad.find("normalization")->pass);

  for (int n : {2, 9, 100}) {
    for (double beta : {0.5, 1.0, 4.0}) CHECK(check_assumptions(*make_gap(), n, beta).find("orientation")->pass);
  }
}

TEST_CASE("descriptor parsing") {
  CHECK_THROWS_AS(make_potential(nlohmann::json{{"kind", "nope"}}), ConfigError);
  CHECK_THROWS_AS(make_potential(nlohmann::json{{"kind", "power"}}), ConfigError);
  CHECK_THROWS_AS(make_potential(nlohmann::json::array()), ConfigError);
  const PotentialPtr q = make_potential({{"kind", "power"}, {"p", 4.0}});
  CHECK(q->value(2.0) == doctest::Approx(16.0));
  const PotentialPtr r = make_potential({{"kind", "power"}, {"p", 4.0}, {"offset", 0.5}});
  CHECK(r->value(0.0) == doctest::Approx(0.5));
  CHECK(r->value(1.0) == doctest::Approx(1.5));
  const PotentialPtr s = make_potential({{"kind", "gap"}, {"reflect", true}});
  CHECK(s->value(-2.0) == doctest::Approx(make_gap()->value(2.0)));
}

TEST_CASE("tabulated potential") {
  std::vector<double> x, q, dq, d2q;
  for (int i = -40; i <= 40; ++i) {
    const double t = i * 0.1;
    x.push_back(t);
    q.push_back(t * t);
    dq.push_back(2.0 * t);
    d2q.push_back(2.0);
  }
  const PotentialPtr tab = make_tabulated(x, q, dq, d2q, 1e-8, 1e-3);
  CHECK(tab->value(1.234) == doctest::Approx(1.234 * 1.234).epsilon(1e-10));
  CHECK(tab->primitive(3.0) == doctest::Approx(9.0).epsilon(1e-10));
  CHECK(tab->inverse_primitive(9.0) == doctest::Approx(3.0).epsilon(1e-8));

  std::vector<double> bad = d2q;
  bad[7] = -1.0;
  try {
    make_tabulated(x, q, dq, bad, 1e-8, 1e-3);
    FAIL("nonconvex samples accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("sample 7") != std::string::npos);
  }
}
