#include <filesystem>
#include <string>

#include "doctest.h"
#include "pileup/error.hpp"
#include "pileup/io.hpp"
#include "pileup/runner.hpp"

using namespace pileup;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const json kPower2 = {{"kind", "power"}, {"p", 2.0}};

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pileup_test_runner_" + name);
  fs::remove_all(p);
  return p;
}

std::string config_error(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const std::string& cell(const CsvTable& t, std::size_t row, const std::string& col) {
  return t.rows.at(row).at(t.column(col));
}

}  // namespace

TEST_CASE("modes") {
  for (const std::string& m : mode_names()) CHECK(to_string(parse_mode(m)) == m);
  CHECK(mode_names().size() == 7);
  CHECK_THROWS_AS(parse_mode("solve"), ConfigError);
}

TEST_CASE("config validation") {
  const json base = {{"mode", "verify"}, {"potential", kPower2}, {"n", {64}}, {"alpha", {4.0}}};
  const RunConfig c = parse_config(base);
  CHECK(c.mode == Mode::verify);
  CHECK(c.potential.at("kind") == "power");
  CHECK(c.grid.m == 2048);
  CHECK(c.ratio_group == "alpha");
  CHECK_FALSE(c.skip_large_alpha);

  json j = base;
  j["tolerances"] = {{"el_rel", -1.0}};
  CHECK(config_error(j) == "config.tolerances.el_rel: must be positive");
  j = base;
  j["bogus"] = 1;
  CHECK(config_error(j) == "config.bogus: unknown field");
  j = base;
  j["beta"] = {1.0};
  CHECK(config_error(j).find("exactly one of") != std::string::npos);
  j = base;
  j["mode"] = "nope";
  CHECK(config_error(j).find("config.mode") == 0);
  j = base;
  j["n"] = {1};
  CHECK(config_error(j).find("config.n") == 0);
  j = base;
  j["potential"] = {{"kind", "power"}, {"p", 0.2}};
  CHECK(config_error(j).find("config.potential") == 0);
  j = base;
  j["grid"] = {{"x_lo", 1.0}, {"x_hi", 2.0}, {"m", 64}};
  CHECK(config_error(j).find("config.grid") == 0);
  j = base;
  j["alpha"] = {{"exponent", 1.5}};
  CHECK(config_error(j) == "config.alpha.exponent: must be below 1");

  const RunConfig s = parse_config({{"mode", "sweep"}, {"potential", kPower2}});
  CHECK(s.n == std::vector<int>{64, 128, 256, 512, 1024});
  CHECK(s.alpha == std::vector<double>{2, 4, 8, 16, 32});
  CHECK(s.skip_large_alpha);

  const RunConfig e = parse_config({{"mode", "verify"}, {"potential", kPower2}, {"n", {64, 256}}, {"alpha", {{"exponent", 0.5}}}});
  CHECK(e.ratio_group == "all");
  const RunConfig back = parse_config(to_json(e));
  CHECK(to_json(back) == to_json(e));
  CHECK(parse_config({{"tool", "pileup"}, {"config", to_json(e)}}).n == e.n);
}

TEST_CASE("instance expansion") {
  const RunConfig s = parse_config({{"mode", "sweep"}, {"potential", kPower2}, {"n", {64, 128}}, {"alpha", {2.0, 16.0}}});
  const std::vector<Instance> in = expand_instances(s);
  REQUIRE(in.size() == 4);
  CHECK(in[0].key == "n64_alpha2");
  CHECK_FALSE(in[0].skip);
  CHECK(in[1].skip);  // 16 > 64 / log 64
  CHECK(in[1].skip_reason == "alpha > n / log n");
  CHECK_FALSE(in[3].skip);

  const RunConfig e = parse_config({{"mode", "verify"}, {"potential", kPower2}, {"n", {64, 256}}, {"alpha", {{"exponent", 0.5}}}});
  const std::vector<Instance> ie = expand_instances(e);
  CHECK(ie[0].alpha == 8.0);
  CHECK(ie[1].alpha == 16.0);

  const RunConfig b = parse_config({{"mode", "robin"}, {"potential", kPower2}, {"n", {64}}, {"beta", {1.0}}});
  CHECK(expand_instances(b)[0].key == "n64_beta1");

  const RunConfig a = parse_config({{"mode", "appendix-check"}});
  const std::vector<Instance> ia = expand_instances(a);
  CHECK(ia.size() == 45);
  CHECK(ia[0].key == "bump_alpha1_x0");
}

TEST_CASE("robin run with artifacts") {
  const fs::path out = scratch_dir("robin");
  RunConfig c = parse_config({{"mode", "robin"}, {"potential", kPower2}, {"n", {32, 64}}, {"beta", {1.0}}, {"grid", {{"x_lo", -2.0}, {"x_hi", 2.0}, {"m", 512}}}});
  const RunSummary s = run(c, out);
  CHECK(s.exit_code == 0);
  CHECK(s.done == 2);
  CHECK(s.failed == 0);

  const CsvTable t = read_csv(out / "results.csv");
  REQUIRE(t.rows.size() == 2);
  CHECK(cell(t, 0, "key") == "n32_beta1");
  CHECK(cell(t, 1, "status") == "done");
  CHECK(std::stod(cell(t, 1, "lower")) <= std::stod(cell(t, 1, "upper")));
  CHECK(fs::exists(out / "instances" / "n64_beta1" / "report.json"));
  CHECK(fs::exists(out / "instances" / "n64_beta1" / "density.csv"));
  CHECK(fs::exists(out / "instances" / "n64_beta1" / "particles.csv"));

  const json m = read_json(out / "manifest.json");
  CHECK(m.at("mode") == "robin");
  CHECK(m.at("exit_code") == 0);
  CHECK(m.at("instances").size() == 2);
  CHECK(m.at("versions").contains("eigen"));
  CHECK(parse_config(m).n == c.n);

  plot_data(out);
  const CsvTable d = read_csv(out / "plot" / "density_profiles.csv");
  double total = 0.0;
  const double h = 4.0 / 512.0;
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    if (cell(d, i, "key") == "n64_beta1") total += std::stod(cell(d, i, "density")) * h;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(fs::exists(out / "plot" / "particles_vs_quantiles.csv"));

  fs::remove(out / "instances" / "n32_beta1" / "density.csv");
  try {
    plot_data(out);
    FAIL("plot_data ignored a missing artifact");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("density.csv") != std::string::npos);
  }
  fs::remove_all(out);
}

TEST_CASE("verify run and ratio curves") {
  const fs::path out = scratch_dir("verify");
  RunConfig c = parse_config({{"mode", "verify"}, {"potential", kPower2},
                              {"n", {32, 64}},
                              {"alpha", {4.0}},
                              {"grid", {{"x_lo", -2.0}, {"x_hi", 2.0}, {"m", 512}}}});
  const RunSummary s = run(c, out);
  CHECK(s.failed == 0);
  const CsvTable t = read_csv(out / "results.csv");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(cell(t, i, "pass_sign") == "true");
    CHECK_FALSE(cell(t, i, "pass_ratio").empty());
  }
  plot_data(out);
  CHECK(read_csv(out / "plot" / "ratio_curves.csv").rows.size() == 2);
  CHECK(read_json(out / "manifest.json").at("ratio_groups").size() == 1);
  fs::remove_all(out);
}

TEST_CASE("failures are recorded without aborting") {
  const fs::path out = scratch_dir("fail");
  RunConfig c = parse_config({{"mode", "solve-continuum"}, {"potential", kPower2},
                              {"n", {64}},
                              {"alpha", {4.0, 8.0}},
                              {"grid", {{"x_lo", -0.3}, {"x_hi", 0.3}, {"m", 64}}}});
  const RunSummary s = run(c, out);
  CHECK(s.exit_code == 1);
  CHECK(s.failed == 2);
  CHECK(s.problems.size() == 2);
  const CsvTable t = read_csv(out / "results.csv");
  CHECK(cell(t, 0, "status") == "failed");
  CHECK_FALSE(cell(t, 0, "message").empty());
  fs::remove_all(out);
}

TEST_CASE("check-assumptions names the failing condition") {
  const fs::path out = scratch_dir("assume");
  RunConfig c = parse_config({{"mode", "check-assumptions"},
                              {"potential", {{"kind", "power"}, {"p", 2.0}, {"offset", 0.5}}},
                              {"n", {64}},
                              {"beta", {1.0}}});
  const RunSummary s = run(c, out);
  CHECK(s.exit_code != 0);
  REQUIRE(s.problems.size() == 1);
  CHECK(s.problems[0].find("normalization") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("single-worker runs are byte-identical") {
  const json j = {{"mode", "solve-discrete"}, {"potential", kPower2}, {"n", {8, 16}}, {"alpha", {2.0, 3.0}}};
  const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  run(parse_config(j), a);
  run(parse_config(j), b);
  CHECK(read_text(a / "results.csv") == read_text(b / "results.csv"));
  CHECK(read_text(a / "instances" / "n16_alpha3" / "particles.csv") ==
        read_text(b / "instances" / "n16_alpha3" / "particles.csv"));

  json jm = j;
  jm["workers"] = 3;
  const fs::path c = scratch_dir("det_c");
  run(parse_config(jm), c);
  CHECK(read_text(a / "results.csv") == read_text(c / "results.csv"));
  for (const auto& p : {a, b, c}) fs::remove_all(p);
}
