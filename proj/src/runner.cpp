#include "pileup/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <spdlog/spdlog.h>

#include "pileup/analysis.hpp"
#include "pileup/bounds.hpp"
#include "pileup/discrete.hpp"
#include "pileup/error.hpp"
#include "pileup/io.hpp"
#include "pileup/kernel_split.hpp"
#include "pileup/potential.hpp"
#include "pileup/scaling.hpp"

#ifndef PILEUP_VERSION
#define PILEUP_VERSION "0.0.0"
#endif

namespace pileup {

using nlohmann::json;

namespace {

const std::vector<std::pair<Mode, std::string>>& mode_table() {
  static const std::vector<std::pair<Mode, std::string>> t = {
      {Mode::solve_discrete, "solve-discrete"}, {Mode::solve_continuum, "solve-continuum"},
      {Mode::verify, "verify"},                 {Mode::robin, "robin"},
      {Mode::sweep, "sweep"},                   {Mode::check_assumptions, "check-assumptions"},
      {Mode::appendix_check, "appendix-check"}};
  return t;
}

}  // namespace

std::string to_string(Mode m) {
  for (const auto& [k, v] : mode_table()) {
    if (k == m) return v;
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  for (const auto& [k, v] : mode_table()) {
    if (v == s) return k;
  }
  throw ConfigError("config.mode: unknown mode '" + s + "'");
}

const std::vector<std::string>& mode_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& e : mode_table()) v.push_back(e.second);
    return v;
  }();
  return names;
}

// ---------------------------------------------------------------------------
// config

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(path, "must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) fail(path + "." + k, "unknown field");
  }
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

double get_positive(const json& j, const std::string& path) {
  const double v = get_number(j, path);
  if (!(v > 0.0)) fail(path, "must be positive");
  return v;
}

int get_int(const json& j, const std::string& path, int min) {
  if (!j.is_number_integer()) fail(path, "must be an integer");
  const long long v = j.get<long long>();
  if (v < min || v > 1000000000) fail(path, "must be an integer >= " + std::to_string(min));
  return static_cast<int>(v);
}

std::vector<double> get_positive_list(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "must be a non-empty array");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(get_positive(j[i], path + "[" + std::to_string(i) + "]"));
  return v;
}

}  // namespace

RunConfig parse_config(const json& in) {
  if (in.is_object() && in.contains("tool") && in.contains("config")) return parse_config(in["config"]);
  const std::string root = "config";
  check_keys(in, root,
             {"mode", "potential", "n", "alpha", "beta", "grid", "tolerances", "max_iter", "ratio_group",
              "gamma_window", "skip_large_alpha", "appendix", "output", "workers", "seed"});
  RunConfig c;
  if (!in.contains("mode") || !in["mode"].is_string()) fail(root + ".mode", "required string");
  c.mode = parse_mode(in["mode"].get<std::string>());
  const bool appendix = c.mode == Mode::appendix_check;

  if (in.contains("potential")) {
    c.potential = in["potential"];
    try {
      make_potential(c.potential);
    } catch (const std::exception& e) {
      fail(root + ".potential", e.what());
    }
  } else if (!appendix) {
    fail(root + ".potential", "required");
  }

  if (in.contains("n")) {
    const json& nj = in["n"];
    if (!nj.is_array() || nj.empty()) fail(root + ".n", "must be a non-empty array");
    for (std::size_t i = 0; i < nj.size(); ++i) c.n.push_back(get_int(nj[i], root + ".n[" + std::to_string(i) + "]", 2));
  } else if (c.mode == Mode::sweep) {
    c.n = {64, 128, 256, 512, 1024};
  } else if (!appendix) {
    fail(root + ".n", "required");
  }

  const bool has_alpha = in.contains("alpha"), has_beta = in.contains("beta");
  if (c.mode == Mode::sweep && !has_alpha && !has_beta) {
    c.alpha = {2.0, 4.0, 8.0, 16.0, 32.0};
  } else if (!appendix) {
    if (has_alpha == has_beta) fail(root, "exactly one of \"alpha\" and \"beta\" must be given");
    if (has_alpha) {
      const json& a = in["alpha"];
      if (a.is_object()) {
        check_keys(a, root + ".alpha", {"exponent"});
        if (!a.contains("exponent")) fail(root + ".alpha.exponent", "required");
        c.alpha_exponent = get_positive(a["exponent"], root + ".alpha.exponent");
        if (*c.alpha_exponent >= 1.0) fail(root + ".alpha.exponent", "must be below 1");
      } else {
        c.alpha = get_positive_list(a, root + ".alpha");
      }
    } else {
      c.beta = get_positive_list(in["beta"], root + ".beta");
    }
  }

  if (in.contains("grid")) {
    const json& g = in["grid"];
    const std::string p = root + ".grid";
    check_keys(g, p, {"x_lo", "x_hi", "m"});
    if (g.contains("x_lo")) c.grid.x_lo = get_number(g["x_lo"], p + ".x_lo");
    if (g.contains("x_hi")) c.grid.x_hi = get_number(g["x_hi"], p + ".x_hi");
    if (g.contains("m")) c.grid.m = get_int(g["m"], p + ".m", 16);
    if (!(c.grid.x_lo < 0.0 && c.grid.x_hi > 0.0)) fail(p, "x_lo < 0 < x_hi required");
  }

  if (in.contains("tolerances")) {
    const json& t = in["tolerances"];
    const std::string p = root + ".tolerances";
    check_keys(t, p,
               {"discrete_grad_rel", "el_rel", "sign_rel", "support_eps_rel", "ratio_spread", "appendix_rel"});
    const auto set = [&](const char* k, double& dst) {
      if (t.contains(k)) dst = get_positive(t[k], p + "." + k);
    };
    set("discrete_grad_rel", c.discrete_grad_rel);
    set("el_rel", c.el_rel);
    set("sign_rel", c.sign_rel);
    set("support_eps_rel", c.support_eps_rel);
    set("ratio_spread", c.ratio_spread);
    set("appendix_rel", c.appendix_rel);
    if (c.ratio_spread < 1.0) fail(p + ".ratio_spread", "must be at least 1");
  }

  if (in.contains("max_iter")) {
    const json& m = in["max_iter"];
    const std::string p = root + ".max_iter";
    check_keys(m, p, {"discrete", "continuum"});
    if (m.contains("discrete")) c.discrete_max_iter = get_int(m["discrete"], p + ".discrete", 1);
    if (m.contains("continuum")) c.continuum_max_iter = get_int(m["continuum"], p + ".continuum", 1);
  }

  c.ratio_group = c.alpha.empty() ? "all" : "alpha";
  if (in.contains("ratio_group")) {
    const json& r = in["ratio_group"];
    if (!r.is_string()) fail(root + ".ratio_group", "must be a string");
    c.ratio_group = r.get<std::string>();
    if (c.ratio_group != "all" && c.ratio_group != "alpha" && c.ratio_group != "beta") {
      fail(root + ".ratio_group", "must be \"all\", \"alpha\" or \"beta\"");
    }
  }

  if (in.contains("gamma_window")) c.gamma_window = get_positive(in["gamma_window"], root + ".gamma_window");

  c.skip_large_alpha = c.mode == Mode::sweep;
  if (in.contains("skip_large_alpha")) {
    if (!in["skip_large_alpha"].is_boolean()) fail(root + ".skip_large_alpha", "must be a boolean");
    c.skip_large_alpha = in["skip_large_alpha"].get<bool>();
  }

  if (in.contains("appendix")) {
    const json& a = in["appendix"];
    const std::string p = root + ".appendix";
    check_keys(a, p, {"functions", "alpha", "points"});
    if (a.contains("functions")) {
      const json& f = a["functions"];
      if (!f.is_array() || f.empty()) fail(p + ".functions", "must be a non-empty array");
      c.appendix_functions.clear();
      for (std::size_t i = 0; i < f.size(); ++i) {
        const std::string fp = p + ".functions[" + std::to_string(i) + "]";
        if (!f[i].is_string()) fail(fp, "must be a string");
        try {
          test_function(f[i].get<std::string>());
        } catch (const ConfigError& e) {
          fail(fp, e.what());
        }
        c.appendix_functions.push_back(f[i].get<std::string>());
      }
    }
    if (a.contains("alpha")) c.appendix_alpha = get_positive_list(a["alpha"], p + ".alpha");
    if (a.contains("points")) c.appendix_points = get_int(a["points"], p + ".points", 1);
  }

  if (in.contains("output")) {
    if (!in["output"].is_string() || in["output"].get<std::string>().empty()) {
      fail(root + ".output", "must be a non-empty string");
    }
    c.output = in["output"].get<std::string>();
  }
  if (in.contains("workers")) c.workers = get_int(in["workers"], root + ".workers", 1);
  if (in.contains("seed")) {
    if (!in["seed"].is_number_unsigned()) fail(root + ".seed", "must be a non-negative integer");
    c.seed = in["seed"].get<std::uint64_t>();
  }
  return c;
}

json to_json(const RunConfig& c) {
  json j;
  j["mode"] = to_string(c.mode);
  j["potential"] = c.potential;
  if (!c.n.empty()) j["n"] = c.n;
  if (c.alpha_exponent) {
    j["alpha"] = {{"exponent", *c.alpha_exponent}};
  } else if (!c.alpha.empty()) {
    j["alpha"] = c.alpha;
  } else if (!c.beta.empty()) {
    j["beta"] = c.beta;
  }
  j["grid"] = {{"x_lo", c.grid.x_lo}, {"x_hi", c.grid.x_hi}, {"m", c.grid.m}};
  j["tolerances"] = {{"discrete_grad_rel", c.discrete_grad_rel}, {"el_rel", c.el_rel},
                     {"sign_rel", c.sign_rel},                   {"support_eps_rel", c.support_eps_rel},
                     {"ratio_spread", c.ratio_spread},           {"appendix_rel", c.appendix_rel}};
  j["max_iter"] = {{"discrete", c.discrete_max_iter}, {"continuum", c.continuum_max_iter}};
  j["gamma_window"] = c.gamma_window;
  j["ratio_group"] = c.ratio_group;
  j["skip_large_alpha"] = c.skip_large_alpha;
  j["appendix"] = {{"functions", c.appendix_functions}, {"alpha", c.appendix_alpha}, {"points", c.appendix_points}};
  j["output"] = c.output;
  j["workers"] = c.workers;
  j["seed"] = c.seed;
  return j;
}

// ---------------------------------------------------------------------------
// instances

namespace {

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<double> appendix_points(const TestFunction& f, int count) {
  // evenly spaced in the middle 80% of (a, b)
  std::vector<double> pts;
  const double lo = f.a + 0.1 * (f.b - f.a), hi = f.b - 0.1 * (f.b - f.a);
  for (int i = 0; i < count; ++i) pts.push_back(count == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (count - 1.0));
  return pts;
}

}  // namespace

std::vector<Instance> expand_instances(const RunConfig& c) {
  std::vector<Instance> out;
  if (c.mode == Mode::appendix_check) {
    for (const auto& name : c.appendix_functions) {
      const TestFunction& f = test_function(name);
      const std::vector<double> pts = appendix_points(f, c.appendix_points);
      for (double a : c.appendix_alpha) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
          Instance in;
          in.function = name;
          in.alpha = a;
          in.x = pts[i];
          in.key = name + "_alpha" + short_number(a) + "_x" + std::to_string(i);
          out.push_back(in);
        }
      }
    }
    return out;
  }
  for (int n : c.n) {
    std::vector<double> alphas = c.alpha;
    if (c.alpha_exponent) alphas = {std::ceil(std::pow(static_cast<double>(n), *c.alpha_exponent))};
    if (!alphas.empty()) {
      for (double a : alphas) {
        Instance in;
        in.n = n;
        in.alpha = a;
        in.key = "n" + std::to_string(n) + "_alpha" + short_number(a);
        if (c.skip_large_alpha && a > n / std::log(static_cast<double>(n))) {
          in.skip = true;
          in.skip_reason = "alpha > n / log n";
        }
        out.push_back(in);
      }
    } else {
      for (double b : c.beta) {
        Instance in;
        in.n = n;
        in.beta = b;
        in.key = "n" + std::to_string(n) + "_beta" + short_number(b);
        out.push_back(in);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// execution

namespace {

struct Result {
  Instance inst;
  std::string status = "done";  // done | skipped | failed
  std::string message;
  json row = json::object();      // CSV columns
  json report = json::object();   // instances/<key>/report.json
  std::optional<CsvTable> density, particles;
  bool pass = true;
  double wall = 0.0;
};

// Continuum solutions depend on alpha only; share them between instances.
class ContinuumCache {
 public:
  ContinuumSolution get(const ScaleFrame& f, const ContinuumOptions& opt) {
    std::shared_future<ContinuumSolution> fut;
    std::promise<ContinuumSolution> promise;
    bool owner = false;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(f.alpha);
      if (it == cache_.end()) {
        fut = promise.get_future().share();
        cache_.emplace(f.alpha, fut);
        owner = true;
      } else {
        fut = it->second;
      }
    }
    if (owner) {
      try {
        promise.set_value(minimize_continuum(f, opt));
      } catch (...) {
        promise.set_exception(std::current_exception());
      }
    }
    return fut.get();
  }

 private:
  std::mutex mu_;
  std::map<double, std::shared_future<ContinuumSolution>> cache_;
};

struct Context {
  const RunConfig& cfg;
  PotentialPtr potential;
  ContinuumOptions copt;
  DiscreteOptions dopt;
  VerifyOptions vopt;
  ContinuumCache cache;
};

ScaleFrame frame_for(const Context& ctx, const Instance& in) {
  return in.alpha > 0.0 ? make_frame_alpha(in.n, in.alpha, ctx.potential) : make_frame(in.n, in.beta, ctx.potential);
}

ContinuumSolution continuum_for(Context& ctx, const ScaleFrame& f) {
  ContinuumSolution s = ctx.cache.get(f, ctx.copt);
  s.report.F_raw = f.gamma * s.report.F;
  return s;
}

void put_frame(const Context& ctx, Result& r, const ScaleFrame& f) {
  r.inst.alpha = f.alpha;
  r.inst.beta = f.beta;
  r.row["gamma"] = f.gamma;
  r.row["in_window"] = in_gamma_window(f, ctx.cfg.gamma_window);
  if (!r.row["in_window"].get<bool>()) spdlog::info("{}: beta outside the admissible window", r.inst.key);
  r.report["frame"] = to_json(f);
}

void run_solve_discrete(Context& ctx, Result& r) {
  const ScaleFrame f = frame_for(ctx, r.inst);
  put_frame(ctx, r, f);
  DiscreteSolution s;
  try {
    s = minimize_discrete(f, std::nullopt, ctx.dopt);
  } catch (const DiscreteConvergenceError& e) {
    s = e.best();
    r.status = "failed";
    r.message = e.what();
  }
  const DiscreteReport& d = s.report;
  r.row.update({{"E", d.energy},
                {"F", d.F},
                {"F_raw", d.F_raw},
                {"grad_norm", d.grad_norm},
                {"iterations", d.iterations},
                {"converged", d.converged}});
  r.report["discrete"] = to_json(d);
  r.particles = particle_table(s.x, f.alpha, Eigen::VectorXd());
  r.pass = d.converged;
}

void run_solve_continuum(Context& ctx, Result& r) {
  const ScaleFrame f = frame_for(ctx, r.inst);
  put_frame(ctx, r, f);
  const ContinuumSolution s = continuum_for(ctx, f);
  const ContinuumReport& c = s.report;
  const DensityDiagnostics dd = density_diagnostics(s.rho, f);
  r.row.update({{"E", c.energy},
                {"F", c.F},
                {"F_el", c.F_el},
                {"F_raw", c.F_raw},
                {"el_dev", c.el.on_support_max_dev},
                {"el_slack", c.el.off_support_min_slack},
                {"y1", dd.y1},
                {"y2", dd.y2},
                {"max_density", dd.max_density},
                {"support_cells", c.support_cells},
                {"converged", c.converged}});
  r.report["continuum"] = to_json(c);
  r.report["density"] = to_json(dd);
  r.density = density_table(s.rho);
  r.pass = c.converged;
  if (!c.converged) {
    r.status = "failed";
    r.message = "continuum solver did not reach the EL tolerance";
  }
}

void run_verify(Context& ctx, Result& r) {
  const ScaleFrame f = frame_for(ctx, r.inst);
  put_frame(ctx, r, f);
  const ContinuumSolution cs = continuum_for(ctx, f);
  const SolvedPair s = solve_pair(f, ctx.copt, ctx.dopt, &cs);
  const BoundsReport b = verify_theorems(s, ctx.vopt);
  const Eigen::VectorXd xhat = quantile_points(s.continuum.rho, f.n);
  const DiagonalEnergies d = diagonal_energies(xhat, s.continuum.rho, f, b.q_alpha);
  const DiscrepancyReport dr =
      discrepancy_norm(f, s.discrete.x, b.E_disc, s.continuum.rho, b.E_cont, b.q_alpha);
  const ContinuumReport& c = s.continuum.report;
  r.row.update({{"E_disc", b.E_disc},
                {"E_cont", b.E_cont},
                {"F_disc", b.F_disc},
                {"F_cont", b.F_cont},
                {"FD", b.FD},
                {"FC", b.FC},
                {"energy_diff", b.energy_diff},
                {"potential_diff", b.potential_diff},
                {"q_alpha", b.q_alpha},
                {"A_scale", b.A_scale},
                {"B_scale", b.B_scale},
                {"ratio_E", b.ratio_E},
                {"ratio_F", b.ratio_F},
                {"raw_ratio_E", b.raw_ratio_E},
                {"raw_ratio_F", b.raw_ratio_F},
                {"pass_sign", b.pass_sign},
                {"pass_raw_sign", b.pass_raw_sign},
                {"D_n", d.D_n},
                {"D_phi", d.D_phi},
                {"diag_ratio", d.ratio},
                {"pass_order", d.pass_order},
                {"pass_gap", d.pass_gap},
                {"max_mass_error", d.max_mass_error},
                {"discrepancy_norm", dr.norm},
                {"measured_C", dr.measured_C},
                {"el_dev", c.el.on_support_max_dev},
                {"el_slack", c.el.off_support_min_slack},
                {"newton_iterations", s.discrete.report.iterations}});
  r.report["bounds"] = to_json(b);
  r.report["diagonal"] = to_json(d);
  r.report["discrepancy"] = to_json(dr);
  r.report["continuum"] = to_json(c);
  r.report["discrete"] = to_json(s.discrete.report);
  r.density = density_table(s.continuum.rho);
  r.particles = particle_table(s.discrete.x, f.alpha, quantile_init(s.continuum.rho, f.n));
  r.pass = b.pass_sign && d.pass_order && d.pass_gap;
}

void run_robin(Context& ctx, Result& r) {
  const ScaleFrame f = frame_for(ctx, r.inst);
  put_frame(ctx, r, f);
  const ContinuumSolution cs = continuum_for(ctx, f);
  const SolvedPair s = solve_pair(f, ctx.copt, ctx.dopt, &cs);
  const RobinBracket b = robin_bracket(s);
  r.row.update({{"FD", b.FD},
                {"FC", b.FC},
                {"lower", b.lower},
                {"upper", b.upper},
                {"width", b.width},
                {"width_decomposed", b.width_decomposed},
                {"ordered", b.ordered},
                {"ht19_new", b.ht19_new},
                {"ht19_old", b.ht19_old},
                {"ht19_ratio", b.ht19_ratio}});
  r.report["robin"] = to_json(b);
  r.report["continuum"] = to_json(s.continuum.report);
  r.report["discrete"] = to_json(s.discrete.report);
  r.density = density_table(s.continuum.rho);
  r.particles = particle_table(s.discrete.x, f.alpha, quantile_init(s.continuum.rho, f.n));
  r.pass = b.ordered;
}

void run_check_assumptions(Context& ctx, Result& r) {
  double beta = r.inst.beta;
  if (r.inst.alpha > 0.0) beta = r.inst.n * std::exp(-ctx.potential->log_primitive(r.inst.alpha));
  r.inst.beta = beta;
  const AssumptionReport a = check_assumptions(*ctx.potential, r.inst.n, beta);
  std::string failed;
  for (const auto& c : a.checks) {
    r.row[c.name] = c.pass ? "pass" : "fail";
    if (!c.pass) failed += (failed.empty() ? "" : ";") + c.name;
  }
  r.row["all_pass"] = a.all_pass();
  r.row["failed_checks"] = failed;
  r.report["assumptions"] = to_json(a);
  r.pass = a.all_pass();
  if (!r.pass) r.message = "failed: " + failed;
}

void run_appendix(Context& ctx, Result& r) {
  const TestFunction& f = test_function(r.inst.function);
  const QuadValue v = convolution_second_derivative(f, r.inst.alpha, r.inst.x);
  const double oracle = convolution_second_difference(f, r.inst.alpha, r.inst.x);
  const double rel = std::abs(v.value - oracle) / std::max(std::abs(oracle), 1e-300);
  r.row.update({{"value", v.value}, {"error", v.error}, {"oracle", oracle}, {"rel_dev", rel}});
  r.pass = rel <= ctx.cfg.appendix_rel;
  r.row["pass"] = r.pass;
  r.report = {{"function", f.name}, {"alpha", r.inst.alpha}, {"x", r.inst.x}, {"value", v.value},
              {"error", v.error},   {"oracle", oracle},       {"rel_dev", rel}, {"pass", r.pass}};
}

void execute(Context& ctx, Result& r) {
  if (r.inst.skip) {
    r.status = "skipped";
    r.message = r.inst.skip_reason;
    return;
  }
  const auto t0 = std::chrono::steady_clock::now();
  try {
    switch (ctx.cfg.mode) {
      case Mode::solve_discrete: run_solve_discrete(ctx, r); break;
      case Mode::solve_continuum: run_solve_continuum(ctx, r); break;
      case Mode::verify:
      case Mode::sweep: run_verify(ctx, r); break;
      case Mode::robin: run_robin(ctx, r); break;
      case Mode::check_assumptions: run_check_assumptions(ctx, r); break;
      case Mode::appendix_check: run_appendix(ctx, r); break;
    }
  } catch (const std::exception& e) {
    r.status = "failed";
    r.message = e.what();
    r.pass = false;
    spdlog::warn("{}: {}", r.inst.key, e.what());
  }
  r.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  spdlog::info("{} {} in {:.2f}s", r.inst.key, r.status, r.wall);
}

std::vector<std::string> mode_columns(Mode m) {
  switch (m) {
    case Mode::solve_discrete: return {"E", "F", "F_raw", "grad_norm", "iterations", "converged"};
    case Mode::solve_continuum:
      return {"E", "F", "F_el", "F_raw", "el_dev", "el_slack", "y1", "y2", "max_density", "support_cells",
              "converged"};
    case Mode::verify:
    case Mode::sweep:
      return {"E_disc",      "E_cont",        "F_disc",       "F_cont",        "FD",
              "FC",          "energy_diff",   "potential_diff", "q_alpha",     "A_scale",
              "B_scale",     "ratio_E",       "ratio_F",      "raw_ratio_E",   "raw_ratio_F",
              "pass_sign",   "pass_raw_sign", "pass_ratio",   "pass_ratio_E",  "pass_ratio_F",  "D_n",
              "D_phi",       "diag_ratio",    "pass_order",   "pass_gap",      "pass_ratio_D",
              "max_mass_error", "discrepancy_norm", "measured_C", "el_dev",    "el_slack",
              "newton_iterations"};
    case Mode::robin:
      return {"FD", "FC", "lower", "upper", "width", "width_decomposed", "ordered", "ht19_new", "ht19_old",
              "ht19_ratio"};
    case Mode::check_assumptions:
      return {"convexity", "normalization", "growth", "orientation", "all_pass", "failed_checks"};
    case Mode::appendix_check: return {"value", "error", "oracle", "rel_dev", "pass"};
  }
  return {};
}

std::string cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return format_double(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

// Ratio stability over groups; writes pass_ratio_* into the rows and returns the group summaries.
json aggregate_ratios(const RunConfig& cfg, std::vector<Result>& results) {
  std::map<std::string, std::vector<Result*>> groups;
  for (auto& r : results) {
    if (r.status != "done") continue;
    std::string g = "all";
    if (cfg.ratio_group == "alpha") g = "alpha=" + short_number(r.inst.alpha);
    if (cfg.ratio_group == "beta") g = "beta=" + short_number(r.inst.beta);
    groups[g].push_back(&r);
  }
  json out = json::array();
  for (auto& [name, members] : groups) {
    json gj = {{"group", name}, {"size", members.size()}};
    for (const auto& [col, flag] : std::vector<std::pair<std::string, std::string>>{
             {"ratio_E", "pass_ratio_E"}, {"ratio_F", "pass_ratio_F"}, {"diag_ratio", "pass_ratio_D"}}) {
      std::vector<double> v;
      for (auto* r : members) v.push_back(r->row[col].get<double>());
      const RatioStability s = ratio_stability(v, cfg.ratio_spread);
      for (auto* r : members) {
        r->row[flag] = s.pass;
        r->pass = r->pass && s.pass;
      }
      gj[col] = {{"min", s.min}, {"max", s.max}, {"spread", s.spread}, {"pass", s.pass}};
    }
    for (auto* r : members) r->row["pass_ratio"] = r->row["pass_ratio_E"].get<bool>() && r->row["pass_ratio_F"].get<bool>();
    out.push_back(gj);
  }
  return out;
}

json versions() {
  return {{"pileup", PILEUP_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

}  // namespace

RunSummary run(const RunConfig& cfg, const std::filesystem::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  Context ctx{cfg, nullptr, {}, {}, {}, {}};
  if (cfg.mode != Mode::appendix_check) ctx.potential = make_potential(cfg.potential);
  ctx.copt.grid = cfg.grid;
  ctx.copt.support_eps_rel = cfg.support_eps_rel;
  ctx.copt.el_tol_rel = cfg.el_rel;
  ctx.copt.max_iter = cfg.continuum_max_iter;
  ctx.dopt.tol_g_rel = cfg.discrete_grad_rel;
  ctx.dopt.max_iter = cfg.discrete_max_iter;
  ctx.vopt.num_tol_rel = cfg.sign_rel;

  std::vector<Result> results;
  for (const Instance& in : expand_instances(cfg)) {
    Result r;
    r.inst = in;
    results.push_back(std::move(r));
  }
  spdlog::info("{}: {} instances on {} worker(s)", to_string(cfg.mode), results.size(), cfg.workers);

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < results.size(); i = next++) execute(ctx, results[i]);
  };
  const int nthreads = std::max(1, std::min<int>(cfg.workers, static_cast<int>(results.size())));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::sort(results.begin(), results.end(), [](const Result& a, const Result& b) {
    if (a.inst.function != b.inst.function) return a.inst.function < b.inst.function;
    if (a.inst.n != b.inst.n) return a.inst.n < b.inst.n;
    if (a.inst.alpha != b.inst.alpha) return a.inst.alpha < b.inst.alpha;
    if (a.inst.beta != b.inst.beta) return a.inst.beta < b.inst.beta;
    return a.inst.x < b.inst.x;
  });

  json groups = json::array();
  if (cfg.mode == Mode::verify || cfg.mode == Mode::sweep) groups = aggregate_ratios(cfg, results);

  // results.csv
  const bool appendix = cfg.mode == Mode::appendix_check;
  CsvTable table;
  table.header = appendix ? std::vector<std::string>{"key", "function", "alpha", "x", "status", "message"}
                          : std::vector<std::string>{"key", "n", "alpha", "beta", "gamma", "in_window", "status",
                                                     "message"};
  const std::vector<std::string> cols = mode_columns(cfg.mode);
  table.header.insert(table.header.end(), cols.begin(), cols.end());
  RunSummary summary;
  summary.out = out;
  json instances = json::array(), skipped = json::array();
  for (auto& r : results) {
    std::vector<std::string> row = {r.inst.key};
    if (appendix) {
      row.insert(row.end(), {r.inst.function, format_double(r.inst.alpha), format_double(r.inst.x)});
    } else {
      row.insert(row.end(), {std::to_string(r.inst.n), r.inst.alpha > 0.0 ? format_double(r.inst.alpha) : "",
                             r.inst.beta > 0.0 ? format_double(r.inst.beta) : "",
                             r.row.contains("gamma") ? cell(r.row["gamma"]) : "",
                             r.row.contains("in_window") ? cell(r.row["in_window"]) : ""});
    }
    row.push_back(r.status);
    row.push_back(r.message);
    for (const auto& c : cols) row.push_back(r.row.contains(c) ? cell(r.row[c]) : "");
    table.add_row(std::move(row));

    if (r.status == "skipped") {
      ++summary.skipped;
      skipped.push_back({{"key", r.inst.key}, {"reason", r.message}});
    } else if (r.status == "failed") {
      ++summary.failed;
    } else {
      ++summary.done;
    }
    if (r.status != "skipped" && !r.pass) {
      summary.all_pass = false;
      summary.problems.push_back(r.inst.key + ": " + (r.message.empty() ? "checks did not pass" : r.message));
    }
    instances.push_back({{"key", r.inst.key},
                         {"status", r.status},
                         {"message", r.message},
                         {"pass", r.status == "skipped" ? json() : json(r.pass)},
                         {"wall_seconds", r.wall}});

    if (r.status != "skipped") {
      const std::filesystem::path dir = out / "instances" / r.inst.key;
      json rep = r.report;
      rep["key"] = r.inst.key;
      rep["status"] = r.status;
      rep["message"] = r.message;
      rep["pass"] = r.pass;
      rep["row"] = r.row;
      write_json(dir / "report.json", rep);
      if (r.density) write_csv(dir / "density.csv", *r.density);
      if (r.particles) write_csv(dir / "particles.csv", *r.particles);
    }
  }
  write_csv(out / "results.csv", table);

  summary.exit_code = (summary.failed == 0 && summary.all_pass) ? 0 : 1;
  json manifest = {{"tool", "pileup"},
                   {"mode", to_string(cfg.mode)},
                   {"config", to_json(cfg)},
                   {"versions", versions()},
                   {"instances", instances},
                   {"skipped", skipped},
                   {"ratio_groups", groups},
                   {"counts", {{"done", summary.done}, {"skipped", summary.skipped}, {"failed", summary.failed}}},
                   {"all_pass", summary.all_pass},
                   {"exit_code", summary.exit_code},
                   {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  write_json(out / "manifest.json", manifest);
  spdlog::info("done={} skipped={} failed={} all_pass={}", summary.done, summary.skipped, summary.failed,
               summary.all_pass);
  return summary;
}

// ---------------------------------------------------------------------------
// plot data

void plot_data(const std::filesystem::path& run_dir) {
  const json manifest = read_json(run_dir / "manifest.json");
  const CsvTable results = read_csv(run_dir / "results.csv");
  const Mode mode = parse_mode(manifest.at("mode").get<std::string>());
  const std::filesystem::path plot = run_dir / "plot";
  const bool has_density = mode == Mode::solve_continuum || mode == Mode::verify || mode == Mode::sweep ||
                           mode == Mode::robin;
  const bool has_particles = mode == Mode::solve_discrete || mode == Mode::verify || mode == Mode::sweep ||
                             mode == Mode::robin;
  if (!has_density && !has_particles) return;

  const std::size_t ck = results.column("key"), cn = results.column("n"), ca = results.column("alpha"),
                    cs = results.column("status");
  CsvTable density, particles, ratios;
  density.header = {"key", "n", "alpha", "x", "density"};
  particles.header = {"key", "n", "alpha", "index", "x", "quantile"};
  ratios.header = {"n", "alpha", "ratio_E", "ratio_F", "raw_ratio_E", "raw_ratio_F", "diag_ratio", "A_scale"};
  for (const auto& row : results.rows) {
    if (row[cs] != "done") continue;
    const std::filesystem::path dir = run_dir / "instances" / row[ck];
    if (has_density) {
      const CsvTable d = read_csv(dir / "density.csv");
      const std::size_t x = d.column("x_center"), v = d.column("density");
      for (const auto& dr : d.rows) density.add_row({row[ck], row[cn], row[ca], dr[x], dr[v]});
    }
    if (has_particles) {
      const CsvTable p = read_csv(dir / "particles.csv");
      const std::size_t i = p.column("index"), x = p.column("x"), q = p.column("quantile");
      for (const auto& pr : p.rows) particles.add_row({row[ck], row[cn], row[ca], pr[i], pr[x], pr[q]});
    }
    if (mode == Mode::verify || mode == Mode::sweep) {
      std::vector<std::string> r = {row[cn], row[ca]};
      for (const char* c : {"ratio_E", "ratio_F", "raw_ratio_E", "raw_ratio_F", "diag_ratio", "A_scale"}) {
        r.push_back(row[results.column(c)]);
      }
      ratios.add_row(std::move(r));
    }
  }
  if (has_density) write_csv(plot / "density_profiles.csv", density);
  if (has_particles) write_csv(plot / "particles_vs_quantiles.csv", particles);
  if (mode == Mode::verify || mode == Mode::sweep) write_csv(plot / "ratio_curves.csv", ratios);
}

}  // namespace pileup
