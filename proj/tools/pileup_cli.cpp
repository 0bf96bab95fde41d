// pileup: run discrete / continuum pile-up experiments from a JSON config.
//
//   pileup <mode> --config run.json [--out dir] [--workers k] [--seed s]
//   pileup plot --out dir
//
// Log level from RIESZ_PILEUP_LOG (trace, debug, info, warn, error, off).

#include <cstdlib>
#include <iostream>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "pileup/error.hpp"
#include "pileup/io.hpp"
#include "pileup/runner.hpp"

int main(int argc, char** argv) {
  if (const char* lvl = std::getenv("RIESZ_PILEUP_LOG")) {
    spdlog::set_level(spdlog::level::from_str(lvl));
  } else {
    spdlog::set_level(spdlog::level::warn);
  }

  CLI::App app{"Discrete-to-continuum pile-up experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int workers = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;

  for (const std::string& mode : pileup::mode_names()) {
    CLI::App* sub = app.add_subcommand(mode, "run mode " + mode);
    sub->add_option("--config", config_path, "JSON run config or a previous manifest.json")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (default: config.output)");
    sub->add_option("--workers", workers, "worker threads (default: config.workers)")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "reserved; every mode is deterministic")->each([&](const std::string&) {
      seed_given = true;
    });
  }
  CLI::App* plot = app.add_subcommand("plot", "write plot-ready tables for a finished run");
  plot->add_option("--out", out_dir, "run directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (plot->parsed()) {
      pileup::plot_data(out_dir);
      return 0;
    }
    const std::string mode = app.get_subcommands().front()->get_name();
    nlohmann::json j = pileup::read_json(config_path);
    if (j.is_object() && j.contains("tool") && j.contains("config")) j = j["config"];
    if (!j.is_object()) throw pileup::ConfigError("config: must be a JSON object");
    if (j.contains("mode") && j["mode"] != mode) {
      spdlog::warn("config.mode '{}' overridden by subcommand '{}'", j["mode"].dump(), mode);
    }
    j["mode"] = mode;
    pileup::RunConfig cfg = pileup::parse_config(j);
    if (workers > 0) cfg.workers = workers;
    if (seed_given) cfg.seed = seed;
    if (!out_dir.empty()) cfg.output = out_dir;

    const pileup::RunSummary s = pileup::run(cfg, cfg.output);
    if (cfg.mode != pileup::Mode::check_assumptions && cfg.mode != pileup::Mode::appendix_check) {
      pileup::plot_data(cfg.output);
    }
    std::cout << "mode=" << mode << " done=" << s.done << " skipped=" << s.skipped << " failed=" << s.failed
              << " all_pass=" << (s.all_pass ? "true" : "false") << " out=" << cfg.output << "\n";
    for (const auto& msg : s.problems) std::cerr << "pileup: " << msg << "\n";
    return s.exit_code;
  } catch (const pileup::ConfigError& e) {
    std::cerr << "pileup: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pileup: " << e.what() << "\n";
    return 3;
  }
}
