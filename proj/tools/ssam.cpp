// ssam: command-line driver for the diagonal linear network S-SAM library.
//
//   ssam landscape-grid  --config cfg.json [--out dir]
//   ssam critical-points --config cfg.json [--out dir]
//   ssam run             --config cfg.json [--seed S] [--out dir]
//   ssam verify          --config cfg.json [--seed S] [--out dir] [--negative-controls]
//   ssam sweep           --config cfg.json [--seed S] [--out dir]
//
// Exit codes: 0 success, 1 audit failure, 2 internal-consistency error,
// 3 usage or configuration error, 4 other runtime error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ssam/commands.hpp"

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool negative_controls = false;
};

void add_common(CLI::App* cmd, Options& opt, bool with_seed) {
  cmd->add_option("--config", opt.config_path, "RunConfig JSON file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", opt.out, "output directory (overrides output_dir)");
  if (with_seed) cmd->add_option("--seed", opt.seed, "master seed (overrides seed)");
}

ssam::RunConfig load(const Options& opt) {
  ssam::RunConfig cfg = ssam::load_config(opt.config_path);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.out) cfg.output_dir = *opt.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diagonal linear networks under stochastic sharpness-aware minimization"};
  app.require_subcommand(1);
  Options opt;

  auto* grid = app.add_subcommand("landscape-grid", "loss surfaces on a (w1, w2) grid, one CSV per eta");
  add_common(grid, opt, false);
  auto* crit = app.add_subcommand("critical-points", "enumerate and certify the critical points of L_R");
  add_common(crit, opt, false);
  auto* run = app.add_subcommand("run", "run flow, gd, ssam or projected-ssam and export the trajectory");
  add_common(run, opt, true);
  auto* verify = app.add_subcommand("verify", "run the invariant suite and write a JSON report");
  add_common(verify, opt, true);
  verify->add_flag("--negative-controls", opt.negative_controls, "add audits that must fail");
  auto* sweep = app.add_subcommand("sweep", "run every variant of a sweep config");
  add_common(sweep, opt, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ssam::exit_code::usage_error;
  }

  try {
    const ssam::RunConfig cfg = load(opt);
    if (grid->parsed()) return ssam::cmd_landscape_grid(cfg);
    if (crit->parsed()) return ssam::cmd_critical_points(cfg);
    if (run->parsed()) return ssam::cmd_run(cfg);
    if (verify->parsed()) {
      const int code = ssam::cmd_verify(cfg, opt.negative_controls);
      std::cerr << "verify: exit " << code << ", report in " << cfg.output_dir << "/verify_report.json\n";
      return code;
    }
    if (sweep->parsed()) return ssam::cmd_sweep(cfg);
  } catch (const ssam::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return ssam::exit_code::usage_error;
  } catch (const ssam::ContractViolation& e) {
    std::cerr << "invalid request: " << e.what() << '\n';
    return ssam::exit_code::usage_error;
  } catch (const ssam::CapabilityError& e) {
    std::cerr << "unsupported: " << e.what() << '\n';
    return ssam::exit_code::usage_error;
  } catch (const ssam::ConsistencyError& e) {
    std::cerr << "internal consistency error: " << e.what() << '\n';
    return ssam::exit_code::consistency_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ssam::exit_code::runtime_error;
  }
  return ssam::exit_code::usage_error;
}
