#ifndef SSAM_COMMANDS_HPP
#define SSAM_COMMANDS_HPP

// Implementations of the `ssam` subcommands. Each takes a parsed RunConfig,
// writes its files below cfg.output_dir and returns a process exit code.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "ssam/analysis.hpp"
#include "ssam/config.hpp"
#include "ssam/dataset.hpp"
#include "ssam/dynamics.hpp"
#include "ssam/landscape.hpp"
#include "ssam/model.hpp"

namespace ssam {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int audit_failure = 1;
inline constexpr int consistency_error = 2;
inline constexpr int usage_error = 3;
inline constexpr int runtime_error = 4;
}  // namespace exit_code

namespace detail {

namespace fs = std::filesystem;
using nlohmann::json;

inline fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// JSON has no infinities; map them to null.
inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json params_json(const NetworkParams& p) { return p.rows(); }

}  // namespace detail

// ---------------------------------------------------------------------------
// landscape-grid

/// loss_L and loss_LR on a w1 x w2 grid, one CSV per eta (d = 1, L = 2 only).
inline int cmd_landscape_grid(const RunConfig& cfg) {
  if (cfg.w_star.size() != 1 || cfg.depth != 2) {
    throw CapabilityError(fmt::format("landscape grid needs d = 1 and L = 2 (got d = {}, L = {})",
                                      cfg.w_star.size(), cfg.depth));
  }
  const GridSpec grid = cfg.grid.value_or(GridSpec{});
  const std::vector<double> etas = grid.etas.empty() ? std::vector<double>{cfg.eta} : grid.etas;
  const auto dir = detail::prepare_dir(cfg.output_dir);
  const std::size_t res = grid.resolution;

  nlohmann::json files = nlohmann::json::array();
  for (double eta : etas) {
    RunConfig panel = cfg;
    panel.eta = eta;
    const ModelSpec model = panel.model();
    std::string csv = "w1,w2,loss_L,loss_LR\n";
    NetworkParams p(2, 1);
    for (std::size_t i = 0; i < res; ++i) {
      const double w1 = grid.w1_range[0] + (grid.w1_range[1] - grid.w1_range[0]) * static_cast<double>(i) /
                                               static_cast<double>(res - 1);
      for (std::size_t j = 0; j < res; ++j) {
        const double w2 = grid.w2_range[0] + (grid.w2_range[1] - grid.w2_range[0]) * static_cast<double>(j) /
                                                 static_cast<double>(res - 1);
        p(0, 0) = w1;
        p(1, 0) = w2;
        csv += fmt::format("{},{},{},{}\n", w1, w2, empirical_loss(p, model), regularized_loss(p, model));
      }
    }
    const std::string name = fmt::format("landscape_eta_{}.csv", eta);
    detail::write_text(dir / name, csv);
    files.push_back({{"eta", eta}, {"file", name}});
  }
  detail::write_json(dir / "landscape.json", {{"schema_version", kSchemaVersion},
                                              {"command", "landscape-grid"},
                                              {"config", config_to_json(cfg)},
                                              {"panels", files}});
  return exit_code::ok;
}

// ---------------------------------------------------------------------------
// critical-points

inline int cmd_critical_points(const RunConfig& cfg) {
  const ModelSpec model = cfg.model();
  const auto points = enumerate_critical_points(model, cfg.critical_points.sign_policy, cfg.critical_points.max_points);
  const auto dir = detail::prepare_dir(cfg.output_dir);

  nlohmann::json coords = nlohmann::json::array();
  for (std::size_t h = 0; h < model.dim(); ++h) {
    const double w = model.w_star()[h];
    nlohmann::json c = {{"coordinate", h + 1},
                        {"w_star", w},
                        {"threshold", shrinkage_threshold(model.eta(), model.depth())},
                        {"above_threshold", above_threshold(w, model.eta(), model.depth())}};
    if (w != 0.0) {
      const ShrinkageSolution sol = shrinkage_roots(w, model.eta(), model.depth(), kSecantTolerance, h);
      c["roots"] = sol.roots;
      c["double_root"] = sol.double_root;
      c["bracket"] = {sol.bracket_lo, sol.bracket_hi};
      c["lambda0"] = sol.lambda0;
    } else {
      c["roots"] = nlohmann::json::array();
    }
    coords.push_back(c);
  }

  nlohmann::json list = nlohmann::json::array();
  std::string csv = "index,loss_LR,residual_grad_norm";
  for (std::size_t h = 1; h <= model.dim(); ++h) csv += fmt::format(",lambda_{}", h);
  for (std::size_t l = 1; l <= model.depth(); ++l) {
    for (std::size_t h = 1; h <= model.dim(); ++h) csv += fmt::format(",w_{}_{}", l, h);
  }
  csv += '\n';
  for (std::size_t i = 0; i < points.size(); ++i) {
    const CriticalPoint& cp = points[i];
    list.push_back({{"index", i},
                    {"params", detail::params_json(cp.params)},
                    {"lambdas", cp.lambdas},
                    {"signs", cp.signs},
                    {"residual_grad_norm", cp.residual_grad_norm},
                    {"loss_LR", cp.loss_value}});
    csv += fmt::format("{},{},{}", i, cp.loss_value, cp.residual_grad_norm);
    for (double lam : cp.lambdas) csv += fmt::format(",{}", lam);
    for (double v : cp.params.values()) csv += fmt::format(",{}", v);
    csv += '\n';
  }
  detail::write_json(dir / "critical_points.json", {{"schema_version", kSchemaVersion},
                                                    {"command", "critical-points"},
                                                    {"config", config_to_json(cfg)},
                                                    {"coordinates", coords},
                                                    {"critical_points", list}});
  detail::write_text(dir / "critical_points.csv", csv);
  return exit_code::ok;
}

// ---------------------------------------------------------------------------
// run

struct RunOutcome {
  Trajectory trajectory;
  nlohmann::json result;
};

/// Executes the configured algorithm without touching the filesystem.
inline RunOutcome execute_run(const RunConfig& cfg) {
  if (!cfg.algorithm) throw ConfigError("algorithm", "required for run");
  const ModelSpec model = cfg.model();
  const NetworkParams init = initial_params(cfg);
  RunOutcome out;
  nlohmann::json& res = out.result;

  switch (*cfg.algorithm) {
    case Algorithm::flow: {
      FlowOptions opt;
      opt.record = cfg.record;
      out.trajectory = gradient_flow(init, model, cfg.t_end, cfg.dt, opt);
      const auto& tr = out.trajectory;
      res["dt_effective"] = cfg.t_end / static_cast<double>(tr.total_steps);
      res["gap_audit"] = gap_bound_audit(tr, 1e-8);
      break;
    }
    case Algorithm::gd: {
      DescentOptions opt;
      opt.record = cfg.record;
      opt.enforce_step_cap = cfg.enforce_step_cap;
      opt.certify_balancing = cfg.certify_balancing;
      DescentRun run = gradient_descent(init, model, cfg.schedule, cfg.steps, cfg.delta, opt);
      const DescentSummary& s = run.summary;
      nlohmann::json descent = {{"delta", s.delta},
                                {"margin_violations", s.margin_violations},
                                {"min_margin", detail::finite_or_null(s.min_margin)},
                                {"coercivity_violations", s.coercivity_violations}};
      descent["step_cap"] = s.step_cap ? detail::finite_or_null(*s.step_cap) : nlohmann::json(nullptr);
      if (s.balancing_caps) {
        descent["balancing_caps"] = {{"inverse_rate", s.balancing_caps->inverse_rate},
                                     {"loss_ratio", s.balancing_caps->loss_ratio},
                                     {"stability", s.balancing_caps->stability}};
      } else {
        descent["balancing_caps"] = nullptr;
      }
      res["strong_descent"] = descent;
      out.trajectory = std::move(run.trajectory);
      if (!model.is_unregularized()) res["gap_audit"] = gap_bound_audit(out.trajectory, 1e-10);
      break;
    }
    case Algorithm::ssam:
    case Algorithm::projected_ssam: {
      const WhitenedDataset ds = generate_whitened(cfg.n, model, cfg.seed);
      StochasticOptions opt;
      opt.record = cfg.record;
      StochasticRun run =
          *cfg.algorithm == Algorithm::ssam
              ? ssam(init, model, ds, cfg.schedule, cfg.steps, cfg.seed, opt)
              : projected_ssam(init, model, ds, cfg.schedule, cfg.steps,
                               cfg.radius.value_or(std::numeric_limits<double>::infinity()), cfg.seed, opt);
      res["dataset_whitening_residual"] = ds.whitening_residual();
      res["projection_count"] = run.trajectory.projection_count;
      res["radius"] = run.radius ? detail::finite_or_null(*run.radius) : nlohmann::json(nullptr);
      res["radius_bound"] = run.radius_bound ? nlohmann::json(*run.radius_bound) : nlohmann::json(nullptr);
      res["radius_below_bound"] = run.radius_below_bound;
      res["tail"] = {{"first_step", run.tail.first_step},
                     {"count", run.tail.count},
                     {"mean_grad_norm", run.tail.mean_grad_norm},
                     {"projections", run.tail.projections}};
      out.trajectory = std::move(run.trajectory);
      break;
    }
  }
  const Trajectory& tr = out.trajectory;
  const std::size_t last = tr.size() - 1;
  res["total_steps"] = tr.total_steps;
  res["recorded_rows"] = tr.size();
  res["final"] = {{"params", detail::params_json(tr.states[last])},
                  {"loss_L", tr.loss_L[last]},
                  {"reg_R", tr.reg_R[last]},
                  {"loss_LR", tr.loss_LR[last]},
                  {"grad_norm", tr.grad_norm[last]},
                  {"gaps", tr.gaps[last]}};
  return out;
}

inline int cmd_run(const RunConfig& cfg) {
  const RunOutcome out = execute_run(cfg);
  const auto dir = detail::prepare_dir(cfg.output_dir);
  {
    std::ofstream csv(dir / "trajectory.csv", std::ios::binary);
    write_trajectory_csv(csv, out.trajectory, cfg.model());
  }
  if (cfg.algorithm == Algorithm::ssam || cfg.algorithm == Algorithm::projected_ssam) {
    std::ofstream csv(dir / "dataset.csv", std::ios::binary);
    write_dataset_csv(csv, generate_whitened(cfg.n, cfg.model(), cfg.seed));
  }
  detail::write_json(dir / "run.json", {{"schema_version", kSchemaVersion},
                                        {"command", "run"},
                                        {"config", config_to_json(cfg)},
                                        {"files", {"trajectory.csv"}},
                                        {"result", out.result}});
  return exit_code::ok;
}

// ---------------------------------------------------------------------------
// verify

struct CheckResult {
  std::string name;
  bool pass = false;
  bool expected_failure = false;
  nlohmann::json details;
};

namespace detail {

inline NetworkParams random_params(std::size_t depth, std::size_t dim, double a, double b, Rng& rng) {
  std::uniform_real_distribution<double> box(a, b);
  NetworkParams p(depth, dim);
  for (double& v : p.values()) v = box(rng);
  return p;
}

inline std::vector<double> random_vector(std::size_t dim, double a, double b, Rng& rng) {
  std::uniform_real_distribution<double> box(a, b);
  std::vector<double> v(dim);
  for (double& x : v) x = box(rng);
  return v;
}

inline CheckResult check_finite_differences(const RunConfig& cfg) {
  Rng rng = make_stream(cfg.seed, "verify.fd");
  double worst = 0.0;
  for (auto [depth, dim] : {std::pair<std::size_t, std::size_t>{2, 1}, {3, 3}, {4, 5}}) {
    const ModelSpec model(random_vector(dim, -2.0, 2.0, rng), depth, 0.5);
    for (std::size_t i = 0; i < cfg.verify.random_points; ++i) {
      const NetworkParams p = random_params(depth, dim, -1.5, 1.5, rng);
      auto fl = [&](const NetworkParams& q) { return empirical_loss(q, model); };
      auto fr = [&](const NetworkParams& q) { return regularizer(q, model); };
      auto flr = [&](const NetworkParams& q) { return regularized_loss(q, model); };
      worst = std::max({worst, relative_error(grad_loss(p, model), finite_diff_gradient(fl, p, 1e-5)),
                        relative_error(grad_reg(p, model), finite_diff_gradient(fr, p, 1e-5)),
                        relative_error(grad_regularized(p, model), finite_diff_gradient(flr, p, 1e-5))});
    }
  }
  return {"gradient_finite_differences", worst <= 1e-6, false, {{"max_relative_error", worst}, {"tolerance", 1e-6}}};
}

inline CheckResult check_regularizer_identity(const RunConfig& cfg) {
  Rng rng = make_stream(cfg.seed, "verify.reg");
  double worst = 0.0;
  for (std::size_t depth = 2; depth <= 5; ++depth) {
    const ModelSpec model(random_vector(3, -2.0, 2.0, rng), depth, 0.7);
    for (std::size_t i = 0; i < cfg.verify.random_points; ++i) {
      const NetworkParams p = random_params(depth, 3, -1.5, 1.5, rng);
      const double a = regularizer(p, model);
      const double b = regularizer_expanded(p, model);
      worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(a)));
    }
  }
  return {"regularizer_identity", worst <= 1e-12, false, {{"max_relative_error", worst}, {"tolerance", 1e-12}}};
}

inline CheckResult check_unbiasedness(const RunConfig& cfg) {
  Rng rng = make_stream(cfg.seed, "verify.mc");
  const ModelSpec model(random_vector(3, -2.0, 2.0, rng), 3, 0.5);
  const NetworkParams p = random_params(3, 3, -1.0, 1.0, rng);
  const WhitenedDataset ds = generate_whitened(50, model, derive_seed(cfg.seed, "verify.mc.data"));
  const auto rep = mc_gradient_agreement(p, model, ds, cfg.verify.mc_samples, derive_seed(cfg.seed, "verify.mc.run"));
  return {"gradient_unbiasedness", rep.pass, false, rep};
}

/// Low-variance setting in which a 1e-2 bias is visible at 10^6 samples.
inline CheckResult control_corrupted_gradient(const RunConfig& cfg) {
  const ModelSpec model({0.3}, 2, 0.1);
  const NetworkParams p = NetworkParams::from_rows({{0.5}, {0.5}});
  const WhitenedDataset ds = generate_whitened(50, model, derive_seed(cfg.seed, "verify.control.data"));
  GradientSet corrupted = grad_regularized(p, model);
  corrupted(0, 0) += 1e-2;
  const auto rep = mc_gradient_agreement(p, model, ds, corrupted, 1000000, derive_seed(cfg.seed, "verify.control.mc"));
  return {"negative_control.corrupted_gradient", rep.pass, true, rep};
}

inline CheckResult check_critical_points() {
  const ModelSpec scalar({3.14159}, 2, 0.5);
  const auto pts = enumerate_critical_points(scalar);
  // For L = 2 the nonzero point is w1 = w2 = sqrt(|w*| - eta^2).
  const double expected = std::sqrt(3.14159 - 0.25);
  bool ok = pts.size() == 2 && std::abs(pts[1].params(0, 0) - expected) < 1e-12 &&
            std::abs(pts[1].params(1, 0) - expected) < 1e-12;
  const ModelSpec deep({3.14159, 0.05, -2.5}, 4, 0.5);
  const auto deep_pts = enumerate_critical_points(deep);
  double worst = 0.0;
  for (const auto& cp : deep_pts) worst = std::max(worst, cp.residual_grad_norm);
  ok = ok && worst <= kStationarityCertification && enumerate_critical_points(ModelSpec({3.14159}, 2, 2.0)).size() == 1;
  return {"critical_points", ok, false,
          {{"fig_point_count", pts.size()}, {"deep_point_count", deep_pts.size()}, {"max_residual", worst}}};
}

inline CheckResult check_flow_balancing() {
  const ModelSpec model({3.14159}, 2, 0.5);
  const NetworkParams init = NetworkParams::from_rows({{2.0}, {0.3}});
  FlowOptions opt;
  opt.record = RecordPolicy::every_step();
  const double dt = std::min(1e-3, flow_dt_guard(init, model));
  const Trajectory tr = gradient_flow(init, model, 10.0, dt, opt);
  const RateFit fit = balancing_rate_fit(tr);
  const GapBoundReport audit = gap_bound_audit(tr, 1e-8);
  const double rel = std::abs(fit.slope + 1.0);
  return {"flow_balancing", rel <= 0.01 && audit.pass, false,
          {{"slope", fit.slope}, {"expected", -1.0}, {"audit", audit}}};
}

inline CheckResult check_strong_descent(const RunConfig& cfg, double cap_multiple, const NetworkParams& init,
                                        std::size_t steps, const std::string& name, bool control) {
  const ModelSpec model({3.14159}, 2, 0.5);
  const double cap = step_size_cap(init, model, 0.5);
  DescentOptions opt;
  opt.record = RecordPolicy::every_step();
  opt.enforce_step_cap = !control;
  const DescentRun run =
      gradient_descent(init, model, StepSchedule::constant(cap_multiple * cap), steps, 0.5, opt);
  const StrongDescentReport audit = strong_descent_audit(run.trajectory, 0.5);
  (void)cfg;
  return {name, audit.pass && run.summary.coercivity_violations == 0, control,
          {{"step_size", cap_multiple * cap},
           {"violations", audit.violations},
           {"min_margin", audit.min_margin},
           {"coercivity_violations", run.summary.coercivity_violations}}};
}

inline CheckResult check_discrete_balancing(const RunConfig& cfg) {
  const ModelSpec model({3.14159}, 2, 0.5);
  const NetworkParams init = NetworkParams::from_rows({{0.8}, {0.2}});
  const double alpha = 0.9 * std::min(balancing_step_caps(init, model).min(), step_size_cap(init, model, 0.5));
  DescentOptions opt;
  opt.certify_balancing = true;
  const DescentRun run = gradient_descent(init, model, StepSchedule::constant(alpha), cfg.verify.descent_steps, 0.5, opt);
  const GapBoundReport audit = gap_bound_audit(run.trajectory, 1e-10);
  return {"discrete_balancing", audit.pass, false, {{"step_size", alpha}, {"audit", audit}}};
}

inline CheckResult check_projected_ssam(const RunConfig& cfg) {
  const ModelSpec model({3.14159}, 2, 0.5);
  const WhitenedDataset ds = generate_whitened(100, model, derive_seed(cfg.seed, "verify.pssam.data"));
  const double radius = minimal_projection_radius(model);
  const NetworkParams init = NetworkParams::from_rows({{0.5}, {0.5}});
  const StochasticRun run = projected_ssam(init, model, ds, StepSchedule::harmonic(0.5), cfg.verify.ssam_steps,
                                           radius, derive_seed(cfg.seed, "verify.pssam.run"));
  double max_norm = 0.0;
  for (const auto& s : run.trajectory.states) max_norm = std::max(max_norm, s.norm());
  const bool ok = max_norm <= radius * (1.0 + 1e-12) && std::isfinite(run.tail.mean_grad_norm);
  return {"projected_ssam_ball", ok, false,
          {{"radius", radius},
           {"max_recorded_norm", max_norm},
           {"tail_mean_grad_norm", run.tail.mean_grad_norm},
           {"tail_projections", run.tail.projections}}};
}

inline CheckResult check_balanced_minimality(const RunConfig& cfg) {
  Rng rng = make_stream(cfg.seed, streams::competitors);
  std::size_t reg = 0, hess = 0;
  for (std::size_t depth : {2, 3, 4}) {
    const ModelSpec model({3.14159, -1.2, 0.4}, depth, 0.5);
    const auto rep = balanced_minimality_check({2.0, -0.7, 0.1}, model, cfg.verify.competitors, rng);
    reg += rep.regularizer_violations;
    hess += rep.hessian_violations;
  }
  return {"balanced_minimality", reg == 0 && hess == 0, false,
          {{"regularizer_violations", reg}, {"hessian_violations", hess}}};
}

inline CheckResult check_pac_bound(const RunConfig& cfg) {
  const ModelSpec model({1.0, -0.5, 2.0}, 2, 0.5);
  const NetworkParams p = NetworkParams::from_rows({{0.8, -0.6, 1.3}, {0.9, 0.7, 1.4}});
  const WhitenedDataset ds = generate_whitened(100, model, derive_seed(cfg.seed, "verify.pac.data"));
  const PacBoundReport rep = pac_bound(p, model, ds, 0.05, 20000, derive_seed(cfg.seed, "verify.pac.mc"));
  return {"pac_bound_identity", rep.bound_rhs == rep.assemble() && rep.closed_form_used, false, rep};
}

}  // namespace detail

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool overall_pass = false;
  int exit_code = exit_code::ok;
  std::string internal_error;
};

/// Runs the invariant suite. With negative controls enabled two audits are
/// fed corrupted inputs and must fail; their failures count as expected.
inline VerifyReport run_verify_suite(const RunConfig& cfg, bool negative_controls) {
  VerifyReport report;
  try {
    report.checks.push_back(detail::check_finite_differences(cfg));
    report.checks.push_back(detail::check_regularizer_identity(cfg));
    report.checks.push_back(detail::check_unbiasedness(cfg));
    report.checks.push_back(detail::check_critical_points());
    report.checks.push_back(detail::check_flow_balancing());
    report.checks.push_back(detail::check_strong_descent(cfg, 0.9, NetworkParams::from_rows({{0.1}, {0.1}}),
                                                         cfg.verify.descent_steps, "strong_descent", false));
    report.checks.push_back(detail::check_discrete_balancing(cfg));
    report.checks.push_back(detail::check_projected_ssam(cfg));
    report.checks.push_back(detail::check_balanced_minimality(cfg));
    report.checks.push_back(detail::check_pac_bound(cfg));
    if (negative_controls) {
      report.checks.push_back(detail::control_corrupted_gradient(cfg));
      report.checks.push_back(detail::check_strong_descent(cfg, 10.0, NetworkParams::from_rows({{1.8}, {1.8}}), 2000,
                                                           "negative_control.oversized_step", true));
    }
  } catch (const ConsistencyError& e) {
    report.internal_error = e.what();
  } catch (const SolverError& e) {
    report.internal_error = e.what();
  }
  if (!report.internal_error.empty()) {
    report.exit_code = exit_code::consistency_error;
    report.overall_pass = false;
    return report;
  }
  bool any_failed = false;
  bool overall = true;
  for (const auto& c : report.checks) {
    any_failed = any_failed || !c.pass;
    overall = overall && (c.expected_failure ? !c.pass : c.pass);
  }
  report.overall_pass = overall;
  report.exit_code = any_failed ? exit_code::audit_failure : exit_code::ok;
  return report;
}

inline nlohmann::json verify_report_json(const RunConfig& cfg, const VerifyReport& rep, bool negative_controls) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : rep.checks) {
    checks.push_back({{"name", c.name},
                      {"pass", c.pass},
                      {"expected_failure", c.expected_failure},
                      {"as_expected", c.expected_failure ? !c.pass : c.pass},
                      {"details", c.details}});
  }
  nlohmann::json j = {{"schema_version", kSchemaVersion},
                      {"command", "verify"},
                      {"config", config_to_json(cfg)},
                      {"negative_controls", negative_controls},
                      {"checks", checks},
                      {"overall_pass", rep.overall_pass},
                      {"exit_code", rep.exit_code}};
  if (!rep.internal_error.empty()) j["internal_error"] = rep.internal_error;
  return j;
}

inline int cmd_verify(const RunConfig& cfg, bool negative_controls) {
  const VerifyReport rep = run_verify_suite(cfg, negative_controls);
  const auto dir = detail::prepare_dir(cfg.output_dir);
  detail::write_json(dir / "verify_report.json", verify_report_json(cfg, rep, negative_controls));
  return rep.exit_code;
}

// ---------------------------------------------------------------------------
// sweep

struct VariantSpec {
  std::string name;
  RunConfig config;
};

/// Applies each variant as a JSON merge patch to the base config. Variants
/// without an explicit seed get derive_seed(base seed, index); outputs go to
/// <output_dir>/<name>.
inline std::vector<VariantSpec> expand_sweep(const RunConfig& base) {
  nlohmann::json base_json = config_to_json(base);
  base_json.erase("sweep");
  std::vector<VariantSpec> out;
  for (std::size_t i = 0; i < base.sweep.variants.size(); ++i) {
    nlohmann::json patch = base.sweep.variants[i];
    std::string name = fmt::format("variant_{:03}", i);
    if (patch.contains("name")) {
      if (!patch.at("name").is_string()) throw ConfigError(fmt::format("sweep.variants[{}].name", i), "expected a string");
      name = patch.at("name").get<std::string>();
      patch.erase("name");
    }
    nlohmann::json merged = base_json;
    merged.merge_patch(patch);
    if (!patch.contains("seed")) merged["seed"] = derive_seed(base.seed, static_cast<std::uint64_t>(i));
    merged["output_dir"] = (std::filesystem::path(base.output_dir) / name).string();
    RunConfig cfg;
    try {
      cfg = parse_config(merged);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("sweep.variants[{}].{}", i, e.field()), e.what());
    }
    if (!cfg.algorithm) throw ConfigError(fmt::format("sweep.variants[{}].algorithm", i), "required for sweep");
    out.push_back({name, cfg});
  }
  return out;
}

inline int cmd_sweep(const RunConfig& base) {
  const std::vector<VariantSpec> variants = expand_sweep(base);
  if (variants.empty()) throw ConfigError("sweep.variants", "sweep needs at least one variant");
  std::vector<std::string> rows(variants.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < variants.size(); i = next++) {
      const VariantSpec& v = variants[i];
      const RunConfig& c = v.config;
      std::string status = "ok";
      std::string tail = ",,,,";
      try {
        cmd_run(c);
        std::ifstream in(std::filesystem::path(c.output_dir) / "run.json");
        const auto j = nlohmann::json::parse(in);
        const auto& fin = j.at("result").at("final");
        double max_gap = 0.0;
        for (double g : fin.at("gaps")) max_gap = std::max(max_gap, g);
        tail = fmt::format(",{},{},{},{}", fin.at("loss_L").get<double>(), fin.at("loss_LR").get<double>(),
                           fin.at("grad_norm").get<double>(), max_gap);
      } catch (const std::exception& e) {
        status = e.what();
        for (char& ch : status) {
          if (ch == ',' || ch == '\n') ch = ';';
        }
      }
      rows[i] = fmt::format("{},{},{},{},{},{},{}{},{}\n", v.name, to_string(*c.algorithm), c.eta,
                            c.schedule.kind == ScheduleKind::constant ? "constant" : "harmonic", c.schedule.alpha0,
                            c.seed, c.steps, tail, status);
    }
  };
  const std::size_t threads = std::min(base.sweep.threads, variants.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const auto dir = detail::prepare_dir(base.output_dir);
  std::string csv = "name,algorithm,eta,schedule,alpha0,seed,steps,final_loss_L,final_loss_LR,final_grad_norm,final_max_gap,status\n";
  bool all_ok = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv += rows[i];
    all_ok = all_ok && rows[i].ends_with(",ok\n");
  }
  detail::write_text(dir / "summary.csv", csv);
  nlohmann::json names = nlohmann::json::array();
  for (const auto& v : variants) names.push_back(v.name);
  detail::write_json(dir / "sweep.json", {{"schema_version", kSchemaVersion},
                                          {"command", "sweep"},
                                          {"config", config_to_json(base)},
                                          {"variants", names},
                                          {"summary", "summary.csv"}});
  return all_ok ? exit_code::ok : exit_code::runtime_error;
}

}  // namespace ssam

#endif  // SSAM_COMMANDS_HPP
