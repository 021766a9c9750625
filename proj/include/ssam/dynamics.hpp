#ifndef SSAM_DYNAMICS_HPP
#define SSAM_DYNAMICS_HPP

// Training dynamics on L_R: the gradient flow (fixed-step RK4), deterministic
// gradient descent, and the stochastic S-SAM recursion with and without
// projection onto a Euclidean ball.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ssam/dataset.hpp"
#include "ssam/errors.hpp"
#include "ssam/model.hpp"
#include "ssam/random.hpp"

namespace ssam {

enum class ScheduleKind { constant, harmonic };

/// alpha_k = alpha0 (constant) or alpha0 / (k + 1) (harmonic).
struct StepSchedule {
  ScheduleKind kind = ScheduleKind::constant;
  double alpha0 = 0.01;

  static StepSchedule constant(double alpha) { return {ScheduleKind::constant, alpha}; }
  static StepSchedule harmonic(double alpha) { return {ScheduleKind::harmonic, alpha}; }

  double at(std::size_t k) const noexcept {
    return kind == ScheduleKind::constant ? alpha0 : alpha0 / static_cast<double>(k + 1);
  }
  double sup() const noexcept { return alpha0; }
  /// Robbins-Monro: sum alpha_k = inf and sum alpha_k^2 < inf.
  bool square_summable() const noexcept { return kind == ScheduleKind::harmonic; }

  void validate() const {
    if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) throw ContractViolation("step size alpha0 must be positive");
  }
  bool operator==(const StepSchedule&) const = default;
};

/// Which steps get a diagnostics row. Every step up to `dense_steps`, then
/// steps ceil(growth^j), plus every multiple of `checkpoint_every` and the
/// final step. `dense_steps = max` records everything.
struct RecordPolicy {
  std::size_t dense_steps = 10000;
  double growth = 1.01;
  std::size_t checkpoint_every = 10000;

  static RecordPolicy every_step() {
    return {std::numeric_limits<std::size_t>::max(), 1.01, 10000};
  }
};

namespace detail {

class RecordClock {
 public:
  explicit RecordClock(RecordPolicy policy) : policy_(policy) {}

  bool should_record(std::size_t k, std::size_t last) {
    if (k <= policy_.dense_steps || k == last) return true;
    if (policy_.checkpoint_every != 0 && k % policy_.checkpoint_every == 0) return true;
    while (static_cast<double>(k) > next_geometric_) advance();
    if (static_cast<double>(k) == next_geometric_) {
      advance();
      return true;
    }
    return false;
  }

 private:
  void advance() {
    ++exponent_;
    next_geometric_ = std::ceil(std::pow(policy_.growth, static_cast<double>(exponent_)));
  }

  RecordPolicy policy_;
  long long exponent_ = 0;
  double next_geometric_ = 1.0;
};

}  // namespace detail

/// Recorded states and diagnostics of one run. Row i describes state
/// `states[i]` reached after `steps[i]` updates (or at continuous time
/// `times[i]` for flows).
struct Trajectory {
  std::vector<std::size_t> steps;
  std::vector<double> times;
  std::vector<NetworkParams> states;
  std::vector<double> loss_L;
  std::vector<double> reg_R;
  std::vector<double> loss_LR;
  std::vector<double> grad_norm;  ///< ||grad L_R|| at the state
  std::vector<std::vector<double>> gaps;
  std::vector<char> projected;
  std::vector<double> step_size;      ///< alpha_k used to leave the state (0 for the last row of a run)
  std::vector<double> log_gap_bound;  ///< log of the certified decay factor for the gap bound

  std::size_t total_steps = 0;
  std::size_t projection_count = 0;

  std::size_t size() const noexcept { return steps.size(); }
  const NetworkParams& final_state() const { return states.back(); }

  double max_gap(std::size_t row) const {
    double m = 0.0;
    for (double g : gaps[row]) m = std::max(m, g);
    return m;
  }
};

namespace detail {

inline void record_row(Trajectory& traj, std::size_t k, double t, const NetworkParams& state, const ModelSpec& model,
                       bool projected, double alpha, double log_bound) {
  traj.steps.push_back(k);
  traj.times.push_back(t);
  traj.states.push_back(state);
  const double l = empirical_loss(state, model);
  const double r = regularizer(state, model);
  traj.loss_L.push_back(l);
  traj.reg_R.push_back(r);
  traj.loss_LR.push_back(l + r);
  traj.grad_norm.push_back(grad_regularized(state, model).norm());
  traj.gaps.push_back(balancing_gaps(state));
  traj.projected.push_back(projected ? 1 : 0);
  traj.step_size.push_back(alpha);
  traj.log_gap_bound.push_back(log_bound);
}

inline double balancing_rate(const ModelSpec& model) {
  return detail::ipow(model.eta() * model.eta(), model.depth() - 1);
}

}  // namespace detail

/// Thrown when an integration or recursion produces a non-finite state.
class TrajectoryError : public DivergenceError {
 public:
  TrajectoryError(const std::string& what, long long step, NetworkParams last_finite)
      : DivergenceError(what, step), last_finite_(std::move(last_finite)) {}
  const NetworkParams& last_finite_state() const noexcept { return last_finite_; }

 private:
  NetworkParams last_finite_;
};

// ---------------------------------------------------------------------------
// Gradient flow

struct FlowOptions {
  RecordPolicy record{};
  /// Reject dt above step_size_cap(params0, model, 0.5) / 10. This guard is a
  /// heuristic for RK4 accuracy, not a stability guarantee.
  bool enforce_dt_guard = true;
};

inline double flow_dt_guard(const NetworkParams& params0, const ModelSpec& model) {
  return step_size_cap(params0, model, 0.5) / 10.0;
}

/// Integrates dW/dt = -grad L_R with classical RK4 on a uniform grid over
/// [0, t_end]; the step is t_end / ceil(t_end / dt) <= dt.
inline Trajectory gradient_flow(const NetworkParams& params0, const ModelSpec& model, double t_end, double dt,
                                const FlowOptions& options = {}) {
  require_shape(params0, model);
  if (!(t_end > 0.0)) throw ContractViolation("gradient_flow: t_end must be positive");
  if (!(dt > 0.0)) throw ContractViolation("gradient_flow: dt must be positive");
  if (options.enforce_dt_guard && !model.is_unregularized()) {
    const double guard = flow_dt_guard(params0, model);
    if (dt > guard) {
      throw ContractViolation(fmt::format("gradient_flow: dt = {} exceeds guard cap/10 = {}", dt, guard));
    }
  }
  const auto num_steps = static_cast<std::size_t>(std::ceil(t_end / dt));
  const double h = t_end / static_cast<double>(num_steps);
  const double rate = model.is_unregularized() ? 0.0 : 4.0 * detail::balancing_rate(model);

  Trajectory traj;
  traj.total_steps = num_steps;
  detail::RecordClock clock(options.record);
  NetworkParams w = params0;
  NetworkParams probe = params0;
  const std::size_t n = w.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n);

  auto field = [&](const NetworkParams& at, std::vector<double>& out) {
    const GradientSet g = grad_regularized(at, model);
    const auto gv = g.values();
    for (std::size_t i = 0; i < n; ++i) out[i] = -gv[i];
  };
  auto stage = [&](const std::vector<double>& k, double scale) {
    auto pv = probe.values();
    const auto wv = std::as_const(w).values();
    for (std::size_t i = 0; i < n; ++i) pv[i] = wv[i] + scale * k[i];
  };

  detail::record_row(traj, 0, 0.0, w, model, false, h, 0.0);
  for (std::size_t k = 0; k < num_steps; ++k) {
    field(w, k1);
    stage(k1, 0.5 * h);
    field(probe, k2);
    stage(k2, 0.5 * h);
    field(probe, k3);
    stage(k3, h);
    field(probe, k4);
    NetworkParams next = w;
    auto nv = next.values();
    for (std::size_t i = 0; i < n; ++i) nv[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
    if (!next.all_finite()) {
      throw TrajectoryError(fmt::format("gradient_flow: non-finite state at step {}", k + 1),
                            static_cast<long long>(k + 1), w);
    }
    w = std::move(next);
    const std::size_t step = k + 1;
    if (clock.should_record(step, num_steps)) {
      const double t = static_cast<double>(step) * h;
      detail::record_row(traj, step, t, w, model, false, step == num_steps ? 0.0 : h, -rate * t);
    }
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Gradient descent

/// The three extra step-size caps needed for the discrete balancing bound.
struct BalancingStepCaps {
  double inverse_rate = 0.0;  ///< eta^{-(2L-2)}
  double loss_ratio = 0.0;    ///< eta^2 / (4 L_R(0))
  double stability = 0.0;     ///< 3 eta^{2L+2} / (16 (1 + ||W*||)) * min{1, L_R(0)^{-2}}
  double min() const noexcept { return std::min({inverse_rate, loss_ratio, stability}); }
};

inline BalancingStepCaps balancing_step_caps(const NetworkParams& params0, const ModelSpec& model) {
  if (model.is_unregularized()) throw NotApplicable("balancing step caps require eta > 0");
  const double eta2 = model.eta() * model.eta();
  const double lr0 = regularized_loss(params0, model);
  BalancingStepCaps caps;
  caps.inverse_rate = 1.0 / detail::balancing_rate(model);
  caps.loss_ratio = eta2 / (4.0 * lr0);
  caps.stability = 3.0 * detail::ipow(eta2, model.depth() + 1) / (16.0 * (1.0 + model.w_star_norm())) *
                   std::min(1.0, 1.0 / (lr0 * lr0));
  return caps;
}

struct DescentOptions {
  RecordPolicy record{};
  /// Reject schedules with sup alpha_k >= step_size_cap(params0, model, delta).
  bool enforce_step_cap = true;
  /// Additionally enforce the balancing caps (the discrete balancing bound then applies).
  bool certify_balancing = false;
};

/// Inline strong-descent and coercivity bookkeeping of a descent run.
struct DescentSummary {
  double delta = 0.5;
  std::optional<double> step_cap;  ///< empty when not applicable (eta = 0)
  std::optional<BalancingStepCaps> balancing_caps;
  std::size_t margin_violations = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  std::size_t coercivity_violations = 0;
};

inline constexpr double kMarginTolerance = 1e-12;

struct DescentRun {
  Trajectory trajectory;
  DescentSummary summary;
};

/// W(k+1) = W(k) - alpha_k grad L_R(W(k)).
///
/// Per step records the strong-descent margin
/// L_R(k) - L_R(k+1) - delta alpha_k ||grad L_R(k)||^2 and checks the parameter
/// norm against eta^{-2(L-1)} L_R(0).
inline DescentRun gradient_descent(const NetworkParams& params0, const ModelSpec& model,
                                   const StepSchedule& schedule, std::size_t num_steps, double delta,
                                   const DescentOptions& options = {}) {
  require_shape(params0, model);
  schedule.validate();
  if (num_steps < 1) throw ContractViolation("gradient_descent: num_steps must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ContractViolation("gradient_descent: delta must lie in (0, 1)");

  DescentRun run;
  DescentSummary& summary = run.summary;
  summary.delta = delta;
  const double lr0 = regularized_loss(params0, model);
  std::optional<double> norm_bound;
  if (!model.is_unregularized()) {
    summary.step_cap = step_size_cap(params0, model, delta);
    summary.balancing_caps = balancing_step_caps(params0, model);
    norm_bound = coercivity_bound(lr0, model);
    if (options.enforce_step_cap && !(schedule.sup() < *summary.step_cap)) {
      throw ContractViolation(
          fmt::format("gradient_descent: sup alpha = {} is not below the strong-descent cap {}", schedule.sup(),
                      *summary.step_cap));
    }
    if (options.certify_balancing && !(schedule.sup() < summary.balancing_caps->min())) {
      throw ContractViolation(fmt::format("gradient_descent: sup alpha = {} is not below the balancing cap {}",
                                          schedule.sup(), summary.balancing_caps->min()));
    }
  } else if (options.certify_balancing) {
    throw NotApplicable("balancing certification requires eta > 0");
  }

  const double rate = model.is_unregularized() ? 0.0 : detail::balancing_rate(model);
  Trajectory& traj = run.trajectory;
  traj.total_steps = num_steps;
  detail::RecordClock clock(options.record);

  NetworkParams w = params0;
  double lr = lr0;
  double log_bound = 0.0;
  detail::record_row(traj, 0, 0.0, w, model, false, schedule.at(0), 0.0);
  for (std::size_t k = 0; k < num_steps; ++k) {
    const double alpha = schedule.at(k);
    const GradientSet g = grad_regularized(w, model);
    const double g2 = g.squared_norm();
    NetworkParams next = w;
    auto nv = next.values();
    const auto gv = g.values();
    for (std::size_t i = 0; i < nv.size(); ++i) nv[i] -= alpha * gv[i];
    if (!next.all_finite()) {
      throw TrajectoryError(fmt::format("gradient_descent: non-finite state at step {}", k + 1),
                            static_cast<long long>(k + 1), w);
    }
    const double lr_next = regularized_loss(next, model);
    const double margin = lr - lr_next - delta * alpha * g2;
    summary.min_margin = std::min(summary.min_margin, margin);
    if (margin < -kMarginTolerance) ++summary.margin_violations;
    if (norm_bound && next.squared_norm() > *norm_bound * (1.0 + 1e-12)) ++summary.coercivity_violations;

    const double factor = 1.0 - alpha * rate;
    log_bound = factor > 0.0 ? log_bound + std::log(factor) : std::numeric_limits<double>::quiet_NaN();
    w = std::move(next);
    lr = lr_next;
    const std::size_t step = k + 1;
    if (clock.should_record(step, num_steps)) {
      detail::record_row(traj, step, static_cast<double>(step), w, model, false,
                         step == num_steps ? 0.0 : schedule.at(step), log_bound);
    }
  }
  return run;
}

// ---------------------------------------------------------------------------
// Stochastic S-SAM

/// max{1, sqrt(L) / (2 eta^{L-1})} * ||W*||.
inline double minimal_projection_radius(const ModelSpec& model) {
  if (model.is_unregularized()) throw NotApplicable("projection radius bound requires eta > 0");
  const double l = static_cast<double>(model.depth());
  const double factor = std::sqrt(l) / (2.0 * detail::ipow(model.eta(), model.depth() - 1));
  return std::max(1.0, factor) * model.w_star_norm();
}

struct StochasticOptions {
  RecordPolicy record{};
  /// Fraction of final steps over which ||grad L_R|| and projection activity are averaged.
  double tail_fraction = 0.1;
  /// Abort once ||W|| exceeds this (or turns non-finite).
  double divergence_norm = 1e12;
};

/// Every-step statistics over the final `tail_fraction` of a stochastic run.
struct TailStatistics {
  std::size_t first_step = 0;  ///< first state index included
  std::size_t count = 0;
  double mean_grad_norm = 0.0;
  std::size_t projections = 0;
};

struct StochasticRun {
  Trajectory trajectory;
  TailStatistics tail;
  std::optional<double> radius;          ///< empty for unprojected runs
  std::optional<double> radius_bound;    ///< certified minimal radius, empty when not applicable
  bool radius_below_bound = false;
};

namespace detail {

inline StochasticRun run_ssam(const NetworkParams& params0, const ModelSpec& model, const WhitenedDataset& ds,
                              const StepSchedule& schedule, std::size_t num_steps, std::uint64_t seed,
                              std::optional<double> radius, const StochasticOptions& options) {
  require_shape(params0, model);
  schedule.validate();
  if (num_steps < 1) throw ContractViolation("ssam: num_steps must be >= 1");
  if (ds.dim() != model.dim()) throw ContractViolation("ssam: dataset dimension does not match model");
  if (!(options.tail_fraction >= 0.0 && options.tail_fraction <= 1.0)) {
    throw ContractViolation("ssam: tail_fraction must lie in [0, 1]");
  }

  StochasticRun run;
  run.radius = radius;
  if (radius) {
    if (!(*radius > 0.0)) throw ContractViolation("projected_ssam: radius must be positive");
    if (!model.is_unregularized()) {
      run.radius_bound = minimal_projection_radius(model);
      run.radius_below_bound = *radius < *run.radius_bound;
    }
  }

  Rng sample_rng = make_stream(seed, streams::sample);
  Rng noise_rng = make_stream(seed, streams::noise);
  NoiseDraw xi(model.depth(), model.dim());
  Trajectory& traj = run.trajectory;
  traj.total_steps = num_steps;
  RecordClock clock(options.record);

  const auto tail_count = static_cast<std::size_t>(std::ceil(options.tail_fraction * static_cast<double>(num_steps)));
  run.tail.first_step = num_steps - tail_count + 1;
  double tail_sum = 0.0;

  NetworkParams w = params0;
  if (radius) {
    const double norm = w.norm();
    if (norm > *radius) {
      const double scale = *radius / norm;
      for (double& v : w.values()) v *= scale;
    }
  }
  detail::record_row(traj, 0, 0.0, w, model, false, schedule.at(0), 0.0);
  for (std::size_t k = 0; k < num_steps; ++k) {
    const double alpha = schedule.at(k);
    const DataPoint point = sample_point(ds, sample_rng);
    draw_noise(xi, model, noise_rng);
    const GradientSet g = noisy_grad_sample(w, model, point.x, point.y, xi);
    NetworkParams next = w;
    auto nv = next.values();
    const auto gv = g.values();
    for (std::size_t i = 0; i < nv.size(); ++i) nv[i] -= alpha * gv[i];

    bool projected = false;
    double norm = next.norm();
    if (radius && norm > *radius) {
      const double scale = *radius / norm;
      for (double& v : nv) v *= scale;
      projected = true;
      ++traj.projection_count;
      norm = next.norm();
    }
    if (!next.all_finite() || !(norm <= options.divergence_norm)) {
      throw TrajectoryError(fmt::format("ssam: iterate diverged at step {} (||W|| = {})", k + 1, norm),
                            static_cast<long long>(k + 1), w);
    }
    w = std::move(next);
    const std::size_t step = k + 1;
    if (step >= run.tail.first_step) {
      tail_sum += grad_regularized(w, model).norm();
      ++run.tail.count;
      if (projected) ++run.tail.projections;
    }
    if (clock.should_record(step, num_steps)) {
      detail::record_row(traj, step, static_cast<double>(step), w, model, projected,
                         step == num_steps ? 0.0 : schedule.at(step), 0.0);
    }
  }
  run.tail.mean_grad_norm = run.tail.count ? tail_sum / static_cast<double>(run.tail.count) : 0.0;
  return run;
}

}  // namespace detail

/// S-SAM with batch size one: draw (x_k, y_k) uniformly, xi_k ~ N(0, eta^2 I),
/// step along -alpha_k times the perturbed single-sample gradient.
inline StochasticRun ssam(const NetworkParams& params0, const ModelSpec& model, const WhitenedDataset& ds,
                          const StepSchedule& schedule, std::size_t num_steps, std::uint64_t seed,
                          const StochasticOptions& options = {}) {
  return detail::run_ssam(params0, model, ds, schedule, num_steps, seed, std::nullopt, options);
}

/// S-SAM followed by projection onto the ball of radius `radius` in R^{Ld}.
/// Requires a harmonic (Robbins-Monro) schedule. A radius below the certified
/// bound is accepted and flagged in the result. Pass +infinity for no projection.
inline StochasticRun projected_ssam(const NetworkParams& params0, const ModelSpec& model, const WhitenedDataset& ds,
                                    const StepSchedule& schedule, std::size_t num_steps, double radius,
                                    std::uint64_t seed, const StochasticOptions& options = {}) {
  if (!schedule.square_summable()) {
    throw ContractViolation("projected_ssam requires a harmonic (square-summable) step schedule");
  }
  return detail::run_ssam(params0, model, ds, schedule, num_steps, seed, radius, options);
}

// ---------------------------------------------------------------------------
// Export

inline constexpr std::size_t kMaxWeightColumns = 64;

/// CSV: step,time,loss_L,reg_R,loss_LR,grad_norm,gap_1..gap_{L-1},projected,w_{l,h}...
/// Weight columns are omitted when L*d exceeds `max_weight_columns`.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const ModelSpec& model,
                                 std::size_t max_weight_columns = kMaxWeightColumns) {
  const std::size_t depth = model.depth();
  const std::size_t dim = model.dim();
  const bool weights = depth * dim <= max_weight_columns;
  out << "step,time,loss_L,reg_R,loss_LR,grad_norm";
  for (std::size_t l = 1; l < depth; ++l) out << ",gap_" << l;
  out << ",projected";
  if (weights) {
    for (std::size_t l = 1; l <= depth; ++l) {
      for (std::size_t h = 1; h <= dim; ++h) out << ",w_" << l << '_' << h;
    }
  }
  out << '\n';
  for (std::size_t i = 0; i < traj.size(); ++i) {
    out << traj.steps[i] << ',' << fmt::format("{},{},{},{},{}", traj.times[i], traj.loss_L[i], traj.reg_R[i],
                                               traj.loss_LR[i], traj.grad_norm[i]);
    for (double g : traj.gaps[i]) out << ',' << fmt::format("{}", g);
    out << ',' << static_cast<int>(traj.projected[i]);
    if (weights) {
      for (double v : traj.states[i].values()) out << ',' << fmt::format("{}", v);
    }
    out << '\n';
  }
}

}  // namespace ssam

#endif  // SSAM_DYNAMICS_HPP
