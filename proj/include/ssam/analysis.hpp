#ifndef SSAM_ANALYSIS_HPP
#define SSAM_ANALYSIS_HPP

// Verification routines: finite-difference oracles, Monte Carlo agreement of
// the stochastic gradient, balancing-rate fits, descent audits and the
// PAC-Bayes bound terms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "ssam/dataset.hpp"
#include "ssam/dynamics.hpp"
#include "ssam/errors.hpp"
#include "ssam/model.hpp"
#include "ssam/random.hpp"

namespace ssam {

using ScalarField = std::function<double(const NetworkParams&)>;

/// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h in every coordinate.
inline GradientSet finite_diff_gradient(const ScalarField& f, const NetworkParams& params, double h) {
  if (!(h > 0.0)) throw ContractViolation("finite_diff_gradient: h must be positive");
  GradientSet out(params.depth(), params.dim());
  NetworkParams probe = params;
  auto pv = probe.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double saved = pv[i];
    pv[i] = saved + h;
    const double up = f(probe);
    pv[i] = saved - h;
    const double down = f(probe);
    pv[i] = saved;
    ov[i] = (up - down) / (2.0 * h);
  }
  return out;
}

/// max_i |a_i - b_i| / max(1, max_i |b_i|).
template <class TagA, class TagB>
double relative_error(const LayerArray<TagA>& a, const LayerArray<TagB>& b) {
  if (!a.same_shape(b)) throw ContractViolation("relative_error: shape mismatch");
  double diff = 0.0;
  double scale = 1.0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    diff = std::max(diff, std::abs(av[i] - bv[i]));
    scale = std::max(scale, std::abs(bv[i]));
  }
  return diff / scale;
}

// ---------------------------------------------------------------------------
// Monte Carlo gradient agreement

inline constexpr double kDefaultZThreshold = 4.0;

struct GradientAgreementReport {
  std::size_t num_samples = 0;
  std::vector<double> mc_mean;
  std::vector<double> std_error;
  std::vector<double> reference;
  std::vector<double> z;           ///< 0 for zero-variance components that match exactly
  std::size_t exact_components = 0;  ///< zero-variance components
  double max_abs_z = 0.0;
  double threshold = kDefaultZThreshold;
  bool pass = false;
};

/// Mean of noisy_grad_sample over `num_samples` joint (data point, noise)
/// draws compared against `reference` by componentwise z-scores.
inline GradientAgreementReport mc_gradient_agreement(const NetworkParams& params, const ModelSpec& model,
                                                     const WhitenedDataset& ds, const GradientSet& reference,
                                                     std::size_t num_samples, std::uint64_t seed,
                                                     double threshold = kDefaultZThreshold) {
  require_shape(params, model);
  if (!reference.same_shape(params)) throw ContractViolation("mc_gradient_agreement: reference has wrong shape");
  if (num_samples < 2) throw ContractViolation("mc_gradient_agreement: need at least two samples");
  const std::size_t p = params.size();
  std::vector<double> mean(p, 0.0);
  std::vector<double> m2(p, 0.0);
  Rng rng = make_stream(seed, streams::monte_carlo);
  NoiseDraw xi(model.depth(), model.dim());

  for (std::size_t s = 0; s < num_samples; ++s) {
    const DataPoint point = sample_point(ds, rng);
    draw_noise(xi, model, rng);
    const GradientSet g = noisy_grad_sample(params, model, point.x, point.y, xi);
    const auto gv = g.values();
    const double count = static_cast<double>(s + 1);
    for (std::size_t i = 0; i < p; ++i) {
      const double delta = gv[i] - mean[i];
      mean[i] += delta / count;
      m2[i] += delta * (gv[i] - mean[i]);
    }
  }

  GradientAgreementReport report;
  report.num_samples = num_samples;
  report.threshold = threshold;
  report.mc_mean = mean;
  report.reference.assign(reference.values().begin(), reference.values().end());
  report.std_error.resize(p);
  report.z.resize(p);
  const double n = static_cast<double>(num_samples);
  for (std::size_t i = 0; i < p; ++i) {
    const double se = std::sqrt(m2[i] / (n - 1.0) / n);
    const double diff = mean[i] - report.reference[i];
    report.std_error[i] = se;
    if (se == 0.0) {
      ++report.exact_components;
      // Largest finite value keeps the report JSON-representable.
      report.z[i] = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::max(), diff);
    } else {
      report.z[i] = diff / se;
    }
    report.max_abs_z = std::max(report.max_abs_z, std::abs(report.z[i]));
  }
  report.pass = report.max_abs_z <= threshold;
  return report;
}

inline GradientAgreementReport mc_gradient_agreement(const NetworkParams& params, const ModelSpec& model,
                                                     const WhitenedDataset& ds, std::size_t num_samples,
                                                     std::uint64_t seed, double threshold = kDefaultZThreshold) {
  return mc_gradient_agreement(params, model, ds, grad_regularized(params, model), num_samples, seed, threshold);
}

// ---------------------------------------------------------------------------
// Balancing-rate fit

enum class FitAxis {
  time,      ///< x = t (flows)
  bound,     ///< x = log of the certified product bound (descent)
  log_step,  ///< x = log k (harmonic schedules)
};

struct RateFitOptions {
  FitAxis axis = FitAxis::time;
  double discard_fraction = 0.1;
  /// Restrict to recorded steps in [min_step, max_step].
  std::size_t min_step = 0;
  std::size_t max_step = std::numeric_limits<std::size_t>::max();
  /// Skip rows whose gap is at or below this; w_l^2 - w_{l+1}^2 cannot
  /// resolve much under eps * |W|^2.
  double gap_floor = 0.0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Least-squares fit of log(max_l gap_l) against the chosen axis.
inline RateFit balancing_rate_fit(const Trajectory& traj, const RateFitOptions& options = {}) {
  if (traj.size() < 100) throw ContractViolation("balancing_rate_fit: need at least 100 recorded points");
  if (!(traj.max_gap(0) > 0.0)) throw DegenerateFit("balancing_rate_fit: initial balancing gap is zero");

  std::vector<double> xs;
  std::vector<double> ys;
  const auto skip = static_cast<std::size_t>(std::floor(options.discard_fraction * static_cast<double>(traj.size())));
  for (std::size_t i = skip; i < traj.size(); ++i) {
    const std::size_t k = traj.steps[i];
    if (k < options.min_step || k > options.max_step) continue;
    const double gap = traj.max_gap(i);
    if (!(gap > options.gap_floor)) continue;
    double x = 0.0;
    switch (options.axis) {
      case FitAxis::time: x = traj.times[i]; break;
      case FitAxis::bound: x = traj.log_gap_bound[i]; break;
      case FitAxis::log_step:
        if (k == 0) continue;
        x = std::log(static_cast<double>(k));
        break;
    }
    if (!std::isfinite(x)) continue;
    xs.push_back(x);
    ys.push_back(std::log(gap));
  }
  if (xs.size() < 2) throw DegenerateFit("balancing_rate_fit: fewer than two usable points");

  const double m = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw DegenerateFit("balancing_rate_fit: axis values are constant");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  fit.points = xs.size();
  return fit;
}

// ---------------------------------------------------------------------------
// Trajectory audits

inline constexpr double kMonotoneTolerance = 1e-12;

/// Checks gap_l(row) <= exp(log_gap_bound[row]) * gap_l(0) + slack for every
/// recorded row and layer pair, and that L_R never rises by more than
/// kMonotoneTolerance between consecutive rows.
struct GapBoundReport {
  std::size_t rows_checked = 0;
  std::size_t gap_violations = 0;
  double max_gap_excess = -std::numeric_limits<double>::infinity();
  std::size_t monotone_violations = 0;
  double max_increase = -std::numeric_limits<double>::infinity();
  bool pass = false;
};

inline GapBoundReport gap_bound_audit(const Trajectory& traj, double slack) {
  GapBoundReport report;
  if (traj.size() == 0) throw ContractViolation("gap_bound_audit: empty trajectory");
  const auto& g0 = traj.gaps[0];
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (i > 0) {
      const double increase = traj.loss_LR[i] - traj.loss_LR[i - 1];
      report.max_increase = std::max(report.max_increase, increase);
      if (increase > kMonotoneTolerance) ++report.monotone_violations;
    }
    const double lb = traj.log_gap_bound[i];
    if (std::isnan(lb)) continue;
    const double factor = std::exp(lb);
    ++report.rows_checked;
    for (std::size_t l = 0; l < g0.size(); ++l) {
      const double excess = traj.gaps[i][l] - factor * g0[l];
      report.max_gap_excess = std::max(report.max_gap_excess, excess);
      if (excess > slack) ++report.gap_violations;
    }
  }
  if (report.rows_checked == 0) report.max_gap_excess = 0.0;
  if (traj.size() < 2) report.max_increase = 0.0;
  report.pass = report.gap_violations == 0 && report.monotone_violations == 0;
  return report;
}

struct StrongDescentReport {
  double delta = 0.5;
  std::vector<double> margins;
  std::size_t violations = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  bool pass = false;
};

/// Margins L_R(k) - L_R(k+1) - delta alpha_k ||grad L_R(k)||^2 between
/// consecutive recorded steps. Requires a densely recorded descent run.
inline StrongDescentReport strong_descent_audit(const Trajectory& traj, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ContractViolation("strong_descent_audit: delta must lie in (0, 1)");
  StrongDescentReport report;
  report.delta = delta;
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    if (traj.steps[i + 1] != traj.steps[i] + 1) {
      throw ContractViolation("strong_descent_audit: trajectory must record every step");
    }
    const double g = traj.grad_norm[i];
    const double margin = traj.loss_LR[i] - traj.loss_LR[i + 1] - delta * traj.step_size[i] * g * g;
    report.margins.push_back(margin);
    report.min_margin = std::min(report.min_margin, margin);
    if (margin < -kMarginTolerance) ++report.violations;
  }
  if (report.margins.empty()) report.min_margin = 0.0;
  report.pass = report.violations == 0;
  return report;
}

// ---------------------------------------------------------------------------
// PAC-Bayes bound

struct PacStdErrors {
  double noisy_empirical_loss = 0.0;
  double second_moment = 0.0;
};

/// Terms of the PAC-Bayes generalisation bound for the squared loss. The
/// fourth-moment term is an oracle quantity; it is evaluated on the empirical
/// distribution of the dataset.
struct PacBoundReport {
  std::size_t n = 0;
  double delta = 0.05;
  double empirical_loss = 0.0;
  double noisy_empirical_loss = 0.0;     ///< primary value used in bound_rhs
  double noisy_empirical_loss_mc = 0.0;  ///< Monte Carlo estimate, always computed
  bool closed_form_used = false;         ///< true on whitened data (value = L + R)
  double kl_term = 0.0;
  double log_inv_delta = 0.0;
  double second_moment = 0.0;
  std::string second_moment_source = "empirical";
  double bound_rhs = 0.0;
  PacStdErrors mc_std_errors;

  /// (noisy - empirical) + n^{-1/2} (kl + log(1/delta) + second_moment / 2).
  double sharpness_term() const noexcept { return noisy_empirical_loss - empirical_loss; }
  double trailing_term() const noexcept {
    return (kl_term + log_inv_delta + second_moment / 2.0) / std::sqrt(static_cast<double>(n));
  }
  double assemble() const noexcept { return sharpness_term() + trailing_term(); }
};

inline constexpr double kConsistencySigmas = 4.0;

inline PacBoundReport pac_bound(const NetworkParams& params, const ModelSpec& model, const WhitenedDataset& ds,
                                double delta, std::size_t num_mc, std::uint64_t seed) {
  require_shape(params, model);
  if (model.is_unregularized()) throw NotApplicable("pac_bound: the KL term requires eta > 0");
  if (!(delta > 0.0 && delta < 1.0)) throw ContractViolation("pac_bound: delta must lie in (0, 1)");
  if (num_mc < 100) throw ContractViolation("pac_bound: num_mc must be at least 100");
  if (ds.dim() != model.dim()) throw ContractViolation("pac_bound: dataset dimension does not match model");

  PacBoundReport report;
  report.n = ds.size();
  report.delta = delta;
  report.empirical_loss = dataset_loss(params, ds);
  report.kl_term = params.squared_norm() / (2.0 * model.eta() * model.eta());
  report.log_inv_delta = std::log(1.0 / delta);

  // Each draw of xi averages the point losses and their squares over the full
  // dataset, so the estimates are exact in the data and Monte Carlo in xi.
  Rng rng = make_stream(seed, streams::monte_carlo);
  NoiseDraw xi(model.depth(), model.dim());
  std::vector<double> w(model.dim());
  double mean1 = 0.0, m21 = 0.0, mean2 = 0.0, m22 = 0.0;
  for (std::size_t s = 0; s < num_mc; ++s) {
    draw_noise(xi, model, rng);
    for (std::size_t h = 0; h < model.dim(); ++h) {
      double prod = 1.0;
      for (std::size_t l = 0; l < model.depth(); ++l) prod *= params(l, h) + xi(l, h);
      w[h] = prod;
    }
    double loss = 0.0, loss_sq = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto x = ds.row(i);
      double pred = 0.0;
      for (std::size_t h = 0; h < w.size(); ++h) pred += w[h] * x[h];
      const double r = ds.label(i) - pred;
      loss += r * r;
      loss_sq += r * r * r * r;
    }
    loss /= static_cast<double>(ds.size());
    loss_sq /= static_cast<double>(ds.size());
    const double count = static_cast<double>(s + 1);
    const double d1 = loss - mean1;
    mean1 += d1 / count;
    m21 += d1 * (loss - mean1);
    const double d2 = loss_sq - mean2;
    mean2 += d2 / count;
    m22 += d2 * (loss_sq - mean2);
  }
  const double m = static_cast<double>(num_mc);
  report.noisy_empirical_loss_mc = mean1;
  report.mc_std_errors.noisy_empirical_loss = std::sqrt(m21 / (m - 1.0) / m);
  report.second_moment = mean2;
  report.mc_std_errors.second_moment = std::sqrt(m22 / (m - 1.0) / m);

  report.closed_form_used = ds.is_whitened();
  if (report.closed_form_used) {
    const double closed = regularized_loss(params, model);
    const double tol = kConsistencySigmas * report.mc_std_errors.noisy_empirical_loss;
    if (std::abs(closed - report.noisy_empirical_loss_mc) > tol + 1e-12 * std::max(1.0, std::abs(closed))) {
      throw ConsistencyError(fmt::format("pac_bound: Monte Carlo noisy loss {} disagrees with closed form {} (4 sigma = {})",
                                         report.noisy_empirical_loss_mc, closed, tol));
    }
    report.noisy_empirical_loss = closed;
  } else {
    report.noisy_empirical_loss = report.noisy_empirical_loss_mc;
  }
  report.bound_rhs = report.assemble();
  return report;
}

// ---------------------------------------------------------------------------
// JSON

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GradientAgreementReport, num_samples, mc_mean, std_error, reference, z,
                                   exact_components, max_abs_z, threshold, pass)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RateFit, slope, intercept, r_squared, points)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GapBoundReport, rows_checked, gap_violations, max_gap_excess,
                                   monotone_violations, max_increase, pass)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(StrongDescentReport, delta, margins, violations, min_margin, pass)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PacStdErrors, noisy_empirical_loss, second_moment)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PacBoundReport, n, delta, empirical_loss, noisy_empirical_loss,
                                   noisy_empirical_loss_mc, closed_form_used, kl_term, log_inv_delta, second_moment,
                                   second_moment_source, bound_rhs, mc_std_errors)

}  // namespace ssam

#endif  // SSAM_ANALYSIS_HPP
