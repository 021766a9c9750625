#ifndef SSAM_LANDSCAPE_HPP
#define SSAM_LANDSCAPE_HPP

// Critical points of L_R = L + R for the diagonal network.
//
// Every critical point is balanced (W_l^2 = W_m^2) and has the per-coordinate
// form W_lh = s_lh * lambda_h * |w*_h|^{1/L}, where either all signs vanish or
// their product equals sign(w*_h). A nonzero shrinkage factor lambda solves
//
//   r(lambda) = lambda^{1/(L-1) - 1} (lambda^2 + c) = 1,   c = eta^2 / |w*_h|^{2/L},
//
// whose left side is strictly convex on (0, inf) with its minimum at
// lambda0 = sqrt(1 - 2/L) eta / |w*_h|^{1/L}. Hence there are at most two
// roots, one on each side of lambda0, and they are found with a
// fixed-endpoint secant iteration anchored at the bracket ends
// [c^{(L-1)/(L-2)}, sqrt(1 - c)]. For L = 2 the root is sqrt(1 - eta^2/|w*_h|).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ssam/errors.hpp"
#include "ssam/model.hpp"
#include "ssam/random.hpp"

namespace ssam {

inline constexpr double kSecantTolerance = 1e-12;
inline constexpr double kRootCertification = 1e-10;
inline constexpr double kStationarityCertification = 1e-8;
inline constexpr std::size_t kSecantMaxIterations = 10000;
inline constexpr std::size_t kMaxEnumeratedPoints = 1000000;

/// Right-hand side of the threshold test: eta^2 for L = 2, otherwise
/// ((L-2)/L)^{L/2} (1 + L/(L-2))^{L-1} eta^L.
inline double shrinkage_threshold(double eta, std::size_t depth) {
  if (!(eta > 0.0)) throw ContractViolation("threshold requires eta > 0");
  if (depth < 2) throw ContractViolation("threshold requires L >= 2");
  if (depth == 2) return eta * eta;
  const double l = static_cast<double>(depth);
  return std::pow((l - 2.0) / l, l / 2.0) * std::pow(1.0 + l / (l - 2.0), l - 1.0) * std::pow(eta, l);
}

/// True iff a coordinate with target w_star_h admits nonzero critical weights.
inline bool above_threshold(double w_star_h, double eta, std::size_t depth) {
  return std::abs(w_star_h) >= shrinkage_threshold(eta, depth);
}

/// r(lambda) = lambda^{1/(L-1) - 1} (lambda^2 + c) for lambda > 0.
inline double shrinkage_ratio(double lambda, double c, std::size_t depth) {
  const double exponent = 1.0 / static_cast<double>(depth - 1) - 1.0;
  return std::pow(lambda, exponent) * (lambda * lambda + c);
}

struct SecantResult {
  double root = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> iterates;  ///< start point first, then every update
};

/// Fixed-endpoint secant iteration x <- a - (a - x) psi(a) / (psi(a) - psi(x)).
///
/// Converges monotonically from `start` to the unique root between `start`
/// and `anchor` when psi is strictly convex and monotone there with
/// psi(start) < 0 < psi(anchor) (in the orientation where psi increases
/// towards the anchor). Stops once successive iterates differ by less than
/// `tol` and |psi| <= `certify`.
template <class Psi>
SecantResult fixed_endpoint_secant(Psi&& psi, double anchor, double start, double tol = kSecantTolerance,
                                   double certify = kRootCertification,
                                   std::size_t max_iter = kSecantMaxIterations) {
  SecantResult out;
  const double psi_anchor = psi(anchor);
  double x = start;
  double psi_x = psi(x);
  out.iterates.push_back(x);
  for (std::size_t k = 0; k < max_iter; ++k) {
    const double denom = psi_anchor - psi_x;
    if (denom == 0.0) break;
    const double next = anchor - (anchor - x) * psi_anchor / denom;
    const double step = std::abs(next - x);
    x = next;
    psi_x = psi(x);
    out.iterates.push_back(x);
    out.iterations = k + 1;
    if (step < tol && std::abs(psi_x) <= certify) {
      out.converged = true;
      break;
    }
  }
  out.root = x;
  if (!out.converged && std::abs(psi_x) <= certify && out.iterations < max_iter) out.converged = true;
  return out;
}

struct ShrinkageSolution {
  std::size_t coordinate = 0;
  std::vector<double> roots;  ///< ascending, 0, 1 or 2 values in (0, 1)
  bool above_threshold = false;
  bool double_root = false;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  double lambda0 = 0.0;  ///< minimiser of r
  std::size_t iterations = 0;
};

/// Positive shrinkage factors for one coordinate.
inline ShrinkageSolution shrinkage_roots(double w_star_h, double eta, std::size_t depth,
                                         double tol = kSecantTolerance, std::size_t coordinate = 0) {
  if (!(std::abs(w_star_h) > 0.0)) throw ContractViolation("shrinkage_roots requires w_star_h != 0");
  if (!(eta > 0.0)) throw ContractViolation("shrinkage_roots requires eta > 0");
  if (depth < 2) throw ContractViolation("shrinkage_roots requires L >= 2");

  const double abs_w = std::abs(w_star_h);
  const double l = static_cast<double>(depth);
  const double c = eta * eta / std::pow(abs_w, 2.0 / l);

  ShrinkageSolution sol;
  sol.coordinate = coordinate;
  sol.above_threshold = above_threshold(w_star_h, eta, depth);
  sol.lambda0 = std::sqrt(1.0 - 2.0 / l) * eta / std::pow(abs_w, 1.0 / l);

  if (depth == 2) {
    sol.bracket_lo = 0.0;
    sol.bracket_hi = c < 1.0 ? std::sqrt(1.0 - c) : 0.0;
    if (c < 1.0) sol.roots.push_back(std::sqrt(1.0 - c));
    return sol;
  }

  sol.bracket_lo = std::pow(c, (l - 1.0) / (l - 2.0));
  sol.bracket_hi = c < 1.0 ? std::sqrt(1.0 - c) : 0.0;

  auto psi = [&](double lambda) { return shrinkage_ratio(lambda, c, depth) - 1.0; };
  const double at_min = psi(sol.lambda0);
  if (std::abs(at_min) <= tol) {
    sol.double_root = true;
    sol.roots.push_back(sol.lambda0);
    return sol;
  }
  if (at_min > 0.0 || c >= 1.0) return sol;

  auto solve_side = [&](double anchor) -> double {
    if (std::abs(psi(anchor)) <= tol) return anchor;
    SecantResult res = fixed_endpoint_secant(psi, anchor, sol.lambda0, tol);
    sol.iterations += res.iterations;
    if (!res.converged) {
      throw SolverError(fmt::format(
          "secant iteration did not converge: w*={} eta={} L={} anchor={} last={} |r-1|={} after {} iterations",
          w_star_h, eta, depth, anchor, res.root, std::abs(psi(res.root)), res.iterations));
    }
    return res.root;
  };
  const double lower = solve_side(sol.bracket_lo);
  const double upper = solve_side(sol.bracket_hi);
  for (double root : {lower, upper}) {
    if (std::abs(psi(root)) > kRootCertification) {
      throw SolverError(fmt::format("root {} failed certification |r-1| = {}", root, std::abs(psi(root))));
    }
  }
  sol.roots = {lower, upper};
  return sol;
}

enum class SignPolicy { canonical, all };

struct CriticalPoint {
  NetworkParams params;
  std::vector<double> lambdas;
  std::vector<std::vector<int>> signs;  ///< L x d, entries in {-1, 0, 1}
  double residual_grad_norm = 0.0;
  double loss_value = 0.0;
};

/// Builds W_lh = s_lh * lambda_h * |w*_h|^{1/L}.
inline NetworkParams assemble_critical_params(const std::vector<double>& lambdas,
                                              const std::vector<std::vector<int>>& signs,
                                              const ModelSpec& model) {
  const std::size_t depth = model.depth();
  NetworkParams p(depth, model.dim());
  for (std::size_t h = 0; h < model.dim(); ++h) {
    const double magnitude = lambdas[h] * std::pow(std::abs(model.w_star()[h]), 1.0 / static_cast<double>(depth));
    for (std::size_t l = 0; l < depth; ++l) p(l, h) = static_cast<double>(signs[l][h]) * magnitude;
  }
  return p;
}

/// sum_h [ (1 - 2 lambda_h^L) |w*_h|^2 + ((lambda_h |w*_h|^{1/L})^2 + eta^2)^L ].
inline double critical_loss(const std::vector<double>& lambdas, const ModelSpec& model) {
  if (lambdas.size() != model.dim()) throw ContractViolation("critical_loss: need one lambda per coordinate");
  const std::size_t depth = model.depth();
  const double l = static_cast<double>(depth);
  const double eta2 = model.eta() * model.eta();
  double total = 0.0;
  for (std::size_t h = 0; h < model.dim(); ++h) {
    const double lambda = lambdas[h];
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ContractViolation("critical_loss: lambdas must lie in [0, 1]");
    const double abs_w = std::abs(model.w_star()[h]);
    const double z = lambda * std::pow(abs_w, 1.0 / l);
    total += (1.0 - 2.0 * detail::ipow(lambda, depth)) * abs_w * abs_w + detail::ipow(z * z + eta2, depth);
  }
  return total;
}

namespace detail {

struct CoordinateOption {
  double lambda = 0.0;
  std::vector<int> signs;  ///< length L
};

inline std::vector<CoordinateOption> coordinate_options(const ModelSpec& model, std::size_t h, SignPolicy policy) {
  const std::size_t depth = model.depth();
  std::vector<CoordinateOption> opts;
  opts.push_back({0.0, std::vector<int>(depth, 0)});
  const double w = model.w_star()[h];
  if (w == 0.0) return opts;
  const int target = w > 0.0 ? 1 : -1;
  const ShrinkageSolution sol = shrinkage_roots(w, model.eta(), depth, kSecantTolerance, h);
  for (double lambda : sol.roots) {
    if (policy == SignPolicy::canonical) {
      std::vector<int> s(depth, 1);
      s[0] = target;
      opts.push_back({lambda, std::move(s)});
    } else {
      const std::size_t free_patterns = std::size_t{1} << (depth - 1);
      for (std::size_t mask = 0; mask < free_patterns; ++mask) {
        std::vector<int> s(depth, 1);
        int prod = 1;
        for (std::size_t l = 0; l + 1 < depth; ++l) {
          s[l] = (mask >> l) & 1U ? -1 : 1;
          prod *= s[l];
        }
        s[depth - 1] = prod * target;
        opts.push_back({lambda, std::move(s)});
      }
    }
  }
  return opts;
}

}  // namespace detail

/// All critical points of L_R (one per sign-gauge orbit in canonical mode),
/// each certified with ||grad L_R|| <= 1e-8.
inline std::vector<CriticalPoint> enumerate_critical_points(const ModelSpec& model,
                                                            SignPolicy policy = SignPolicy::canonical,
                                                            std::size_t max_points = kMaxEnumeratedPoints) {
  if (model.is_unregularized()) {
    throw NotApplicable("the unregularised loss has a continuum of critical points");
  }
  const std::size_t depth = model.depth();
  const std::size_t dim = model.dim();
  if (policy == SignPolicy::all && depth - 1 >= 63) throw CapabilityError("sign enumeration too large");

  std::vector<std::vector<detail::CoordinateOption>> options(dim);
  double count = 1.0;
  for (std::size_t h = 0; h < dim; ++h) {
    options[h] = detail::coordinate_options(model, h, policy);
    count *= static_cast<double>(options[h].size());
    if (count > static_cast<double>(max_points)) {
      throw CapabilityError(fmt::format("critical point enumeration exceeds cap of {} points", max_points));
    }
  }

  std::vector<CriticalPoint> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<std::size_t> digit(dim, 0);
  for (;;) {
    CriticalPoint cp;
    cp.lambdas.resize(dim);
    cp.signs.assign(depth, std::vector<int>(dim, 0));
    for (std::size_t h = 0; h < dim; ++h) {
      const auto& opt = options[h][digit[h]];
      cp.lambdas[h] = opt.lambda;
      for (std::size_t l = 0; l < depth; ++l) cp.signs[l][h] = opt.signs[l];
    }
    cp.params = assemble_critical_params(cp.lambdas, cp.signs, model);
    cp.residual_grad_norm = grad_regularized(cp.params, model).norm();
    cp.loss_value = regularized_loss(cp.params, model);
    if (!(cp.residual_grad_norm <= kStationarityCertification)) {
      throw SolverError(fmt::format("assembled critical point failed stationarity: ||grad|| = {}",
                                    cp.residual_grad_norm));
    }
    out.push_back(std::move(cp));

    std::size_t pos = dim;
    while (pos > 0) {
      --pos;
      if (++digit[pos] < options[pos].size()) break;
      digit[pos] = 0;
      if (pos == 0) return out;
    }
    if (dim == 0) return out;
  }
}

/// Balanced factorisation of a diagonal product: |w_h|^{1/L} on every layer,
/// sign carried by the first layer.
inline NetworkParams balanced_factorization(const std::vector<double>& product_w, std::size_t depth) {
  NetworkParams p(depth, product_w.size());
  for (std::size_t h = 0; h < product_w.size(); ++h) {
    const double root = std::pow(std::abs(product_w[h]), 1.0 / static_cast<double>(depth));
    for (std::size_t l = 0; l < depth; ++l) p(l, h) = root;
    if (product_w[h] < 0.0) p(0, h) = -root;
  }
  return p;
}

struct BalancedMinimalityReport {
  std::size_t trials = 0;
  std::size_t regularizer_violations = 0;
  std::size_t hessian_violations = 0;
  double balanced_regularizer = 0.0;
  double balanced_hessian_trace = 0.0;
  double min_regularizer_margin = std::numeric_limits<double>::infinity();
  double min_hessian_margin = std::numeric_limits<double>::infinity();
  bool passed() const noexcept { return regularizer_violations == 0 && hessian_violations == 0; }
};

/// Compares R (= average sharpness) and Tr(Hess L) of the balanced
/// factorisation of product_w against `trials` random factorisations of the
/// same product, obtained by per-layer log-scalings summing to zero per
/// coordinate. `log_spread` is the standard deviation of each log-scaling.
inline BalancedMinimalityReport balanced_minimality_check(const std::vector<double>& product_w,
                                                          const ModelSpec& model, std::size_t trials, Rng& rng,
                                                          double log_spread = 1.0) {
  if (trials < 1) throw ContractViolation("balanced_minimality_check needs trials >= 1");
  if (product_w.size() != model.dim()) throw ContractViolation("product_w must have length d");
  const std::size_t depth = model.depth();
  const NetworkParams balanced = balanced_factorization(product_w, depth);

  BalancedMinimalityReport rep;
  rep.trials = trials;
  rep.balanced_regularizer = regularizer(balanced, model);
  rep.balanced_hessian_trace = hessian_trace_loss(balanced, model);
  const double reg_tol = 1e-12 * std::max(1.0, std::abs(rep.balanced_regularizer));
  const double hess_tol = 1e-12 * std::max(1.0, std::abs(rep.balanced_hessian_trace));

  std::normal_distribution<double> normal(0.0, log_spread);
  NetworkParams competitor(depth, model.dim());
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t h = 0; h < model.dim(); ++h) {
      double total = 0.0;
      for (std::size_t l = 0; l + 1 < depth; ++l) {
        const double u = normal(rng);
        total += u;
        competitor(l, h) = balanced(l, h) * std::exp(u);
      }
      competitor(depth - 1, h) = balanced(depth - 1, h) * std::exp(-total);
    }
    const double reg_margin = regularizer(competitor, model) - rep.balanced_regularizer;
    const double hess_margin = hessian_trace_loss(competitor, model) - rep.balanced_hessian_trace;
    rep.min_regularizer_margin = std::min(rep.min_regularizer_margin, reg_margin);
    rep.min_hessian_margin = std::min(rep.min_hessian_margin, hess_margin);
    if (reg_margin < -reg_tol) ++rep.regularizer_violations;
    if (hess_margin < -hess_tol) ++rep.hessian_violations;
  }
  return rep;
}

}  // namespace ssam

#endif  // SSAM_LANDSCAPE_HPP
