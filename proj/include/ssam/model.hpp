#ifndef SSAM_MODEL_HPP
#define SSAM_MODEL_HPP

// Diagonal linear network W_L ... W_1 fitted to a diagonal target W*.
//
// On whitened data the empirical loss collapses to ||W* - W_L...W_1||^2 and
// averaging over isotropic N(0, eta^2) parameter noise adds the regulariser
//
//   R(W) = Tr( prod_l (W_l^2 + eta^2 I) - prod_l W_l^2 ),
//
// so every quantity below is a sum of per-coordinate closed forms. Products
// over layers are always accumulated left to right (layer 1 first) so equal
// inputs give bit-identical outputs.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ssam/errors.hpp"
#include "ssam/random.hpp"

namespace ssam {

/// Dense L x d array of diagonal entries; entry (l, h) is the h-th diagonal
/// element of layer l. The tag keeps parameters, gradients and noise draws
/// from being mixed up.
template <class Tag>
class LayerArray {
 public:
  LayerArray() = default;
  LayerArray(std::size_t depth, std::size_t dim, double fill = 0.0)
      : depth_(depth), dim_(dim), data_(depth * dim, fill) {}

  static LayerArray from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.front().empty()) {
      throw ContractViolation("layer array needs at least one layer and one coordinate");
    }
    LayerArray out(rows.size(), rows.front().size());
    for (std::size_t l = 0; l < rows.size(); ++l) {
      if (rows[l].size() != out.dim_) {
        throw ContractViolation("ragged layer array: layer " + std::to_string(l + 1));
      }
      for (std::size_t h = 0; h < out.dim_; ++h) {
        if (!std::isfinite(rows[l][h])) {
          throw ContractViolation("non-finite entry in layer array");
        }
        out(l, h) = rows[l][h];
      }
    }
    return out;
  }

  std::size_t depth() const noexcept { return depth_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t layer, std::size_t coord) { return data_[layer * dim_ + coord]; }
  double operator()(std::size_t layer, std::size_t coord) const { return data_[layer * dim_ + coord]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::span<const double> layer(std::size_t l) const { return {data_.data() + l * dim_, dim_}; }

  std::vector<std::vector<double>> rows() const {
    std::vector<std::vector<double>> out(depth_);
    for (std::size_t l = 0; l < depth_; ++l) out[l].assign(layer(l).begin(), layer(l).end());
    return out;
  }

  /// Squared Euclidean norm as a vector in R^{L d}.
  double squared_norm() const noexcept {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return s;
  }
  double norm() const noexcept { return std::sqrt(squared_norm()); }

  bool all_finite() const noexcept {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool same_shape(std::size_t depth, std::size_t dim) const noexcept {
    return depth_ == depth && dim_ == dim;
  }

  template <class OtherTag>
  bool same_shape(const LayerArray<OtherTag>& other) const noexcept {
    return depth_ == other.depth() && dim_ == other.dim();
  }

  bool operator==(const LayerArray&) const = default;

 private:
  std::size_t depth_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

struct ParamsTag {};
struct GradientTag {};
struct NoiseTag {};

using NetworkParams = LayerArray<ParamsTag>;
using GradientSet = LayerArray<GradientTag>;
using NoiseDraw = LayerArray<NoiseTag>;

/// Problem definition: target diagonal w*, depth L >= 2, noise level eta.
class ModelSpec {
 public:
  ModelSpec(std::vector<double> w_star, std::size_t depth, double eta)
      : w_star_(std::move(w_star)), depth_(depth), eta_(eta) {
    validate();
    if (!(eta_ > 0.0) || !std::isfinite(eta_)) {
      throw ContractViolation("eta must be positive; use ModelSpec::unregularized for eta = 0");
    }
  }

  /// eta = 0 baseline: plain factorisation loss, no parameter noise. Every
  /// certified cap or radius reports NotApplicable for such a model.
  static ModelSpec unregularized(std::vector<double> w_star, std::size_t depth) {
    return ModelSpec(std::move(w_star), depth);
  }

  const std::vector<double>& w_star() const noexcept { return w_star_; }
  std::size_t depth() const noexcept { return depth_; }
  std::size_t dim() const noexcept { return w_star_.size(); }
  double eta() const noexcept { return eta_; }
  bool is_unregularized() const noexcept { return eta_ == 0.0; }

  double w_star_norm() const noexcept {
    double s = 0.0;
    for (double w : w_star_) s += w * w;
    return std::sqrt(s);
  }

  NetworkParams zero_params() const { return NetworkParams(depth_, dim()); }

  bool operator==(const ModelSpec&) const = default;

 private:
  ModelSpec(std::vector<double> w_star, std::size_t depth) : w_star_(std::move(w_star)), depth_(depth), eta_(0.0) {
    validate();
  }

  void validate() const {
    if (depth_ < 2) throw ContractViolation("depth L must be at least 2");
    if (w_star_.empty()) throw ContractViolation("dimension d must be at least 1");
    for (double w : w_star_) {
      if (!std::isfinite(w)) throw ContractViolation("w_star entries must be finite");
    }
  }

  std::vector<double> w_star_;
  std::size_t depth_;
  double eta_;
};

template <class Tag>
void require_shape(const LayerArray<Tag>& a, const ModelSpec& model) {
  if (!a.same_shape(model.depth(), model.dim())) {
    throw ContractViolation("shape mismatch: expected " + std::to_string(model.depth()) + "x" +
                            std::to_string(model.dim()) + ", got " + std::to_string(a.depth()) + "x" +
                            std::to_string(a.dim()));
  }
}

namespace detail {

inline double product_of_layers(const NetworkParams& p, std::size_t h) {
  double prod = 1.0;
  for (std::size_t l = 0; l < p.depth(); ++l) prod *= p(l, h);
  return prod;
}

inline double product_except(const NetworkParams& p, std::size_t h, std::size_t skip) {
  double prod = 1.0;
  for (std::size_t l = 0; l < p.depth(); ++l) {
    if (l != skip) prod *= p(l, h);
  }
  return prod;
}

inline double ipow(double base, std::size_t exponent) {
  double out = 1.0;
  for (std::size_t i = 0; i < exponent; ++i) out *= base;
  return out;
}

}  // namespace detail

/// ||W* - W_L...W_1||^2, the empirical loss on whitened data.
inline double empirical_loss(const NetworkParams& params, const ModelSpec& model) {
  require_shape(params, model);
  double loss = 0.0;
  for (std::size_t h = 0; h < model.dim(); ++h) {
    const double r = model.w_star()[h] - detail::product_of_layers(params, h);
    loss += r * r;
  }
  return loss;
}

/// Product form of R, evaluated per coordinate and summed.
inline double regularizer(const NetworkParams& params, const ModelSpec& model) {
  require_shape(params, model);
  const double eta2 = model.eta() * model.eta();
  double total = 0.0;
  for (std::size_t h = 0; h < model.dim(); ++h) {
    double shifted = 1.0;
    double plain = 1.0;
    for (std::size_t l = 0; l < model.depth(); ++l) {
      const double w2 = params(l, h) * params(l, h);
      shifted *= w2 + eta2;
      plain *= w2;
    }
    total += shifted - plain;
  }
  return total;
}

inline constexpr std::size_t kMaxExpandedDepth = 20;

/// R as the sum over proper layer subsets I of eta^{2(L-#I)} ||prod_{m in I} W_m||^2.
inline double regularizer_expanded(const NetworkParams& params, const ModelSpec& model) {
  require_shape(params, model);
  const std::size_t depth = model.depth();
  if (depth > kMaxExpandedDepth) {
    throw CapabilityError("subset expansion of R limited to L <= 20, got L = " + std::to_string(depth));
  }
  const double eta2 = model.eta() * model.eta();
  const std::size_t full = (std::size_t{1} << depth) - 1;
  double total = 0.0;
  for (std::size_t mask = 0; mask < full; ++mask) {
    std::size_t count = 0;
    double norm2 = 0.0;
    for (std::size_t h = 0; h < model.dim(); ++h) {
      double prod = 1.0;
      for (std::size_t l = 0; l < depth; ++l) {
        if (mask & (std::size_t{1} << l)) prod *= params(l, h) * params(l, h);
      }
      norm2 += prod;
    }
    for (std::size_t l = 0; l < depth; ++l) count += (mask >> l) & 1U;
    total += detail::ipow(eta2, depth - count) * norm2;
  }
  return total;
}

inline double regularized_loss(const NetworkParams& params, const ModelSpec& model) {
  return empirical_loss(params, model) + regularizer(params, model);
}

/// Gradient of the unregularised loss: -2 (w*_h - prod_m W_mh) prod_{m != l} W_mh.
inline GradientSet grad_loss(const NetworkParams& params, const ModelSpec& model) {
  require_shape(params, model);
  GradientSet g(model.depth(), model.dim());
  for (std::size_t h = 0; h < model.dim(); ++h) {
    const double residual = model.w_star()[h] - detail::product_of_layers(params, h);
    for (std::size_t l = 0; l < model.depth(); ++l) {
      g(l, h) = -2.0 * residual * detail::product_except(params, h, l);
    }
  }
  return g;
}

/// Gradient of R: 2 (prod_{r != l}(W_r^2 + eta^2) - prod_{s != l} W_s^2) W_l.
inline GradientSet grad_reg(const NetworkParams& params, const ModelSpec& model) {
  require_shape(params, model);
  const double eta2 = model.eta() * model.eta();
  GradientSet g(model.depth(), model.dim());
  for (std::size_t h = 0; h < model.dim(); ++h) {
    for (std::size_t l = 0; l < model.depth(); ++l) {
      double shifted = 1.0;
      double plain = 1.0;
      for (std::size_t m = 0; m < model.depth(); ++m) {
        if (m == l) continue;
        const double w2 = params(m, h) * params(m, h);
        shifted *= w2 + eta2;
        plain *= w2;
      }
      g(l, h) = 2.0 * (shifted - plain) * params(l, h);
    }
  }
  return g;
}

inline GradientSet grad_regularized(const NetworkParams& params, const ModelSpec& model) {
  GradientSet g = grad_loss(params, model);
  const GradientSet r = grad_reg(params, model);
  auto gv = g.values();
  auto rv = r.values();
  for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += rv[i];
  return g;
}

/// Single-sample S-SAM gradient with perturbed weights W + xi and label y:
/// entry (l, h) = -2 (y - sum_r prod_m (W+xi)_mr x_r) x_h prod_{m != l} (W+xi)_mh.
inline GradientSet noisy_grad_sample(const NetworkParams& params, const ModelSpec& model,
                                     std::span<const double> x, double y, const NoiseDraw& xi) {
  require_shape(params, model);
  require_shape(xi, model);
  if (x.size() != model.dim()) throw ContractViolation("regressor length must equal d");
  const std::size_t depth = model.depth();
  const std::size_t dim = model.dim();

  double prediction = 0.0;
  for (std::size_t h = 0; h < dim; ++h) {
    double prod = 1.0;
    for (std::size_t l = 0; l < depth; ++l) prod *= params(l, h) + xi(l, h);
    prediction += prod * x[h];
  }
  const double residual = y - prediction;

  GradientSet g(depth, dim);
  for (std::size_t h = 0; h < dim; ++h) {
    const double scale = -2.0 * residual * x[h];
    for (std::size_t l = 0; l < depth; ++l) {
      double prod = 1.0;
      for (std::size_t m = 0; m < depth; ++m) {
        if (m != l) prod *= params(m, h) + xi(m, h);
      }
      g(l, h) = scale * prod;
    }
  }
  return g;
}

/// Same gradient with the exact teacher label y = sum_h w*_h x_h.
inline GradientSet noisy_grad_sample(const NetworkParams& params, const ModelSpec& model,
                                     std::span<const double> x, const NoiseDraw& xi) {
  if (x.size() != model.dim()) throw ContractViolation("regressor length must equal d");
  double y = 0.0;
  for (std::size_t h = 0; h < model.dim(); ++h) y += model.w_star()[h] * x[h];
  return noisy_grad_sample(params, model, x, y, xi);
}

/// Fills xi with i.i.d. N(0, eta^2) draws (all zeros for the unregularised model).
inline void draw_noise(NoiseDraw& xi, const ModelSpec& model, Rng& rng) {
  if (model.is_unregularized()) {
    for (double& v : xi.values()) v = 0.0;
    return;
  }
  std::normal_distribution<double> normal(0.0, model.eta());
  for (double& v : xi.values()) v = normal(rng);
}

/// Trace of the Hessian of L: 2 sum_h sum_l prod_{m != l} W_mh^2.
inline double hessian_trace_loss(const NetworkParams& params, const ModelSpec& model) {
  require_shape(params, model);
  double trace = 0.0;
  for (std::size_t h = 0; h < model.dim(); ++h) {
    for (std::size_t l = 0; l < model.depth(); ++l) {
      const double p = detail::product_except(params, h, l);
      trace += p * p;
    }
  }
  return 2.0 * trace;
}

/// ||W_l^2 - W_{l+1}^2|| (Frobenius over the diagonal) for l = 1..L-1.
inline std::vector<double> balancing_gaps(const NetworkParams& params) {
  std::vector<double> gaps;
  if (params.depth() < 2) return gaps;
  gaps.reserve(params.depth() - 1);
  for (std::size_t l = 0; l + 1 < params.depth(); ++l) {
    double s = 0.0;
    for (std::size_t h = 0; h < params.dim(); ++h) {
      const double diff = params(l, h) * params(l, h) - params(l + 1, h) * params(l + 1, h);
      s += diff * diff;
    }
    gaps.push_back(std::sqrt(s));
  }
  return gaps;
}

struct SharpnessEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t num_samples = 0;
};

/// Monte Carlo estimate of the average sharpness
/// E||W* - (W_L+xi_L)...(W_1+xi_1)||^2 - ||W* - W_L...W_1||^2 with its standard error.
inline SharpnessEstimate avg_sharpness_mc(const NetworkParams& params, const ModelSpec& model,
                                          std::size_t num_samples, std::uint64_t seed) {
  require_shape(params, model);
  if (num_samples < 2) throw ContractViolation("avg_sharpness_mc needs at least 2 samples");
  const double base = empirical_loss(params, model);
  Rng rng = make_stream(seed, streams::monte_carlo);
  NoiseDraw xi(model.depth(), model.dim());
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t s = 0; s < num_samples; ++s) {
    draw_noise(xi, model, rng);
    double perturbed = 0.0;
    for (std::size_t h = 0; h < model.dim(); ++h) {
      double prod = 1.0;
      for (std::size_t l = 0; l < model.depth(); ++l) prod *= params(l, h) + xi(l, h);
      const double r = model.w_star()[h] - prod;
      perturbed += r * r;
    }
    const double value = perturbed - base;
    const double delta = value - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (value - mean);
  }
  const double var = m2 / static_cast<double>(num_samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(num_samples)), num_samples};
}

/// eta^{-2(L-1)} * loss: the coercivity bound on sum_l ||W_l||^2.
inline double coercivity_bound(double regularized_loss_value, const ModelSpec& model) {
  if (model.is_unregularized()) throw NotApplicable("coercivity bound requires eta > 0");
  return regularized_loss_value / detail::ipow(model.eta() * model.eta(), model.depth() - 1);
}

/// Upper bound on constant step sizes guaranteeing the strong descent
/// condition with constant delta:
///   2 (1 - delta) / ( sqrt(L) (7 sqrt(L) + 2) / eta^2 * L_R(params0) ).
/// Returns +infinity when L_R(params0) == 0.
inline double step_size_cap(const NetworkParams& params0, const ModelSpec& model, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ContractViolation("delta must lie in (0, 1)");
  if (model.is_unregularized()) throw NotApplicable("step-size cap requires eta > 0");
  const double lr0 = regularized_loss(params0, model);
  if (lr0 == 0.0) return std::numeric_limits<double>::infinity();
  const double sqrt_l = std::sqrt(static_cast<double>(model.depth()));
  const double hessian_bound = sqrt_l * (7.0 * sqrt_l + 2.0) / (model.eta() * model.eta()) * lr0;
  return 2.0 * (1.0 - delta) / hessian_bound;
}

}  // namespace ssam

#endif  // SSAM_MODEL_HPP
