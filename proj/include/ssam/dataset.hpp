#ifndef SSAM_DATASET_HPP
#define SSAM_DATASET_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ssam/errors.hpp"
#include "ssam/model.hpp"
#include "ssam/random.hpp"

namespace ssam {

inline constexpr double kWhiteningTolerance = 1e-10;

/// n labelled regressors (X_i, Y_i), rows stored contiguously.
class WhitenedDataset {
 public:
  WhitenedDataset() = default;
  WhitenedDataset(std::size_t n, std::size_t d, std::vector<double> x, std::vector<double> y)
      : n_(n), d_(d), x_(std::move(x)), y_(std::move(y)) {
    if (n_ == 0 || d_ == 0) throw ContractViolation("dataset needs n >= 1 and d >= 1");
    if (x_.size() != n_ * d_ || y_.size() != n_) throw ContractViolation("dataset storage has wrong size");
    residual_ = compute_residual();
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t dim() const noexcept { return d_; }
  std::span<const double> row(std::size_t i) const { return {x_.data() + i * d_, d_}; }
  double label(std::size_t i) const { return y_[i]; }
  const std::vector<double>& labels() const noexcept { return y_; }

  /// Frobenius distance between (1/n) sum_i X_i X_i^t and I_d.
  double whitening_residual() const noexcept { return residual_; }
  bool is_whitened() const noexcept { return residual_ <= kWhiteningTolerance; }

  /// (1/n) sum_i X_i X_i^t, row-major d x d.
  std::vector<double> second_moment() const {
    std::vector<double> c(d_ * d_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const auto xi = row(i);
      for (std::size_t r = 0; r < d_; ++r) {
        for (std::size_t s = 0; s < d_; ++s) c[r * d_ + s] += xi[r] * xi[s];
      }
    }
    for (double& v : c) v /= static_cast<double>(n_);
    return c;
  }

 private:
  double compute_residual() const {
    const auto c = second_moment();
    double s = 0.0;
    for (std::size_t r = 0; r < d_; ++r) {
      for (std::size_t q = 0; q < d_; ++q) {
        const double diff = c[r * d_ + q] - (r == q ? 1.0 : 0.0);
        s += diff * diff;
      }
    }
    return std::sqrt(s);
  }

  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<double> x_;
  std::vector<double> y_;
  double residual_ = 0.0;
};

/// Teacher label sum_h w*_h x_h, summed in coordinate order.
inline double teacher_label(const ModelSpec& model, std::span<const double> x) {
  double y = 0.0;
  for (std::size_t h = 0; h < model.dim(); ++h) y += model.w_star()[h] * x[h];
  return y;
}

/// Draws G ~ N(0,1)^{n x d}, whitens it with the symmetric inverse square root
/// of C = G^t G / n and attaches exact teacher labels. Redraws G up to three
/// times if C is numerically singular.
inline WhitenedDataset generate_whitened(std::size_t n, const ModelSpec& model, std::uint64_t seed) {
  const std::size_t d = model.dim();
  if (n < d) throw GenerationError(fmt::format("whitening needs n >= d (n = {}, d = {})", n, d));
  Rng rng = make_stream(seed, streams::data);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr int kMaxDraws = 4;
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  for (int attempt = 0; attempt < kMaxDraws; ++attempt) {
    RowMatrix g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = normal(rng);
    }
    const Eigen::MatrixXd c = (g.transpose() * g) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < 1e-12) continue;
    const Eigen::VectorXd inv_sqrt = eig.eigenvalues().array().rsqrt();
    const Eigen::MatrixXd c_inv_sqrt = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
    const RowMatrix x = g * c_inv_sqrt;

    std::vector<double> xs(x.data(), x.data() + x.size());
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = teacher_label(model, {xs.data() + i * d, d});
    WhitenedDataset ds(n, d, std::move(xs), std::move(ys));
    if (ds.is_whitened()) return ds;
  }
  throw GenerationError(fmt::format("could not whiten an {}x{} design after {} draws", n, d, kMaxDraws));
}

struct DataPoint {
  std::size_t index = 0;
  std::span<const double> x;
  double y = 0.0;
};

/// Uniform draw over the rows of ds using the caller's generator.
inline DataPoint sample_point(const WhitenedDataset& ds, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
  const std::size_t i = pick(rng);
  return {i, ds.row(i), ds.label(i)};
}

/// (1/n) sum_i (Y_i - 1^t W_L...W_1 X_i)^2 evaluated on the rows themselves.
inline double dataset_loss(const NetworkParams& params, const WhitenedDataset& ds) {
  if (params.dim() != ds.dim()) throw ContractViolation("dataset dimension does not match params");
  std::vector<double> w(params.dim());
  for (std::size_t h = 0; h < params.dim(); ++h) w[h] = detail::product_of_layers(params, h);
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto x = ds.row(i);
    double pred = 0.0;
    for (std::size_t h = 0; h < w.size(); ++h) pred += w[h] * x[h];
    const double r = ds.label(i) - pred;
    total += r * r;
  }
  return total / static_cast<double>(ds.size());
}

/// CSV with header x_1,...,x_d,y; values printed in shortest round-trip form.
inline void write_dataset_csv(std::ostream& out, const WhitenedDataset& ds) {
  for (std::size_t h = 0; h < ds.dim(); ++h) out << "x_" << (h + 1) << ',';
  out << "y\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.row(i)) out << fmt::format("{}", v) << ',';
    out << fmt::format("{}", ds.label(i)) << '\n';
  }
}

inline WhitenedDataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ContractViolation("dataset csv: missing header");
  std::size_t columns = 1;
  for (char c : line) columns += (c == ',');
  if (columns < 2) throw ContractViolation("dataset csv: need at least one regressor column and y");
  const std::size_t d = columns - 1;
  std::vector<double> xs;
  std::vector<double> ys;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      const double v = std::stod(cell);
      if (col < d) {
        xs.push_back(v);
      } else if (col == d) {
        ys.push_back(v);
      }
      ++col;
    }
    if (col != columns) throw ContractViolation(fmt::format("dataset csv: row {} has {} cells", n + 1, col));
    ++n;
  }
  return WhitenedDataset(n, d, std::move(xs), std::move(ys));
}

}  // namespace ssam

#endif  // SSAM_DATASET_HPP
