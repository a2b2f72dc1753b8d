#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "graphon_ising/graphon.hpp"

namespace graphon_ising {

/// What to do with cell averages above 1. Edge probabilities must be clamped;
/// the integral operator itself is analysed unclamped.
enum class Truncation { clamp_to_unit, none };

/// Representative points x_i = (i + 1/2) / n of the cells [i/n, (i+1)/n).
inline Eigen::VectorXd grid_points(std::size_t n) {
  const auto m = static_cast<Eigen::Index>(n);
  return (Eigen::VectorXd::LinSpaced(m, 0.0, static_cast<double>(m - 1)).array() + 0.5) /
         static_cast<double>(m);
}

/// Exact cell averages W^n_ij = n^2 * integral of W over cell (i, j), computed
/// lazily so that large graphs can be sampled without an n x n table.
class CellAverages {
 public:
  CellAverages(const Graphon& g, std::size_t n, Truncation truncation = Truncation::clamp_to_unit)
      : graphon_(g), n_(n), truncation_(truncation) {
    if (n < 1) throw std::invalid_argument("discretize: grid size must be positive");
    std::visit([this](const auto& k) { prepare(k); }, graphon_.kind);
  }

  [[nodiscard]] std::size_t size() const { return n_; }
  [[nodiscard]] bool translation_invariant() const { return !offset_row_.empty() || constant_; }

  /// True if any cell average exceeds 1 (clamped or not).
  [[nodiscard]] bool exceeds_unit() const { return exceeds_unit_; }
  [[nodiscard]] bool truncated() const {
    return exceeds_unit_ && truncation_ == Truncation::clamp_to_unit;
  }

  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const {
    double v = 0.0;
    if (constant_) {
      v = constant_value_;
    } else if (!offset_row_.empty()) {
      v = offset_row_[(j + n_ - i) % n_];
    } else if (!factor_.empty()) {
      v = factor_[i] * factor_[j];
    } else {
      if (i > j) std::swap(i, j);
      const auto& grid = graphon_.as<Tabulated>().grid;
      for (const auto& [a, wa] : overlaps_[i])
        for (const auto& [b, wb] : overlaps_[j]) v += wa * wb * grid(a, b);
    }
    if (truncation_ == Truncation::clamp_to_unit && v > 1.0) return 1.0;
    return v;
  }

 private:
  void prepare(const ErdosRenyi& k) {
    constant_ = true;
    constant_value_ = k.p;
  }

  void prepare(const PowerLaw& k) {
    // Cell average of x^(-alpha) over [i/n, (i+1)/n): n^alpha ((i+1)^b - i^b) / b, b = 1 - alpha.
    const double b = 1.0 - k.alpha;
    const double scale = std::pow(static_cast<double>(n_), k.alpha) / b;
    factor_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i)
      factor_[i] = scale * (std::pow(static_cast<double>(i + 1), b) - std::pow(static_cast<double>(i), b));
    exceeds_unit_ = factor_.front() * factor_.front() > 1.0;
  }

  void prepare(const SmallWorld& k) {
    // Averaging K(x - y) over a cell pair reduces to integrating K against the
    // triangular density of x - y, centred on the offset between the cells.
    const double nd = static_cast<double>(n_);
    const auto triangle_cdf = [nd](double u) {
      const double h = 1.0 / nd;
      if (u <= -h) return 0.0;
      if (u >= h) return 1.0;
      const double t = nd * u;
      return u < 0.0 ? 0.5 * (1.0 + t) * (1.0 + t) : 1.0 - 0.5 * (1.0 - t) * (1.0 - t);
    };
    offset_row_.assign(n_, 0.0);
    for (std::size_t d = 0; d <= n_ / 2; ++d) {
      const double s = static_cast<double>(d) / nd;
      double inside = 0.0;
      for (int m = -2; m <= 2; ++m)
        inside += triangle_cdf(m + k.r - s) - triangle_cdf(m - k.r - s);
      offset_row_[d] = k.p + (1.0 - 2.0 * k.p) * inside;
      offset_row_[(n_ - d) % n_] = offset_row_[d];
    }
  }

  void prepare(const Tabulated& k) {
    const auto m = static_cast<std::size_t>(k.grid.rows());
    overlaps_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      // Overlap of [i/n, (i+1)/n) with [a/m, (a+1)/m), in units of the cell width 1/n.
      const std::size_t first = i * m / n_;
      const std::size_t last = std::min(m - 1, ((i + 1) * m - 1) / n_);
      for (std::size_t a = first; a <= last; ++a) {
        const double lo = std::max(static_cast<double>(i) * m, static_cast<double>(a) * n_);
        const double hi = std::min(static_cast<double>(i + 1) * m, static_cast<double>(a + 1) * n_);
        if (hi > lo) overlaps_[i].emplace_back(a, (hi - lo) / static_cast<double>(m));
      }
    }
  }

  Graphon graphon_;
  std::size_t n_;
  Truncation truncation_;
  bool constant_ = false;
  double constant_value_ = 0.0;
  bool exceeds_unit_ = false;
  std::vector<double> offset_row_;
  std::vector<double> factor_;
  std::vector<std::vector<std::pair<Eigen::Index, double>>> overlaps_;
};

/// Cell-averaged discretization W^n. The discrete operator is u -> (1/n) W^n u.
class KernelMatrix {
 public:
  KernelMatrix() = default;

  /// Wrap explicit entries; the matrix must be square, symmetric and non-negative.
  explicit KernelMatrix(Eigen::MatrixXd entries, bool truncated = false)
      : entries_(std::move(entries)), truncated_(truncated) {
    if (entries_.rows() != entries_.cols() || entries_.rows() == 0)
      throw std::invalid_argument("kernel matrix must be square and non-empty");
    if ((entries_ - entries_.transpose()).cwiseAbs().maxCoeff() != 0.0)
      throw std::invalid_argument("kernel matrix must be symmetric");
    if (!entries_.allFinite() || entries_.minCoeff() < 0.0)
      throw std::invalid_argument("kernel matrix entries must be finite and non-negative");
    translation_invariant_ = is_circulant(entries_);
  }

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(entries_.rows()); }
  [[nodiscard]] const Eigen::MatrixXd& entries() const { return entries_; }
  [[nodiscard]] bool truncated() const { return truncated_; }
  [[nodiscard]] bool translation_invariant() const { return translation_invariant_; }

  /// (1/n) W^n u.
  [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& u) const {
    return entries_ * u / static_cast<double>(entries_.rows());
  }

  /// Largest row mean, a bound on |(1/n) W^n u|_inf for |u| <= 1.
  [[nodiscard]] double max_row_mean() const {
    return entries_.rowwise().sum().maxCoeff() / static_cast<double>(entries_.rows());
  }

 private:
  static bool is_circulant(const Eigen::MatrixXd& m) {
    const auto n = m.rows();
    for (Eigen::Index i = 1; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (m(i, j) != m(0, (j - i + n) % n)) return false;
    return true;
  }

  Eigen::MatrixXd entries_;
  bool truncated_ = false;
  bool translation_invariant_ = false;
};

inline KernelMatrix discretize(const Graphon& g, std::size_t n,
                               Truncation truncation = Truncation::clamp_to_unit) {
  const CellAverages cells(g, n, truncation);
  const auto m = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd entries(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i; j < m; ++j)
      entries(i, j) = entries(j, i) = cells(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  return KernelMatrix(std::move(entries), cells.truncated());
}

}  // namespace graphon_ising
