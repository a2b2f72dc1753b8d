#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graphon_ising/graphon.hpp"
#include "graphon_ising/kernel_matrix.hpp"

namespace graphon_ising {

/// Eigenfunction of a kernel operator, either in closed form or sampled on a grid.
struct Eigenfunction {
  enum class Kind { constant, cosine, power, grid };
  Kind kind = Kind::constant;
  int mode = 0;          // Fourier mode for cosine eigenfunctions
  double exponent = 0;   // x^exponent for power eigenfunctions
  Eigen::VectorXd values;  // grid samples, sup-norm 1, for Kind::grid

  static Eigenfunction constant() { return {}; }
  static Eigenfunction cosine(int k) { return {Kind::cosine, k, 0.0, {}}; }
  static Eigenfunction power(double e) { return {Kind::power, 0, e, {}}; }
  static Eigenfunction sampled(Eigen::VectorXd v) { return {Kind::grid, 0, 0.0, std::move(v)}; }

  [[nodiscard]] std::string descriptor() const {
    switch (kind) {
      case Kind::constant: return "constant";
      case Kind::cosine: return "cos/sin(2*pi*" + std::to_string(mode) + "*x)";
      case Kind::power: return "x^" + format_double(exponent);
      case Kind::grid: break;
    }
    return "grid";
  }

  /// Samples at the midpoints x_i, scaled to sup-norm 1.
  [[nodiscard]] Eigen::VectorXd sample(std::size_t n) const {
    const Eigen::VectorXd x = grid_points(n);
    Eigen::VectorXd v;
    switch (kind) {
      case Kind::constant: return Eigen::VectorXd::Ones(x.size());
      case Kind::cosine: return (2.0 * std::numbers::pi * mode * x.array()).cos().matrix();
      case Kind::power: v = x.array().pow(exponent).matrix(); break;
      case Kind::grid:
        if (static_cast<std::size_t>(values.size()) != n)
          throw std::invalid_argument("eigenfunction grid size does not match");
        v = values;
        break;
    }
    return v / v.cwiseAbs().maxCoeff();
  }
};

struct Eigenpair {
  int index = 0;  // Fourier mode (analytic) or signed rank from either end (numeric)
  double value = 0.0;
  int multiplicity = 1;
  Eigenfunction function;
};

/// Eigenpairs sorted as lambda_1 >= lambda_2 >= ... >= 0 >= ... >= lambda_{-1}.
struct Spectrum {
  std::vector<Eigenpair> pairs;

  [[nodiscard]] std::vector<double> values_with_multiplicity() const {
    std::vector<double> out;
    for (const auto& p : pairs) out.insert(out.end(), static_cast<std::size_t>(p.multiplicity), p.value);
    return out;
  }
};

class UnsupportedVariant : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// sin(2 pi t), exact zero at integer and half-integer t.
inline double sin_two_pi(double t) {
  const double f = t - std::round(t);
  if (f == 0.0 || std::abs(f) == 0.5) return 0.0;
  return std::sin(2.0 * std::numbers::pi * f);
}

/// Fourier coefficient mu_k of the small-world kernel.
inline double small_world_eigenvalue(const SmallWorld& sw, int k) {
  if (k == 0) return (1.0 - sw.p) * 2.0 * sw.r + sw.p * (1.0 - 2.0 * sw.r);  // mass inside plus outside the window
  const double kk = std::abs(static_cast<double>(k));
  return (1.0 - 2.0 * sw.p) * sin_two_pi(kk * sw.r) / (std::numbers::pi * kk);
}

inline Spectrum analytic_spectrum(const Graphon& g, int k_max) {
  Spectrum s;
  if (g.is<ErdosRenyi>()) {
    s.pairs.push_back({1, g.as<ErdosRenyi>().p, 1, Eigenfunction::constant()});
  } else if (g.is<PowerLaw>()) {
    const double alpha = g.as<PowerLaw>().alpha;
    s.pairs.push_back({1, 1.0 / (1.0 - 2.0 * alpha), 1, Eigenfunction::power(-alpha)});
  } else if (g.is<SmallWorld>()) {
    const auto& sw = g.as<SmallWorld>();
    s.pairs.push_back({0, small_world_eigenvalue(sw, 0), 1, Eigenfunction::constant()});
    for (int k = 1; k <= k_max; ++k)
      s.pairs.push_back({k, small_world_eigenvalue(sw, k), 2, Eigenfunction::cosine(k)});
    std::stable_sort(s.pairs.begin(), s.pairs.end(),
                     [](const Eigenpair& a, const Eigenpair& b) { return a.value > b.value; });
  } else {
    throw UnsupportedVariant("analytic spectrum is not available for tabulated graphons");
  }
  return s;
}

namespace detail {

/// Sup-norm 1 with the first entry of maximal modulus positive.
inline Eigen::VectorXd normalize_sup(Eigen::VectorXd v) {
  const double sup = v.cwiseAbs().maxCoeff();
  if (sup == 0.0) return v;
  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v(i)) >= sup * (1.0 - 1e-12)) {
      at = i;
      break;
    }
  return v / (v(at) > 0 ? sup : -sup);
}

inline bool lexicographically_greater(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) > b(i)) return true;
    if (a(i) < b(i)) return false;
  }
  return false;
}

}  // namespace detail

/// Full eigendecomposition of u -> (1/n) W^n u, sorted descending. Eigenvalues
/// within `tie_tol` of each other are ordered by their eigenvectors.
inline Spectrum full_numeric_spectrum(const KernelMatrix& m, double tie_tol = 1e-12) {
  const auto n = static_cast<double>(m.size());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m.entries() / n);
  if (solver.info() != Eigen::Success) throw std::runtime_error("symmetric eigensolver failed");
  Spectrum s;
  const auto count = solver.eigenvalues().size();
  s.pairs.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = count - 1; i >= 0; --i)
    s.pairs.push_back({0, solver.eigenvalues()(i), 1,
                       Eigenfunction::sampled(detail::normalize_sup(solver.eigenvectors().col(i)))});
  // Eigen returns ascending values; reverse order is already sorted, so only
  // clusters of (near-)equal eigenvalues need reordering.
  for (std::size_t start = 0; start < s.pairs.size();) {
    std::size_t end = start + 1;
    while (end < s.pairs.size() && s.pairs[start].value - s.pairs[end].value <= tie_tol) ++end;
    std::sort(s.pairs.begin() + static_cast<std::ptrdiff_t>(start),
              s.pairs.begin() + static_cast<std::ptrdiff_t>(end),
              [](const Eigenpair& a, const Eigenpair& b) {
                return detail::lexicographically_greater(a.function.values, b.function.values);
              });
    start = end;
  }
  int positive = 0;
  for (auto& p : s.pairs)
    if (p.value > 0.0) p.index = ++positive;
  int negative = 0;
  for (auto it = s.pairs.rbegin(); it != s.pairs.rend(); ++it)
    if (it->value < 0.0) it->index = -(++negative);
  return s;
}

/// The `count` largest and `count` smallest eigenpairs of u -> (1/n) W^n u.
inline Spectrum numeric_spectrum(const KernelMatrix& m, std::size_t count) {
  Spectrum all = full_numeric_spectrum(m);
  if (2 * count >= all.pairs.size()) return all;
  Spectrum s;
  s.pairs.assign(all.pairs.begin(), all.pairs.begin() + static_cast<std::ptrdiff_t>(count));
  s.pairs.insert(s.pairs.end(), all.pairs.end() - static_cast<std::ptrdiff_t>(count), all.pairs.end());
  return s;
}

}  // namespace graphon_ising
