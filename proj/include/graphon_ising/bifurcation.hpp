#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "graphon_ising/kernel_matrix.hpp"
#include "graphon_ising/meanfield.hpp"
#include "graphon_ising/spectrum.hpp"

namespace graphon_ising {

enum class Regime { ferromagnetic, antiferromagnetic };

inline const char* to_string(Regime r) { return r == Regime::ferromagnetic ? "FM" : "AFM"; }

struct BifurcationPoint {
  int index = 0;
  double lambda = 0.0;
  double beta_c = 0.0;
  Eigenfunction mode;
  Regime regime = Regime::ferromagnetic;
};

/// Critical points beta_c = 1 / lambda_k for every eigenvalue with |lambda| > zero_floor.
/// FM points (lambda > 0) come first, then AFM points; each group is ordered
/// by |beta_c| ascending and holds at most `count` entries.
inline std::vector<BifurcationPoint> critical_points(const Spectrum& spectrum, std::size_t count,
                                                     double zero_floor = 1e-12) {
  std::vector<BifurcationPoint> fm;
  std::vector<BifurcationPoint> afm;
  for (const auto& p : spectrum.pairs) {
    if (std::abs(p.value) <= zero_floor) continue;
    BifurcationPoint bp{p.index, p.value, 1.0 / p.value, p.function,
                        p.value > 0 ? Regime::ferromagnetic : Regime::antiferromagnetic};
    (p.value > 0 ? fm : afm).push_back(std::move(bp));
  }
  const auto by_distance = [](const BifurcationPoint& a, const BifurcationPoint& b) {
    return std::abs(a.beta_c) < std::abs(b.beta_c);
  };
  std::stable_sort(fm.begin(), fm.end(), by_distance);
  std::stable_sort(afm.begin(), afm.end(), by_distance);
  if (fm.size() > count) fm.resize(count);
  if (afm.size() > count) afm.resize(count);
  fm.insert(fm.end(), afm.begin(), afm.end());
  return fm;
}

/// |A| from the cubic normal form gamma*mu*A - A|A|^2 = 0, gamma = |beta| - |beta_c|.
/// For a cosine mode the profile is 2|A| cos(2 pi k x), so its sup-norm is 2|A|.
inline double normal_form_amplitude(const BifurcationPoint& bp, double gamma) {
  return gamma > 0.0 ? std::sqrt(gamma * std::abs(bp.lambda)) : 0.0;
}

/// Projection of u onto a mode: |mean| for constants, |u_hat_k| = |(1/n) sum u e^{-2 pi i k x}|
/// for cosines, and the least-squares coefficient on the sampled profile otherwise.
inline double modal_amplitude(const Eigen::VectorXd& u, const Eigenfunction& mode) {
  const auto n = static_cast<std::size_t>(u.size());
  switch (mode.kind) {
    case Eigenfunction::Kind::constant: return std::abs(u.mean());
    case Eigenfunction::Kind::cosine: {
      const Eigen::VectorXd x = grid_points(n);
      std::complex<double> acc{0.0, 0.0};
      for (std::size_t i = 0; i < n; ++i)
        acc += u(static_cast<Eigen::Index>(i)) *
               std::polar(1.0, -2.0 * std::numbers::pi * mode.mode * x(static_cast<Eigen::Index>(i)));
      return std::abs(acc) / static_cast<double>(n);
    }
    default: {
      const Eigen::VectorXd v = mode.sample(n);
      return std::abs(u.dot(v)) / v.squaredNorm();
    }
  }
}

/// Phase condition for branches seeded by a cosine mode on a translation-invariant
/// kernel: the shifted mode sin(2 pi k x) spans the neutral direction.
inline std::optional<Eigen::VectorXd> phase_condition(const BifurcationPoint& bp,
                                                      const KernelMatrix& kernel) {
  if (!kernel.translation_invariant() || bp.mode.kind != Eigenfunction::Kind::cosine ||
      bp.mode.mode == 0)
    return std::nullopt;
  return (2.0 * std::numbers::pi * bp.mode.mode * grid_points(kernel.size()).array()).sin().matrix();
}

class BranchNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BranchSwitchOptions {
  /// beta = beta_c (1 + delta); for AFM points beta_c < 0 so beta moves further negative.
  double delta = 0.02;
  /// Seed amplitude (sup-norm). Defaults to the normal-form prediction.
  std::optional<double> eps;
  /// Seed with -xi_k instead of xi_k.
  bool negate = false;
  SolveOptions solve;
};

struct SwitchResult {
  FieldState state;
  ConvergenceRecord record;
  double similarity = 0.0;  // |cos angle| between the solution and the seeding mode
  std::optional<Eigen::VectorXd> phase;
};

/// Leave the trivial branch at a critical point by seeding Newton with eps * xi_k.
inline SwitchResult branch_switch(const BifurcationPoint& bp, const KernelMatrix& kernel,
                                  const BranchSwitchOptions& opt = {}) {
  if (opt.delta == 0.0) throw std::invalid_argument("branch_switch: delta must be nonzero");
  const double beta = bp.beta_c * (1.0 + opt.delta);
  const double gamma = std::abs(std::abs(beta) - std::abs(bp.beta_c));
  const bool cosine = bp.mode.kind == Eigenfunction::Kind::cosine && bp.mode.mode != 0;
  // Predicted sup amplitude: 2|A| for cosines, sqrt(3 gamma lambda) for a simple mode.
  const double predicted = cosine ? 2.0 * normal_form_amplitude(bp, gamma)
                                  : std::sqrt(3.0 * gamma * std::abs(bp.lambda));
  const double eps = opt.eps.value_or(std::min(predicted, 0.9));
  if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("branch_switch: eps must lie in (0, 1]");

  const Eigen::VectorXd mode = bp.mode.sample(kernel.size());
  SolveOptions solve_opt = opt.solve;
  solve_opt.method = SolveMethod::newton;
  if (!solve_opt.phase) solve_opt.phase = phase_condition(bp, kernel);

  SolveResult solved = solve(kernel, beta, (opt.negate ? -eps : eps) * mode, solve_opt);
  if (!solved.record.converged)
    throw BranchNotFound("branch_switch: Newton did not converge near beta = " + format_double(beta));
  const double amplitude = solved.state.u.cwiseAbs().maxCoeff();
  if (amplitude < 1e-3 * eps)
    throw BranchNotFound("branch_switch: collapsed onto u = 0 at beta = " + format_double(beta) +
                         " (delta too small or on the wrong side of beta_c)");
  SwitchResult out{std::move(solved.state), solved.record, 0.0, solve_opt.phase};
  out.similarity = std::abs(out.state.u.dot(mode)) / (out.state.u.norm() * mode.norm());
  return out;
}

struct BranchPoint {
  double beta = 0.0;
  Eigen::VectorXd u;
  double amplitude = 0.0;        // sup-norm of u
  double probe_value = 0.0;      // u at the grid point nearest x* = 0
  double modal_amplitude = 0.0;  // projection on the origin mode (amplitude if none)
  std::optional<Stability> stability;
  double leading_multiplier = 0.0;
};

struct Branch {
  std::vector<BranchPoint> points;
  std::optional<BifurcationPoint> origin;
  bool truncated = false;
  int rejected_steps = 0;
  double max_step = 0.0;
};

struct ContinuationOptions {
  double beta_end = 0.0;
  double initial_step = 0.01;
  double min_step = 1e-7;
  double max_step = 0.1;
  double tol = 1e-10;
  int max_corrector = 12;
  std::size_t max_points = 5000;
  bool compute_stability = true;
  std::optional<Eigen::VectorXd> phase;
};

namespace detail {

inline BranchPoint make_point(const KernelMatrix& kernel, const FieldState& s,
                              const std::optional<BifurcationPoint>& origin, bool with_stability) {
  BranchPoint p;
  p.beta = s.beta;
  p.u = s.u;
  p.amplitude = s.u.cwiseAbs().maxCoeff();
  p.probe_value = s.u(0);
  p.modal_amplitude = origin ? modal_amplitude(s.u, origin->mode) : p.amplitude;
  if (with_stability) {
    const StabilityReport r = stability(kernel, s);
    p.stability = r.classification;
    p.leading_multiplier = r.leading_multiplier;
  }
  return p;
}

/// Weighted arclength norm: ds^2 = (1/n)|du|^2 + dbeta^2.
inline double arc_norm(const Eigen::VectorXd& du, double dbeta) {
  return std::sqrt(du.squaredNorm() / static_cast<double>(du.size()) + dbeta * dbeta);
}

}  // namespace detail

/// Pseudo-arclength continuation in beta from a converged state: secant
/// predictor, Newton corrector on the bordered system. The step halves on a
/// failed correction and doubles after four consecutive successes; the last
/// point is placed exactly at beta_end.
inline Branch continue_branch(const KernelMatrix& kernel, const FieldState& start,
                              const ContinuationOptions& opt,
                              std::optional<BifurcationPoint> origin = std::nullopt) {
  const auto n = static_cast<Eigen::Index>(kernel.size());
  const bool phased = opt.phase.has_value();
  const Eigen::Index dim = n + 1 + (phased ? 1 : 0);

  SolveOptions fixed;
  fixed.tol = opt.tol;
  fixed.phase = opt.phase;
  fixed.max_iter = 50;

  Branch branch;
  branch.origin = std::move(origin);
  branch.max_step = opt.max_step;

  FieldState y = start;
  if (detail::sup_norm(residual(kernel, y)) > opt.tol) {
    SolveResult polished = solve(kernel, y.beta, y.u.cwiseMax(-1.0).cwiseMin(1.0), fixed);
    if (!polished.record.converged)
      throw std::invalid_argument("continue_branch: start state is not a solution");
    y = std::move(polished.state);
  }
  branch.points.push_back(detail::make_point(kernel, y, branch.origin, opt.compute_stability));
  const double direction = opt.beta_end > y.beta ? 1.0 : (opt.beta_end < y.beta ? -1.0 : 0.0);
  if (direction == 0.0) return branch;

  // Initial tangent: J v = -F_beta (with <phase, v> = 0), tau = (v, 1).
  Eigen::VectorXd tau_u;
  double tau_b = direction;
  {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + (phased ? 1 : 0), n + (phased ? 1 : 0));
    a.topLeftCorner(n, n) = jacobian(kernel, y);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(a.rows());
    rhs.head(n) = -beta_derivative(kernel, y);
    if (phased) {
      a.topRightCorner(n, 1) = *opt.phase;
      a.bottomLeftCorner(1, n) = opt.phase->transpose();
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    if (!(lu.rcond() > 1e-13)) throw SingularJacobian();
    tau_u = lu.solve(rhs).head(n) * direction;
    const double norm = detail::arc_norm(tau_u, tau_b);
    tau_u /= norm;
    tau_b /= norm;
  }

  const auto land_at_end = [&](const FieldState& from, const FieldState& past) -> bool {
    const double w = (opt.beta_end - from.beta) / (past.beta - from.beta);
    const Eigen::VectorXd guess = (from.u + w * (past.u - from.u)).cwiseMax(-1.0).cwiseMin(1.0);
    SolveResult landed = solve(kernel, opt.beta_end, guess, fixed);
    if (!landed.record.converged) return false;
    branch.points.push_back(detail::make_point(kernel, landed.state, branch.origin, opt.compute_stability));
    return true;
  };

  double h = std::clamp(opt.initial_step, opt.min_step, opt.max_step);
  int successes = 0;
  while (branch.points.size() < opt.max_points) {
    const FieldState pred{y.u + h * tau_u, y.beta + h * tau_b};
    FieldState z = pred;
    double multiplier = 0.0;
    bool converged = false;
    for (int it = 0; it <= opt.max_corrector; ++it) {
      const Eigen::VectorXd f = residual(kernel, z);
      const double phase_gap = phased ? std::abs(opt.phase->dot(z.u)) : 0.0;
      if (detail::sup_norm(f) <= opt.tol && phase_gap <= opt.tol) {
        converged = true;
        break;
      }
      if (it == opt.max_corrector || !z.u.allFinite()) break;
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
      a.topLeftCorner(n, n) = jacobian(kernel, z);
      a.block(0, n, n, 1) = beta_derivative(kernel, z);
      Eigen::VectorXd rhs(dim);
      rhs.head(n) = -f;
      if (phased) {
        a.block(0, n + 1, n, 1) = *opt.phase;
        a.block(n + 1, 0, 1, n) = opt.phase->transpose();
        rhs.head(n) -= multiplier * *opt.phase;
        rhs(n + 1) = -opt.phase->dot(z.u);
      }
      a.block(n, 0, 1, n) = tau_u.transpose() / static_cast<double>(n);
      a(n, n) = tau_b;
      rhs(n) = -((z.u - pred.u).dot(tau_u) / static_cast<double>(n) + (z.beta - pred.beta) * tau_b);
      const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
      if (!(lu.rcond() > 1e-14)) break;
      const Eigen::VectorXd step = lu.solve(rhs);
      z.u += step.head(n);
      z.beta += step(n);
      if (phased) multiplier += step(n + 1);
    }

    if (converged && (z.beta - opt.beta_end) * direction >= 0.0) {
      if (land_at_end(y, z)) return branch;
      converged = false;
    }
    if (!converged) {
      ++branch.rejected_steps;
      successes = 0;
      h *= 0.5;
      if (h < opt.min_step) {
        branch.truncated = true;
        return branch;
      }
      continue;
    }

    const Eigen::VectorXd du = z.u - y.u;
    const double db = z.beta - y.beta;
    const double norm = detail::arc_norm(du, db);
    tau_u = du / norm;
    tau_b = db / norm;
    y = std::move(z);
    branch.points.push_back(detail::make_point(kernel, y, branch.origin, opt.compute_stability));
    if (++successes >= 4) {
      h = std::min(2.0 * h, opt.max_step);
      successes = 0;
    }
  }
  branch.truncated = true;
  return branch;
}

class InsufficientPoints : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AmplitudeFit {
  double exponent = 0.0;
  double prefactor = 0.0;
  std::size_t points = 0;
};

enum class AmplitudeMeasure { modal, sup_norm };

/// Least-squares fit of log(amplitude) = log(prefactor) + exponent * log(gamma)
/// over the branch points with gamma = |beta| - |beta_c| in (0, window * |beta_c|].
inline AmplitudeFit amplitude_law_check(const Branch& branch,
                                        AmplitudeMeasure measure = AmplitudeMeasure::modal,
                                        double window = 0.1, std::size_t min_points = 6) {
  if (!branch.origin) throw std::invalid_argument("amplitude_law_check: branch has no origin");
  const double beta_c = branch.origin->beta_c;
  std::vector<double> lx;
  std::vector<double> ly;
  for (const auto& p : branch.points) {
    if (p.beta * beta_c <= 0.0) continue;
    const double gamma = std::abs(p.beta) - std::abs(beta_c);
    const double amp = measure == AmplitudeMeasure::modal ? p.modal_amplitude : p.amplitude;
    if (gamma <= 0.0 || gamma > window * std::abs(beta_c) || amp <= 0.0) continue;
    lx.push_back(std::log(gamma));
    ly.push_back(std::log(amp));
  }
  if (lx.size() < min_points)
    throw InsufficientPoints("amplitude_law_check: " + std::to_string(lx.size()) +
                             " points in the asymptotic window, need " + std::to_string(min_points));
  const auto m = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / m;
  return {slope, std::exp(intercept), lx.size()};
}

}  // namespace graphon_ising
