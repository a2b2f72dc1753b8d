#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "graphon_ising/kernel_matrix.hpp"

namespace graphon_ising {

/// Magnetization profile u on the grid together with the inverse temperature.
struct FieldState {
  Eigen::VectorXd u;
  double beta = 0.0;
};

/// Raised by Newton when the Jacobian cannot be factored, which happens at
/// u = 0 exactly at a critical point beta = 1 / lambda_k.
class SingularJacobian : public std::runtime_error {
 public:
  SingularJacobian()
      : std::runtime_error(
            "singular Jacobian: the state sits on a bifurcation point; use branch_switch to "
            "leave the trivial branch") {}
};

enum class SolveMethod { fixed_point, newton };

inline const char* to_string(SolveMethod m) {
  return m == SolveMethod::newton ? "newton" : "fixed_point";
}

struct SolveOptions {
  SolveMethod method = SolveMethod::newton;
  double tol = 1e-10;
  int max_iter = 10000;
  double damping = 0.7;
  /// Optional phase condition <phase, u> = 0 for Newton. Translation-invariant
  /// kernels have a neutral shift direction along non-constant solutions; the
  /// condition pins it.
  std::optional<Eigen::VectorXd> phase;
  /// Reciprocal condition number below which Newton reports a singular Jacobian.
  double singular_rcond = 1e-13;
};

struct ConvergenceRecord {
  bool converged = false;
  int iterations = 0;
  double final_residual = 0.0;
  SolveMethod method = SolveMethod::newton;
};

struct SolveResult {
  FieldState state;
  ConvergenceRecord record;
};

/// tanh(beta (1/n) W u) - u.
inline Eigen::VectorXd residual(const KernelMatrix& kernel, const FieldState& s) {
  return (s.beta * kernel.apply(s.u)).array().tanh().matrix() - s.u;
}

/// d residual / du = beta diag(sech^2(beta W u / n)) W / n - I.
inline Eigen::MatrixXd jacobian(const KernelMatrix& kernel, const FieldState& s) {
  const auto n = static_cast<double>(kernel.size());
  const Eigen::ArrayXd t = (s.beta * kernel.apply(s.u)).array().tanh();
  const Eigen::VectorXd sech2 = (1.0 - t.square()).matrix();
  Eigen::MatrixXd jac = (s.beta / n) * (sech2.asDiagonal() * kernel.entries());
  jac.diagonal().array() -= 1.0;
  return jac;
}

/// d residual / d beta = sech^2(beta W u / n) (W u / n).
inline Eigen::VectorXd beta_derivative(const KernelMatrix& kernel, const FieldState& s) {
  const Eigen::ArrayXd field = kernel.apply(s.u).array();
  const Eigen::ArrayXd t = (s.beta * field).tanh();
  return ((1.0 - t.square()) * field).matrix();
}

namespace detail {

inline double sup_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

/// One Newton step for residual (+ phase border). Returns the update for u.
inline Eigen::VectorXd newton_step(const KernelMatrix& kernel, const FieldState& s,
                                   const Eigen::VectorXd& f, const SolveOptions& opt,
                                   double& phase_multiplier) {
  const auto n = static_cast<Eigen::Index>(kernel.size());
  if (!opt.phase) {
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(jacobian(kernel, s));
    if (!(lu.rcond() > opt.singular_rcond)) throw SingularJacobian();
    return lu.solve(-f);
  }
  // [J  phi] [du]   [-(f + c phi)]
  // [phi' 0] [dc] = [-<phi, u>   ]
  const Eigen::VectorXd& phi = *opt.phase;
  Eigen::MatrixXd bordered = Eigen::MatrixXd::Zero(n + 1, n + 1);
  bordered.topLeftCorner(n, n) = jacobian(kernel, s);
  bordered.topRightCorner(n, 1) = phi;
  bordered.bottomLeftCorner(1, n) = phi.transpose();
  Eigen::VectorXd rhs(n + 1);
  rhs.head(n) = -(f + phase_multiplier * phi);
  rhs(n) = -phi.dot(s.u);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(bordered);
  if (!(lu.rcond() > opt.singular_rcond)) throw SingularJacobian();
  const Eigen::VectorXd step = lu.solve(rhs);
  phase_multiplier += step(n);
  return step.head(n);
}

}  // namespace detail

/// Solve tanh(beta W[u]) = u from `init`. Non-convergence is reported in the
/// record together with the last iterate.
inline SolveResult solve(const KernelMatrix& kernel, double beta, const Eigen::VectorXd& init,
                         const SolveOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw std::invalid_argument("solve: tol must be positive");
  if (static_cast<std::size_t>(init.size()) != kernel.size())
    throw std::invalid_argument("solve: initial profile does not match the kernel size");
  if (init.size() > 0 && init.cwiseAbs().maxCoeff() > 1.0)
    throw std::invalid_argument("solve: initial profile must lie in [-1, 1]");
  if (opt.phase && static_cast<std::size_t>(opt.phase->size()) != kernel.size())
    throw std::invalid_argument("solve: phase vector does not match the kernel size");

  SolveResult result{{init, beta}, {false, 0, 0.0, opt.method}};
  FieldState& s = result.state;
  Eigen::VectorXd f = residual(kernel, s);
  double norm = detail::sup_norm(f);
  double phase_multiplier = 0.0;
  const auto phase_gap = [&] { return opt.phase ? std::abs(opt.phase->dot(s.u)) : 0.0; };
  if (opt.method == SolveMethod::newton && !opt.phase) {
    // A start on a bifurcation point would otherwise be accepted as converged.
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(jacobian(kernel, s));
    if (!(lu.rcond() > opt.singular_rcond)) throw SingularJacobian();
  }

  for (int it = 0; it < opt.max_iter; ++it) {
    if (norm <= opt.tol && phase_gap() <= opt.tol) {
      result.record.converged = true;
      break;
    }
    ++result.record.iterations;
    if (opt.method == SolveMethod::fixed_point) {
      s.u = (1.0 - opt.damping) * s.u + opt.damping * (f + s.u);
      f = residual(kernel, s);
      norm = detail::sup_norm(f);
      continue;
    }
    const Eigen::VectorXd du = detail::newton_step(kernel, s, f, opt, phase_multiplier);
    // Backtrack while the residual grows; a full step is taken near the root.
    double scale = 1.0;
    FieldState trial{s.u + du, beta};
    Eigen::VectorXd ftrial = residual(kernel, trial);
    for (int k = 0; k < 20 && detail::sup_norm(ftrial) > norm && norm > opt.tol; ++k) {
      scale *= 0.5;
      trial.u = s.u + scale * du;
      ftrial = residual(kernel, trial);
    }
    s = std::move(trial);
    f = std::move(ftrial);
    norm = detail::sup_norm(f);
  }
  if (!result.record.converged && norm <= opt.tol && phase_gap() <= opt.tol)
    result.record.converged = true;
  result.record.final_residual = norm;
  return result;
}

/// S(x) = -(l((1+x)/2) + l((1-x)/2)), l(x) = x log x with l(0) = 0.
inline double entropy(double x) {
  const auto ell = [](double t) { return t > 0.0 ? t * std::log(t) : 0.0; };
  return -(ell(0.5 * (1.0 + x)) + ell(0.5 * (1.0 - x)));
}

/// Free energy per node: -(1/2n^2) sum W_ij u_i u_j - (T/n) sum S(u_i).
inline double free_energy(const KernelMatrix& kernel, const Eigen::VectorXd& u, double temperature) {
  if (static_cast<std::size_t>(u.size()) != kernel.size())
    throw std::invalid_argument("free_energy: profile does not match the kernel size");
  const auto n = static_cast<double>(kernel.size());
  const double interaction = -0.5 * u.dot(kernel.entries() * u) / (n * n);
  double s = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) s += entropy(u(i));
  return interaction - temperature * s / n;
}

enum class Stability { stable, unstable, marginal };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::unstable: return "unstable";
    case Stability::marginal: break;
  }
  return "marginal";
}

struct StabilityReport {
  double leading_multiplier = 0.0;
  Stability classification = Stability::marginal;
  Eigen::VectorXd multipliers;      // all eigenvalues of L, descending
  Eigen::VectorXd leading_vector;   // eigenvector of L for the leading multiplier

  [[nodiscard]] std::size_t unstable_count(double tol = 1e-8) const {
    return static_cast<std::size_t>((multipliers.array() > tol).count());
  }
};

/// Spectrum of L = beta diag(sech^2(beta W u)) W - I. With D = diag(sech^2) > 0,
/// L is similar to the symmetric beta D^(1/2) W D^(1/2) - I, so all multipliers
/// are real.
inline StabilityReport stability(const KernelMatrix& kernel, const FieldState& s, double tol = 1e-8) {
  const auto n = static_cast<double>(kernel.size());
  const Eigen::ArrayXd t = (s.beta * kernel.apply(s.u)).array().tanh();
  const Eigen::VectorXd root = (1.0 - t.square()).sqrt().matrix();
  Eigen::MatrixXd sym = (s.beta / n) * (root.asDiagonal() * kernel.entries() * root.asDiagonal());
  sym.diagonal().array() -= 1.0;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw std::runtime_error("stability: eigensolver failed");

  StabilityReport report;
  const auto m = solver.eigenvalues().size();
  report.multipliers = solver.eigenvalues().reverse();
  report.leading_multiplier = report.multipliers(0);
  Eigen::VectorXd v = root.asDiagonal() * solver.eigenvectors().col(m - 1);
  report.leading_vector = v / v.norm();
  if (report.leading_multiplier > tol)
    report.classification = Stability::unstable;
  else if (report.leading_multiplier < -tol)
    report.classification = Stability::stable;
  else
    report.classification = Stability::marginal;
  return report;
}

}  // namespace graphon_ising
