#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "graphon_ising/kernel_matrix.hpp"
#include "graphon_ising/wrandom.hpp"

namespace graphon_ising {

using Rng = std::mt19937_64;

namespace detail {

inline double unit_uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

}  // namespace detail

/// Spins sigma_i = ±1 at x_i = (i + 1/2)/n with cached local sums
/// s_i = sum_j a_ij sigma_j and the running total energy H.
class SpinState {
 public:
  SpinState(const Adjacency& a, std::vector<std::int8_t> sigma, int coupling, double temperature)
      : sigma_(std::move(sigma)), coupling_(coupling) {
    if (sigma_.size() != a.size()) throw std::invalid_argument("spin state: size mismatch with graph");
    for (const auto s : sigma_)
      if (s != 1 && s != -1) throw std::invalid_argument("spin state: spins must be ±1");
    if (coupling_ != 1 && coupling_ != -1) throw std::invalid_argument("spin state: J must be ±1");
    set_temperature(temperature);
    recompute(a);
  }

  [[nodiscard]] std::size_t size() const { return sigma_.size(); }
  [[nodiscard]] const std::vector<std::int8_t>& spins() const { return sigma_; }
  [[nodiscard]] const std::vector<std::int32_t>& local_sums() const { return sums_; }
  [[nodiscard]] int coupling() const { return coupling_; }
  [[nodiscard]] double temperature() const { return temperature_; }
  /// Incrementally tracked H / n.
  [[nodiscard]] double tracked_energy() const { return energy_ / static_cast<double>(size()); }

  void set_temperature(double t) {
    if (!(t > 0.0)) throw std::invalid_argument("temperature must be positive");
    temperature_ = t;
    // ΔE = 2 x / n with x = J sigma_i s_i; only x > 0 needs an exponential.
    const auto n = static_cast<double>(size());
    accept_.resize(size() + 1);
    for (std::size_t x = 0; x < accept_.size(); ++x)
      accept_[x] = std::exp(-2.0 * static_cast<double>(x) / (n * temperature_));
  }

  /// Metropolis proposal at site i. Returns true if the flip was accepted.
  bool propose(const Adjacency& a, std::size_t i, Rng& rng) {
    const long x = static_cast<long>(coupling_) * sigma_[i] * sums_[i];
    if (x > 0 && detail::unit_uniform(rng) >= accept_[static_cast<std::size_t>(x)]) return false;
    energy_ += 2.0 * static_cast<double>(x) / static_cast<double>(size());
    sigma_[i] = static_cast<std::int8_t>(-sigma_[i]);
    const std::int32_t delta = 2 * sigma_[i];
    a.for_each_neighbor(i, [&](std::size_t j) { sums_[j] += delta; });
    return true;
  }

  /// Rebuild the cache and the energy from scratch.
  void recompute(const Adjacency& a) {
    sums_ = fresh_sums(a);
    double total = 0.0;
    for (std::size_t i = 0; i < size(); ++i) total += static_cast<double>(sigma_[i]) * sums_[i];
    energy_ = -0.5 * coupling_ * total / static_cast<double>(size());
  }

  [[nodiscard]] bool cache_consistent(const Adjacency& a) const { return fresh_sums(a) == sums_; }

 private:
  [[nodiscard]] std::vector<std::int32_t> fresh_sums(const Adjacency& a) const {
    std::vector<std::uint64_t> plus(a.words_per_row(), 0);
    for (std::size_t i = 0; i < size(); ++i)
      if (sigma_[i] > 0) plus[i / 64] |= std::uint64_t{1} << (i % 64);
    std::vector<std::int32_t> sums(size());
    for (std::size_t i = 0; i < size(); ++i) {
      const auto r = a.row(i);
      int up = 0;
      int deg = 0;
      for (std::size_t w = 0; w < r.size(); ++w) {
        up += std::popcount(r[w] & plus[w]);
        deg += std::popcount(r[w]);
      }
      sums[i] = 2 * up - deg;
    }
    return sums;
  }

  std::vector<std::int8_t> sigma_;
  std::vector<std::int32_t> sums_;
  std::vector<double> accept_;
  int coupling_;
  double temperature_ = 1.0;
  double energy_ = 0.0;
};

/// H / n with H = -(1/2n) sum_ij J a_ij sigma_i sigma_j, recomputed from scratch.
inline double energy(const SpinState& state, const Adjacency& a) {
  if (state.size() != a.size()) throw std::invalid_argument("energy: size mismatch with graph");
  const auto n = static_cast<double>(a.size());
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    long s = 0;
    a.for_each_neighbor(i, [&](std::size_t j) { s += state.spins()[j]; });
    total += static_cast<double>(state.spins()[i]) * static_cast<double>(s);
  }
  return -0.5 * state.coupling() * total / (n * n);
}

/// n single-spin Metropolis proposals at uniformly random sites. Returns the acceptance rate.
inline double sweep(SpinState& state, const Adjacency& a, Rng& rng) {
  const std::size_t n = state.size();
  std::size_t accepted = 0;
  for (std::size_t step = 0; step < n; ++step)
    if (state.propose(a, detail::uniform_index(rng, n), rng)) ++accepted;
  return static_cast<double>(accepted) / static_cast<double>(n);
}

/// cos/sin tables for the overlaps q_k, k = 0..k_max.
class ModeTable {
 public:
  ModeTable(std::size_t n, int k_max) : n_(n), k_max_(k_max) {
    const Eigen::VectorXd x = grid_points(n);
    cos_.resize(static_cast<std::size_t>(k_max) * n);
    sin_.resize(cos_.size());
    for (int k = 1; k <= k_max; ++k)
      for (std::size_t i = 0; i < n; ++i) {
        const double phase = 2.0 * std::numbers::pi * k * x(static_cast<Eigen::Index>(i));
        cos_[(k - 1) * n + i] = std::cos(phase);
        sin_[(k - 1) * n + i] = std::sin(phase);
      }
  }

  [[nodiscard]] int k_max() const { return k_max_; }

  [[nodiscard]] double overlap(const std::vector<std::int8_t>& sigma, int k) const {
    if (k < 0 || k > k_max_) throw std::out_of_range("overlap: mode not tabulated");
    const auto n = static_cast<double>(n_);
    if (k == 0) {
      long total = 0;
      for (const auto s : sigma) total += s;
      return std::abs(static_cast<double>(total)) / n;
    }
    double re = 0.0;
    double im = 0.0;
    const std::size_t base = static_cast<std::size_t>(k - 1) * n_;
    for (std::size_t i = 0; i < n_; ++i) {
      re += sigma[i] * cos_[base + i];
      im += sigma[i] * sin_[base + i];
    }
    return 2.0 * std::hypot(re, im) / n;
  }

 private:
  std::size_t n_;
  int k_max_;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

/// q_0 = |mean sigma|; q_k = (2/n) |sum sigma_i e^{-2 pi i k x_i}| for k >= 1.
inline double overlap(const SpinState& state, int k) {
  if (k < 0) throw std::invalid_argument("overlap: mode index must be non-negative");
  return ModeTable(state.size(), k).overlap(state.spins(), k);
}

/// sigma_i = sign(cos(2 pi k x_i)), with sign(0) = +1; k = 0 gives all +1.
inline std::vector<std::int8_t> mode_spins(std::size_t n, int k) {
  const Eigen::VectorXd x = grid_points(n);
  std::vector<std::int8_t> s(n);
  for (std::size_t i = 0; i < n; ++i)
    s[i] = std::cos(2.0 * std::numbers::pi * k * x(static_cast<Eigen::Index>(i))) >= 0.0 ? 1 : -1;
  return s;
}

struct InitialCondition {
  enum class Kind { random, from_mode, explicit_spins };
  Kind kind = Kind::random;
  int mode = 0;
  std::vector<std::int8_t> spins;

  static InitialCondition random() { return {}; }
  static InitialCondition from_mode(int k) { return {Kind::from_mode, k, {}}; }
  static InitialCondition explicit_spins(std::vector<std::int8_t> s) {
    return {Kind::explicit_spins, 0, std::move(s)};
  }
};

struct QuenchOptions {
  int coupling = 1;
  double temperature = 1.0;
  InitialCondition init;
  long sweeps = 1000;
  long measure_every = 10;
  std::uint64_t seed = 0;
  int k_max = 10;
  /// Coarse-grained magnetization profile bins per record (0 disables snapshots).
  std::size_t bins = 0;
  /// Verify the cached local sums every this many sweeps (0 disables).
  long check_every = 100;
};

struct TrajectoryRecord {
  long sweep = 0;
  double energy = 0.0;
  std::vector<double> overlaps;  // q_0 .. q_kmax
  double acceptance = 0.0;       // mean acceptance since the previous record
  std::vector<double> profile;   // bin means of sigma
};

struct Trajectory {
  int k_max = 0;
  long measure_every = 1;
  std::vector<TrajectoryRecord> records;
};

struct QuenchResult {
  Trajectory trajectory;
  SpinState final_state;
};

inline QuenchResult quench(const Adjacency& a, const QuenchOptions& opt) {
  if (opt.sweeps < 1) throw std::invalid_argument("quench: need at least one sweep");
  if (opt.measure_every < 1) throw std::invalid_argument("quench: measure_every must be positive");
  const std::size_t n = a.size();
  Rng rng(opt.seed);
  std::vector<std::int8_t> sigma;
  switch (opt.init.kind) {
    case InitialCondition::Kind::random:
      sigma.resize(n);
      for (auto& s : sigma) s = (rng() >> 63) ? 1 : -1;
      break;
    case InitialCondition::Kind::from_mode: sigma = mode_spins(n, opt.init.mode); break;
    case InitialCondition::Kind::explicit_spins: sigma = opt.init.spins; break;
  }
  SpinState state(a, std::move(sigma), opt.coupling, opt.temperature);
  const ModeTable modes(n, opt.k_max);

  Trajectory traj{opt.k_max, opt.measure_every, {}};
  const auto record = [&](long sweep_index, double acceptance) {
    TrajectoryRecord r;
    r.sweep = sweep_index;
    r.energy = state.tracked_energy();
    r.acceptance = acceptance;
    for (int k = 0; k <= opt.k_max; ++k) r.overlaps.push_back(modes.overlap(state.spins(), k));
    if (opt.bins > 0) {
      r.profile.assign(opt.bins, 0.0);
      std::vector<int> counts(opt.bins, 0);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t b = i * opt.bins / n;
        r.profile[b] += state.spins()[i];
        ++counts[b];
      }
      for (std::size_t b = 0; b < opt.bins; ++b)
        if (counts[b] > 0) r.profile[b] /= counts[b];
    }
    traj.records.push_back(std::move(r));
  };

  record(0, 0.0);
  double acceptance_sum = 0.0;
  for (long s = 1; s <= opt.sweeps; ++s) {
    acceptance_sum += sweep(state, a, rng);
    if (opt.check_every > 0 && s % opt.check_every == 0 && !state.cache_consistent(a))
      throw std::logic_error("quench: cached local sums drifted");
    if (s % opt.measure_every == 0) {
      record(s, acceptance_sum / static_cast<double>(opt.measure_every));
      acceptance_sum = 0.0;
    }
  }
  return {std::move(traj), std::move(state)};
}

struct DwellTime {
  long sweeps = 0;
  bool censored = false;
};

/// First recorded sweep at which q_k < threshold; censored at the last record
/// if the overlap never drops.
inline DwellTime dwell_time(const Trajectory& traj, int k, double threshold) {
  if (k < 0 || k > traj.k_max) throw std::out_of_range("dwell_time: mode not recorded");
  for (const auto& r : traj.records)
    if (r.overlaps[static_cast<std::size_t>(k)] < threshold) return {r.sweep, false};
  return {traj.records.empty() ? 0 : traj.records.back().sweep, true};
}

}  // namespace graphon_ising
