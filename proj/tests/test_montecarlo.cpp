#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "graphon_ising/montecarlo.hpp"

namespace gi = graphon_ising;

namespace {

// H / n by the double sum over ordered pairs.
double brute_energy(const gi::Adjacency& a, const std::vector<std::int8_t>& s, int j) {
  const auto n = static_cast<double>(a.size());
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a.size(); ++k)
      if (a(i, k)) total += s[i] * s[k];
  return -0.5 * j * total / (n * n);
}

std::vector<std::int8_t> random_spins(std::size_t n, std::uint64_t seed) {
  gi::Rng rng(seed);
  std::vector<std::int8_t> s(n);
  for (auto& v : s) v = (rng() & 1) ? 1 : -1;
  return s;
}

}  // namespace

TEST(Energy, CompleteGraphExamples) {
  const std::size_t n = 6;
  const auto k6 = gi::sample(gi::erdos_renyi(1.0), n, 0);
  const gi::SpinState up(k6, std::vector<std::int8_t>(n, 1), 1, 1.0);
  EXPECT_DOUBLE_EQ(gi::energy(up, k6), -(n - 1.0) / (2.0 * n));
  EXPECT_DOUBLE_EQ(up.tracked_energy(), -(n - 1.0) / (2.0 * n));
  // Alternating spins: sum_{i != j} s_i s_j = (sum s)^2 - n = -n.
  const gi::SpinState alt(k6, {1, -1, 1, -1, 1, -1}, 1, 1.0);
  EXPECT_DOUBLE_EQ(gi::energy(alt, k6), 0.5 / n);
  const gi::SpinState afm(k6, std::vector<std::int8_t>(n, 1), -1, 1.0);
  EXPECT_DOUBLE_EQ(gi::energy(afm, k6), (n - 1.0) / (2.0 * n));
}

TEST(Energy, SingleFlipChangeMatchesBruteForce) {
  const auto a = gi::sample(gi::small_world(0.1, 0.2), 60, 4);
  for (int j : {1, -1}) {
    auto s = random_spins(60, 8);
    gi::SpinState state(a, s, j, 1e12);  // every proposal accepted
    gi::Rng rng(0);
    for (std::size_t i : {0u, 17u, 59u}) {
      const double before = brute_energy(a, s, j);
      ASSERT_TRUE(state.propose(a, i, rng));
      s[i] = static_cast<std::int8_t>(-s[i]);
      const double after = brute_energy(a, s, j);
      EXPECT_NEAR(state.tracked_energy(), after, 1e-14);
      EXPECT_NEAR(gi::energy(state, a) - before, after - before, 1e-14);
      EXPECT_TRUE(state.cache_consistent(a));
    }
  }
}

TEST(Energy, SpinFlipSymmetry) {
  const auto a = gi::sample(gi::erdos_renyi(0.3), 80, 2);
  auto s = random_spins(80, 5);
  const gi::SpinState plus(a, s, 1, 1.0);
  for (auto& v : s) v = static_cast<std::int8_t>(-v);
  const gi::SpinState minus(a, s, 1, 1.0);
  EXPECT_EQ(gi::energy(plus, a), gi::energy(minus, a));
}

TEST(Energy, RejectsBadState) {
  const auto a = gi::sample(gi::erdos_renyi(0.5), 4, 0);
  EXPECT_THROW(gi::SpinState(a, {1, 1, 1}, 1, 1.0), std::invalid_argument);
  EXPECT_THROW(gi::SpinState(a, {1, 0, 1, 1}, 1, 1.0), std::invalid_argument);
  EXPECT_THROW(gi::SpinState(a, {1, 1, 1, 1}, 2, 1.0), std::invalid_argument);
  EXPECT_THROW(gi::SpinState(a, {1, 1, 1, 1}, 1, 0.0), std::invalid_argument);
}

TEST(Metropolis, TemperatureLimits) {
  const auto a = gi::sample(gi::erdos_renyi(1.0), 50, 0);
  gi::SpinState hot(a, random_spins(50, 1), 1, 1e12);
  gi::Rng rng(3);
  EXPECT_EQ(gi::sweep(hot, a, rng), 1.0);
  gi::SpinState cold(a, std::vector<std::int8_t>(50, 1), 1, 1e-12);
  for (int s = 0; s < 20; ++s) EXPECT_EQ(gi::sweep(cold, a, rng), 0.0);
}

TEST(Metropolis, ThreeNodePathSamplesBoltzmann) {
  const std::pair<std::size_t, std::size_t> edges[] = {{0, 1}, {1, 2}};
  const auto a = gi::Adjacency::from_edges(3, edges);
  const double t = 1.0 / 3.0;  // beta * (1/n) = 1 in the exponent
  gi::SpinState state(a, {1, 1, 1}, 1, t);
  std::array<double, 8> weight{};
  double z = 0.0;
  for (int c = 0; c < 8; ++c) {
    const std::vector<std::int8_t> s{static_cast<std::int8_t>(c & 1 ? -1 : 1), static_cast<std::int8_t>(c & 2 ? -1 : 1),
                                     static_cast<std::int8_t>(c & 4 ? -1 : 1)};
    weight[c] = std::exp(-3.0 * brute_energy(a, s, 1) / t);
    z += weight[c];
  }
  std::array<long, 8> hits{};
  gi::Rng rng(99);
  const long steps = 10'000'000;
  for (long step = 0; step < steps; ++step) {
    state.propose(a, gi::detail::uniform_index(rng, 3), rng);
    const auto& s = state.spins();
    ++hits[(s[0] < 0 ? 1 : 0) | (s[1] < 0 ? 2 : 0) | (s[2] < 0 ? 4 : 0)];
  }
  for (int c = 0; c < 8; ++c) EXPECT_NEAR(static_cast<double>(hits[c]) / steps, weight[c] / z, 0.01 * weight[c] / z);
}

TEST(Metropolis, BookkeepingStaysExact) {
  const std::size_t n = 500;
  const auto a = gi::sample(gi::small_world(0.05, 0.1), n, 6);
  gi::SpinState state(a, random_spins(n, 2), -1, 0.05);
  gi::Rng rng(1);
  for (int s = 0; s < 200; ++s) gi::sweep(state, a, rng);
  EXPECT_TRUE(state.cache_consistent(a));
  EXPECT_LT(std::abs(state.tracked_energy() - gi::energy(state, a)), 1e-9);
}

TEST(Overlap, SquareWaveMatchesDirectSum) {
  const std::size_t n = 1000;
  for (int k : {1, 3, 7}) {
    const auto s = gi::mode_spins(n, k);
    std::complex<double> sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      sum += static_cast<double>(s[i]) * std::polar(1.0, -2.0 * std::numbers::pi * k * (i + 0.5) / n);
    const gi::ModeTable table(n, 2 * k);
    EXPECT_NEAR(table.overlap(s, k), 2.0 * std::abs(sum) / n, 1e-12);
    EXPECT_NEAR(table.overlap(s, k), 4.0 / std::numbers::pi, 0.01);
    EXPECT_LT(table.overlap(s, 2 * k), 1e-9);  // square waves have only odd harmonics
  }
}

TEST(Overlap, UniformAndRandomSpins) {
  const std::size_t n = 10000;
  const gi::ModeTable table(n, 5);
  const std::vector<std::int8_t> up(n, 1);
  EXPECT_EQ(table.overlap(up, 0), 1.0);
  for (int k = 1; k <= 5; ++k) EXPECT_LT(table.overlap(up, k), 1e-10);
  const auto r = random_spins(n, 12);
  for (int k = 0; k <= 5; ++k) EXPECT_LT(table.overlap(r, k), 0.05);
  EXPECT_THROW((void)table.overlap(up, 6), std::out_of_range);
}

TEST(Quench, RecordsAndDwell) {
  const auto a = gi::sample(gi::small_world(0.05, 0.1), 200, 1);
  gi::QuenchOptions opt;
  opt.sweeps = 50;
  opt.measure_every = 10;
  opt.k_max = 3;
  opt.temperature = 0.1;
  opt.init = gi::InitialCondition::from_mode(1);
  opt.bins = 4;
  const auto res = gi::quench(a, opt);
  const auto& recs = res.trajectory.records;
  ASSERT_EQ(recs.size(), 6u);
  EXPECT_EQ(recs.front().sweep, 0);
  EXPECT_EQ(recs.back().sweep, 50);
  EXPECT_EQ(recs.front().overlaps.size(), 4u);
  EXPECT_EQ(recs.front().profile.size(), 4u);
  EXPECT_NEAR(recs.front().energy, gi::energy(gi::SpinState(a, gi::mode_spins(200, 1), 1, 1.0), a), 1e-15);
  // Threshold 0 is never crossed; a threshold above every overlap is crossed at once.
  const auto never = gi::dwell_time(res.trajectory, 1, 0.0);
  EXPECT_TRUE(never.censored);
  EXPECT_EQ(never.sweeps, 50);
  const auto at_once = gi::dwell_time(res.trajectory, 1, 10.0);
  EXPECT_FALSE(at_once.censored);
  EXPECT_EQ(at_once.sweeps, 0);
  EXPECT_THROW(gi::dwell_time(res.trajectory, 4, 0.5), std::out_of_range);
}

TEST(Quench, DeterministicGivenSeed) {
  const auto a = gi::sample(gi::erdos_renyi(0.5), 100, 1);
  gi::QuenchOptions opt;
  opt.sweeps = 30;
  opt.measure_every = 5;
  opt.seed = 17;
  const auto r1 = gi::quench(a, opt);
  const auto r2 = gi::quench(a, opt);
  EXPECT_EQ(r1.final_state.spins(), r2.final_state.spins());
  for (std::size_t i = 0; i < r1.trajectory.records.size(); ++i)
    EXPECT_EQ(r1.trajectory.records[i].overlaps, r2.trajectory.records[i].overlaps);
  opt.seed = 18;
  EXPECT_NE(gi::quench(a, opt).final_state.spins(), r1.final_state.spins());
}

TEST(Quench, RejectsBadOptions) {
  const auto a = gi::sample(gi::erdos_renyi(0.5), 10, 1);
  gi::QuenchOptions opt;
  opt.sweeps = 0;
  EXPECT_THROW(gi::quench(a, opt), std::invalid_argument);
  opt.sweeps = 10;
  opt.measure_every = 0;
  EXPECT_THROW(gi::quench(a, opt), std::invalid_argument);
  opt.measure_every = 1;
  opt.init = gi::InitialCondition::explicit_spins({1, 1});
  EXPECT_THROW(gi::quench(a, opt), std::invalid_argument);
}
