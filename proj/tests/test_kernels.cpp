#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "graphon_ising/graphon.hpp"
#include "graphon_ising/kernel_matrix.hpp"
#include "graphon_ising/spectrum.hpp"

namespace gi = graphon_ising;

namespace {

// Fourier coefficient of the small-world kernel by adaptive quadrature, split at
// the jumps |x| = r. Independent of the closed form used by the library.
double quadrature_mu(double p, double r, int k) {
  using boost::math::quadrature::gauss_kronrod;
  const auto f = [&](double x) {
    const double kx = std::abs(x) <= r ? 1.0 - p : p;
    return kx * std::cos(2.0 * std::numbers::pi * k * x);
  };
  double total = 0.0;
  const double cuts[] = {-0.5, -r, r, 0.5};
  for (int s = 0; s < 3; ++s) total += gauss_kronrod<double, 61>::integrate(f, cuts[s], cuts[s + 1], 15, 1e-14);
  return total;
}

// Brute-force cell average: midpoint rule with m x m sub-samples per cell.
double brute_cell_average(const gi::Graphon& g, std::size_t n, std::size_t i, std::size_t j, int m) {
  double sum = 0.0;
  const double h = 1.0 / static_cast<double>(n);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      sum += gi::eval(g, (static_cast<double>(i) + (a + 0.5) / m) * h, (static_cast<double>(j) + (b + 0.5) / m) * h).value;
  return sum / (static_cast<double>(m) * m);
}

}  // namespace

TEST(Eval, ErdosRenyiIsConstant) {
  const auto g = gi::erdos_renyi(0.5);
  EXPECT_EQ(gi::eval(g, 0.1, 0.7).value, 0.5);
  EXPECT_EQ(gi::eval(g, 0.0, 1.0).value, 0.5);
}

TEST(Eval, SmallWorldInsideAndPeriodic) {
  const auto g = gi::small_world(0.05, 0.1);
  EXPECT_DOUBLE_EQ(gi::eval(g, 0.30, 0.25).value, 0.95);
  EXPECT_DOUBLE_EQ(gi::eval(g, 0.95, 0.0).value, 0.95);  // 0.95 == -0.05 mod 1
  EXPECT_DOUBLE_EQ(gi::eval(g, 0.5, 0.2).value, 0.05);
}

TEST(Eval, PowerLawTruncatesAboveOne) {
  const auto g = gi::power_law(0.2);
  const auto corner = gi::eval(g, 1.0, 1.0);
  EXPECT_EQ(corner.value, 1.0);
  EXPECT_FALSE(corner.truncated);
  const auto origin = gi::eval(g, 0.0, 0.3);
  EXPECT_EQ(origin.value, 1.0);
  EXPECT_TRUE(origin.truncated);
  EXPECT_TRUE(gi::eval(g, 0.5, 0.5).truncated);
}

TEST(Eval, SymmetricForEveryVariant) {
  Eigen::MatrixXd grid(3, 3);
  grid << 0.1, 0.4, 0.9, 0.4, 0.2, 0.3, 0.9, 0.3, 0.7;
  const std::vector<gi::Graphon> graphons{gi::erdos_renyi(0.3), gi::power_law(0.3),
                                          gi::small_world(0.05, 0.1), gi::tabulated(grid)};
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& g : graphons)
    for (int t = 0; t < 1000; ++t) {
      const double x = unit(rng);
      const double y = unit(rng);
      const auto a = gi::eval(g, x, y);
      const auto b = gi::eval(g, y, x);
      ASSERT_EQ(a.value, b.value);
      ASSERT_GE(a.value, 0.0);
      ASSERT_LE(a.value, 1.0);
    }
}

TEST(Eval, SmallWorldDependsOnlyOnDifference) {
  const auto g = gi::small_world(0.05, 0.1);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < 2000; ++t) {
    const double x = unit(rng);
    const double y = unit(rng);
    const double shift = unit(rng);
    const double d = std::abs(gi::detail::wrap_centered(x - y));
    if (std::abs(d - 0.1) < 1e-9) continue;  // skip the jump where rounding decides
    ASSERT_EQ(gi::eval(g, x, y).value, gi::eval(g, x + shift, y + shift).value);
  }
}

TEST(Graphon, ParametersAreValidated) {
  EXPECT_THROW(gi::power_law(0.5), std::invalid_argument);
  EXPECT_THROW(gi::power_law(0.0), std::invalid_argument);
  EXPECT_THROW(gi::small_world(0.6, 0.1), std::invalid_argument);
  EXPECT_THROW(gi::small_world(0.05, 0.5), std::invalid_argument);
  EXPECT_THROW(gi::erdos_renyi(1.5), std::invalid_argument);
  Eigen::MatrixXd asym(2, 2);
  asym << 0.1, 0.2, 0.3, 0.4;
  EXPECT_THROW(gi::tabulated(asym), std::invalid_argument);
}

TEST(Graphon, DescriptorRoundTrip) {
  for (const auto& g : {gi::erdos_renyi(0.5), gi::power_law(0.2), gi::small_world(0.05, 0.1)}) {
    const auto back = gi::graphon_from_descriptor(gi::describe(g));
    EXPECT_EQ(gi::describe(back), gi::describe(g));
  }
  EXPECT_EQ(gi::describe(gi::small_world(0.05, 0.1)), "smallworld p=0.05 r=0.1 domain=torus");
  EXPECT_THROW(gi::graphon_from_record({{"graphon", "smallworld"}, {"p", "0.05"}}), std::invalid_argument);
  EXPECT_THROW(gi::graphon_from_record({{"graphon", "powerlaw"}, {"alpha", "0.7"}}), std::invalid_argument);
}

TEST(Discretize, ErdosRenyiEntriesAreExact) {
  const auto m = gi::discretize(gi::erdos_renyi(0.5), 4);
  EXPECT_EQ(m.entries(), Eigen::MatrixXd::Constant(4, 4, 0.5));
  EXPECT_FALSE(m.truncated());
}

TEST(Discretize, PowerLawSingleCellIsTruncated) {
  // (integral of x^-0.2 over [0,1])^2 = (1/0.8)^2 = 1.5625.
  const auto clamped = gi::discretize(gi::power_law(0.2), 1);
  EXPECT_EQ(clamped.entries()(0, 0), 1.0);
  EXPECT_TRUE(clamped.truncated());
  const auto raw = gi::discretize(gi::power_law(0.2), 1, gi::Truncation::none);
  EXPECT_NEAR(raw.entries()(0, 0), 1.5625, 1e-14);
}

TEST(Discretize, PowerLawCellAveragesMatchQuadrature) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  const double alpha = 0.3;
  const std::size_t n = 16;
  const auto m = gi::discretize(gi::power_law(alpha), n, gi::Truncation::none);
  std::vector<double> avg(n);
  for (std::size_t i = 0; i < n; ++i)
    avg[i] = n * integrator.integrate([&](double x) { return std::pow(x, -alpha); },
                                      static_cast<double>(i) / n, static_cast<double>(i + 1) / n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      EXPECT_NEAR(m.entries()(i, j), avg[i] * avg[j], 1e-11);
}

TEST(Discretize, SmallWorldRowMatchesCellAverages) {
  const auto g = gi::small_world(0.05, 0.1);
  const auto m = gi::discretize(g, 10);
  // Neighbouring cells straddle |x - y| = r over half their area.
  const double expected[10] = {0.95, 0.5, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.5};
  for (int j = 0; j < 10; ++j) {
    EXPECT_NEAR(m.entries()(0, j), expected[j], 1e-15) << "column " << j;
    EXPECT_NEAR(m.entries()(0, j), brute_cell_average(g, 10, 0, j, 400), 3e-3);
  }
  EXPECT_TRUE(m.translation_invariant());
}

TEST(Discretize, SmallWorldUnalignedAgreesWithBruteForce) {
  const auto g = gi::small_world(0.2, 0.13);
  const std::size_t n = 7;
  const auto m = gi::discretize(g, n);
  for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(m.entries()(2, j), brute_cell_average(g, n, 2, j, 600), 2e-3);
  const Eigen::MatrixXd diff = m.entries() - m.entries().transpose();
  EXPECT_EQ(diff.cwiseAbs().maxCoeff(), 0.0);
  // Cell averaging preserves the row integral of K.
  EXPECT_NEAR(m.entries().row(0).sum() / n, gi::small_world_eigenvalue(g.as<gi::SmallWorld>(), 0), 1e-14);
}

TEST(Discretize, TabulatedCellAveragesAreExact) {
  Eigen::MatrixXd grid(2, 2);
  grid << 1.0, 0.0, 0.0, 0.5;
  const auto g = gi::tabulated(grid);
  const auto m = gi::discretize(g, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(m.entries()(i, j), brute_cell_average(g, 3, i, j, 300), 2e-3);
  // Middle cell straddles the grid line: (1/4)*1 + (1/4)*0.5.
  EXPECT_NEAR(m.entries()(1, 1), 0.375, 1e-15);
}

TEST(KernelMatrix, RejectsAsymmetricInput) {
  Eigen::MatrixXd asym(2, 2);
  asym << 0.1, 0.2, 0.3, 0.4;
  EXPECT_THROW(gi::KernelMatrix{asym}, std::invalid_argument);
}

TEST(AnalyticSpectrum, ErdosRenyi) {
  const auto s = gi::analytic_spectrum(gi::erdos_renyi(0.5), 10);
  ASSERT_EQ(s.pairs.size(), 1u);
  EXPECT_EQ(s.pairs[0].value, 0.5);
  EXPECT_EQ(s.pairs[0].function.kind, gi::Eigenfunction::Kind::constant);
}

TEST(AnalyticSpectrum, PowerLaw) {
  const auto s = gi::analytic_spectrum(gi::power_law(0.2), 10);
  ASSERT_EQ(s.pairs.size(), 1u);
  EXPECT_NEAR(s.pairs[0].value, 5.0 / 3.0, 1e-15);
  EXPECT_EQ(s.pairs[0].function.descriptor(), "x^-0.2");
}

TEST(AnalyticSpectrum, SmallWorldValues) {
  const auto sw = gi::small_world(0.05, 0.1).as<gi::SmallWorld>();
  EXPECT_EQ(gi::small_world_eigenvalue(sw, 0), 0.23);
  EXPECT_NEAR(gi::small_world_eigenvalue(sw, 1), 0.9 * std::sin(0.2 * std::numbers::pi) / std::numbers::pi, 1e-15);
  EXPECT_NEAR(gi::small_world_eigenvalue(sw, 1), 0.16839, 1e-5);
  EXPECT_EQ(gi::small_world_eigenvalue(sw, 5), 0.0);
  EXPECT_EQ(gi::small_world_eigenvalue(sw, -3), gi::small_world_eigenvalue(sw, 3));
}

TEST(AnalyticSpectrum, SmallWorldMatchesQuadrature) {
  const auto sw = gi::small_world(0.05, 0.1).as<gi::SmallWorld>();
  for (int k = 0; k <= 32; ++k)
    EXPECT_NEAR(gi::small_world_eigenvalue(sw, k), quadrature_mu(0.05, 0.1, k), 1e-10) << "k=" << k;
}

TEST(AnalyticSpectrum, SmallWorldDecayBound) {
  const auto sw = gi::small_world(0.05, 0.1).as<gi::SmallWorld>();
  for (int k = 1; k <= 200; ++k)
    EXPECT_LE(std::abs(gi::small_world_eigenvalue(sw, k)), 0.9 / (std::numbers::pi * k) + 1e-16);
}

TEST(AnalyticSpectrum, SortedAndMultiplicities) {
  const auto s = gi::analytic_spectrum(gi::small_world(0.05, 0.1), 12);
  ASSERT_EQ(s.pairs.size(), 13u);
  for (std::size_t i = 1; i < s.pairs.size(); ++i) EXPECT_GE(s.pairs[i - 1].value, s.pairs[i].value);
  EXPECT_EQ(s.pairs.front().index, 0);
  EXPECT_EQ(s.pairs.front().multiplicity, 1);
  EXPECT_EQ(s.pairs[1].index, 1);
  EXPECT_EQ(s.pairs[1].multiplicity, 2);
}

TEST(AnalyticSpectrum, ComputedOrderingOfMostNegativeModes) {
  // Evaluating the closed form gives mu_7 < mu_8 < mu_6 < mu_9 < 0 at p=0.05, r=0.1.
  const auto s = gi::analytic_spectrum(gi::small_world(0.05, 0.1), 10);
  std::vector<int> negative;
  for (auto it = s.pairs.rbegin(); it != s.pairs.rend() && it->value < -1e-12; ++it) negative.push_back(it->index);
  EXPECT_EQ(negative, (std::vector<int>{7, 8, 6, 9}));
}

TEST(AnalyticSpectrum, TabulatedIsUnsupported) {
  EXPECT_THROW(gi::analytic_spectrum(gi::tabulated(Eigen::MatrixXd::Ones(2, 2)), 3), gi::UnsupportedVariant);
}

TEST(NumericSpectrum, ErdosRenyiRankOne) {
  const auto s = gi::full_numeric_spectrum(gi::discretize(gi::erdos_renyi(0.5), 64));
  EXPECT_NEAR(s.pairs.front().value, 0.5, 1e-13);
  EXPECT_EQ(s.pairs.front().index, 1);
  for (std::size_t i = 1; i < s.pairs.size(); ++i) EXPECT_NEAR(s.pairs[i].value, 0.0, 1e-13);
  EXPECT_NEAR((s.pairs.front().function.values.array() - 1.0).abs().maxCoeff(), 0.0, 1e-12);
}

TEST(NumericSpectrum, TabulatedOnesHasUnitEigenvalue) {
  const auto m = gi::discretize(gi::tabulated(Eigen::MatrixXd::Ones(1, 1)), 20);
  const auto s = gi::numeric_spectrum(m, 1);
  EXPECT_NEAR(s.pairs.front().value, 1.0, 1e-13);
  EXPECT_NEAR((s.pairs.front().function.values.array() - 1.0).abs().maxCoeff(), 0.0, 1e-12);
}

TEST(NumericSpectrum, SmallWorldLeadingEigenvalue) {
  const auto s = gi::numeric_spectrum(gi::discretize(gi::small_world(0.05, 0.1), 500), 3);
  EXPECT_NEAR(s.pairs.front().value, 0.23, 1e-2);
  EXPECT_EQ(s.pairs.size(), 6u);
}

TEST(NumericSpectrum, DeterministicOrderingOfDegeneratePairs) {
  const auto m = gi::discretize(gi::small_world(0.05, 0.1), 128);
  const auto a = gi::numeric_spectrum(m, 5);
  const auto b = gi::numeric_spectrum(m, 5);
  ASSERT_EQ(a.pairs.size(), b.pairs.size());
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    EXPECT_EQ(a.pairs[i].value, b.pairs[i].value);
    EXPECT_EQ(a.pairs[i].function.values, b.pairs[i].function.values);
    EXPECT_NEAR(a.pairs[i].function.values.cwiseAbs().maxCoeff(), 1.0, 1e-14);
  }
  EXPECT_EQ(a.pairs[1].index, 2);
  EXPECT_NEAR(a.pairs[1].value, a.pairs[2].value, 1e-12);
}

TEST(NumericSpectrum, NystromConvergesToClosedForm) {
  const auto g = gi::small_world(0.05, 0.1);
  const auto exact = gi::analytic_spectrum(g, 64).values_with_multiplicity();
  std::vector<double> top(exact.begin(), exact.begin() + 5);
  std::vector<double> bottom;
  {
    std::vector<double> sorted = exact;
    std::sort(sorted.begin(), sorted.end());
    bottom.assign(sorted.begin(), sorted.begin() + 5);
  }
  std::vector<std::vector<double>> gaps;
  for (std::size_t n : {128u, 256u, 512u}) {
    const auto s = gi::full_numeric_spectrum(gi::discretize(g, n));
    std::vector<double> gap;
    for (std::size_t i = 0; i < 5; ++i) gap.push_back(std::abs(s.pairs[i].value - top[i]));
    for (std::size_t i = 0; i < 5; ++i)
      gap.push_back(std::abs(s.pairs[s.pairs.size() - 1 - i].value - bottom[i]));
    gaps.push_back(gap);
  }
  // mu_0 is reproduced exactly by cell averaging, so its gap sits at round-off.
  const auto shrinks = [](double next, double prev) { return next < prev || next < 1e-13; };
  for (std::size_t e = 0; e < 10; ++e) {
    EXPECT_TRUE(shrinks(gaps[1][e], gaps[0][e])) << "eigenvalue " << e;
    EXPECT_TRUE(shrinks(gaps[2][e], gaps[1][e])) << "eigenvalue " << e;
    EXPECT_LT(gaps[2][e], 5e-3) << "eigenvalue " << e;
  }
}
