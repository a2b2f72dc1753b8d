#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "graphon_ising/format.hpp"
#include "graphon_ising/graphon.hpp"
#include "graphon_ising/kernel_matrix.hpp"
#include "graphon_ising/philox.hpp"

namespace graphon_ising {

/// Symmetric 0/1 adjacency matrix without self-loops. Rows are stored as full
/// bitsets so that neighbour scans and popcount dot products stay contiguous;
/// files hold only the upper triangle.
class Adjacency {
 public:
  Adjacency() = default;
  Adjacency(std::size_t n, std::uint64_t seed, std::string source)
      : n_(n), words_((n + 63) / 64), seed_(seed), source_(std::move(source)), bits_(n * words_, 0) {}

  static Adjacency from_edges(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges,
                              std::string source = "explicit") {
    Adjacency a(n, 0, std::move(source));
    for (const auto& [i, j] : edges) {
      if (i >= n || j >= n) throw std::out_of_range("edge endpoint out of range");
      if (i != j) a.set_edge(i, j);
    }
    return a;
  }

  [[nodiscard]] std::size_t size() const { return n_; }
  [[nodiscard]] std::size_t words_per_row() const { return words_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] const std::string& source() const { return source_; }

  [[nodiscard]] bool operator()(std::size_t i, std::size_t j) const {
    return (bits_[i * words_ + j / 64] >> (j % 64)) & 1u;
  }

  [[nodiscard]] std::span<const std::uint64_t> row(std::size_t i) const {
    return {bits_.data() + i * words_, words_};
  }

  [[nodiscard]] std::size_t degree(std::size_t i) const {
    std::size_t d = 0;
    for (const auto w : row(i)) d += static_cast<std::size_t>(std::popcount(w));
    return d;
  }

  [[nodiscard]] std::size_t edge_count() const {
    std::size_t total = 0;
    for (std::size_t i = 0; i < n_; ++i) total += degree(i);
    return total / 2;
  }

  /// Call f(j) for every neighbour j of i, in increasing order.
  template <class F>
  void for_each_neighbor(std::size_t i, F&& f) const {
    const auto r = row(i);
    for (std::size_t w = 0; w < words_; ++w)
      for (std::uint64_t bits = r[w]; bits != 0; bits &= bits - 1)
        f(w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
  }

  /// A x for a real vector x.
  [[nodiscard]] Eigen::VectorXd multiply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y(static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = 0.0;
      for_each_neighbor(i, [&](std::size_t j) { acc += x(static_cast<Eigen::Index>(j)); });
      y(static_cast<Eigen::Index>(i)) = acc;
    }
    return y;
  }

  void set_edge(std::size_t i, std::size_t j) {
    bits_[i * words_ + j / 64] |= std::uint64_t{1} << (j % 64);
    bits_[j * words_ + i / 64] |= std::uint64_t{1} << (i % 64);
  }

  friend bool operator==(const Adjacency& a, const Adjacency& b) {
    return a.n_ == b.n_ && a.seed_ == b.seed_ && a.source_ == b.source_ && a.bits_ == b.bits_;
  }

 private:
  std::size_t n_ = 0;
  std::size_t words_ = 0;
  std::uint64_t seed_ = 0;
  std::string source_;
  std::vector<std::uint64_t> bits_;
};

/// W-random graph: a_ij ~ Bernoulli(W^n_ij) independently for i < j, a_ii = 0.
/// Edge (i, j) draws from the Philox stream keyed by (seed, i, j).
inline Adjacency sample(const Graphon& g, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("sample: need at least two nodes");
  if (n > std::size_t{1} << 31) throw std::invalid_argument("sample: node count too large");
  const CellAverages cells(g, n, Truncation::clamp_to_unit);
  Adjacency a(n, seed, describe(g));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (Philox4x32::uniform(seed, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)) <
          cells(i, j))
        a.set_edge(i, j);
  return a;
}

struct DegreeProfile {
  Eigen::VectorXd empirical;  // d_i / n
  Eigen::VectorXd expected;   // (1/n) sum_{j != i} W^n_ij
};

inline DegreeProfile degree_profile(const Adjacency& a, const Graphon& g) {
  const std::size_t n = a.size();
  const CellAverages cells(g, n, Truncation::clamp_to_unit);
  DegreeProfile p{Eigen::VectorXd(static_cast<Eigen::Index>(n)), Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row += cells(i, j);
    p.empirical(static_cast<Eigen::Index>(i)) = static_cast<double>(a.degree(i)) / static_cast<double>(n);
    p.expected(static_cast<Eigen::Index>(i)) = row / static_cast<double>(n);
  }
  return p;
}

/// Randomised proxy for the cut distance between A and W^n: the largest
/// |v'(A - W^n)v| / n^2 over ±1 probes v (the first probe is the constant
/// vector). The diagonal of W^n is skipped, matching the loop-free graph.
inline double empirical_operator_check(const Adjacency& a, const Graphon& g, std::size_t probes,
                                       std::uint64_t seed = 0) {
  if (probes < 1) throw std::invalid_argument("empirical_operator_check: need at least one probe");
  const std::size_t n = a.size();
  const CellAverages cells(g, n, Truncation::clamp_to_unit);
  std::vector<std::uint64_t> plus(a.words_per_row());
  std::vector<int> v(n);
  double worst = 0.0;
  for (std::size_t probe = 0; probe < probes; ++probe) {
    std::fill(plus.begin(), plus.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const bool up = probe == 0 ||
                      Philox4x32::uniform(seed, static_cast<std::uint32_t>(probe), static_cast<std::uint32_t>(i)) < 0.5;
      v[i] = up ? 1 : -1;
      if (up) plus[i / 64] |= std::uint64_t{1} << (i % 64);
    }
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      // (A v)_i = 2 * #(+1 neighbours) - degree.
      const auto r = a.row(i);
      long long up = 0;
      long long deg = 0;
      for (std::size_t w = 0; w < r.size(); ++w) {
        up += std::popcount(r[w] & plus[w]);
        deg += std::popcount(r[w]);
      }
      double wv = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) wv += cells(i, j) * v[j];
      quad += v[i] * (static_cast<double>(2 * up - deg) - wv);
    }
    worst = std::max(worst, std::abs(quad) / (static_cast<double>(n) * static_cast<double>(n)));
  }
  return worst;
}

/// Largest eigenvalue of A by power iteration (A is entrywise non-negative).
inline double leading_eigenvalue(const Adjacency& a, double tol = 1e-10, int max_iter = 2000) {
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::VectorXd x = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd y = a.multiply(x);
    const double next = x.dot(y);
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    x = y / norm;
    if (std::abs(next - lambda) <= tol * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

// Binary graph file, all integers little-endian:
//   magic "GRAPHONA", u32 version, u32 reserved, u64 n, u64 seed,
//   u32 descriptor length, descriptor bytes,
//   upper-triangle bits (i < j, row-major) packed LSB-first into bytes.
inline constexpr std::array<char, 8> kGraphMagic{'G', 'R', 'A', 'P', 'H', 'O', 'N', 'A'};
inline constexpr std::uint32_t kGraphFormatVersion = 1;

namespace detail {

template <class T>
void put_le(std::ostream& out, T value) {
  for (std::size_t b = 0; b < sizeof(T); ++b) out.put(static_cast<char>((value >> (8 * b)) & 0xFF));
}

template <class T>
T get_le(std::istream& in) {
  T value = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw std::runtime_error("graph file truncated");
    value |= static_cast<T>(static_cast<T>(static_cast<unsigned char>(c)) << (8 * b));
  }
  return value;
}

}  // namespace detail

inline void write_graph(const Adjacency& a, std::ostream& out) {
  out.write(kGraphMagic.data(), kGraphMagic.size());
  detail::put_le<std::uint32_t>(out, kGraphFormatVersion);
  detail::put_le<std::uint32_t>(out, 0);
  detail::put_le<std::uint64_t>(out, a.size());
  detail::put_le<std::uint64_t>(out, a.seed());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.source().size()));
  out.write(a.source().data(), static_cast<std::streamsize>(a.source().size()));
  unsigned char byte = 0;
  int filled = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      if (a(i, j)) byte |= static_cast<unsigned char>(1u << filled);
      if (++filled == 8) {
        out.put(static_cast<char>(byte));
        byte = 0;
        filled = 0;
      }
    }
  if (filled > 0) out.put(static_cast<char>(byte));
  if (!out) throw std::runtime_error("failed writing graph file");
}

inline Adjacency read_graph(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kGraphMagic) throw std::runtime_error("not a graph file (bad magic)");
  const auto version = detail::get_le<std::uint32_t>(in);
  if (version != kGraphFormatVersion)
    throw std::runtime_error("unsupported graph file version " + std::to_string(version));
  (void)detail::get_le<std::uint32_t>(in);
  const auto n = detail::get_le<std::uint64_t>(in);
  const auto seed = detail::get_le<std::uint64_t>(in);
  const auto len = detail::get_le<std::uint32_t>(in);
  std::string source(len, '\0');
  in.read(source.data(), len);
  if (!in) throw std::runtime_error("graph file truncated");
  Adjacency a(static_cast<std::size_t>(n), seed, std::move(source));
  int byte = 0;
  int used = 8;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (used == 8) {
        byte = in.get();
        if (byte == std::char_traits<char>::eof()) throw std::runtime_error("graph file truncated");
        used = 0;
      }
      if ((byte >> used++) & 1) a.set_edge(i, j);
    }
  return a;
}

inline void write_graph(const Adjacency& a, const std::string& path) {
  auto out = open_output(path, true);
  write_graph(a, out);
}

inline Adjacency read_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open graph file '" + path + "'");
  return read_graph(in);
}

/// One "i j" line per edge with i < j (0-based).
inline void write_edge_list(const Adjacency& a, std::ostream& out) {
  for (std::size_t i = 0; i < a.size(); ++i)
    a.for_each_neighbor(i, [&](std::size_t j) {
      if (j > i) out << i << ' ' << j << '\n';
    });
}

}  // namespace graphon_ising
