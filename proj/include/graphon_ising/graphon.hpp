#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "graphon_ising/format.hpp"

namespace graphon_ising {

enum class Domain { interval, torus };

/// W == p.
struct ErdosRenyi {
  double p;
};

/// W(x, y) = (xy)^(-alpha), alpha in (0, 1/2).
struct PowerLaw {
  double alpha;
};

/// W(x, y) = K(x - y) with K = 1 - p on |x| <= r and p elsewhere, 1-periodic.
struct SmallWorld {
  double p;
  double r;
};

/// Piecewise-constant kernel on an m x m grid of equal cells.
struct Tabulated {
  Eigen::MatrixXd grid;
};

using GraphonKind = std::variant<ErdosRenyi, PowerLaw, SmallWorld, Tabulated>;

struct Graphon {
  GraphonKind kind;
  Domain domain = Domain::interval;

  template <class T>
  [[nodiscard]] bool is() const {
    return std::holds_alternative<T>(kind);
  }
  template <class T>
  [[nodiscard]] const T& as() const {
    return std::get<T>(kind);
  }
};

/// Point value of a graphon. `truncated` is set when the raw kernel exceeded 1
/// and was clamped to a valid edge probability.
struct KernelValue {
  double value;
  bool truncated = false;
};

inline Graphon erdos_renyi(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("ER: p must lie in [0, 1]");
  return {ErdosRenyi{p}, Domain::interval};
}

inline Graphon power_law(double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5))
    throw std::invalid_argument("power-law: alpha must lie in (0, 1/2)");
  return {PowerLaw{alpha}, Domain::interval};
}

inline Graphon small_world(double p, double r) {
  if (!(p >= 0.0 && p < 0.5)) throw std::invalid_argument("small-world: p must lie in [0, 1/2)");
  if (!(r > 0.0 && r < 0.5)) throw std::invalid_argument("small-world: r must lie in (0, 1/2)");
  return {SmallWorld{p, r}, Domain::torus};
}

inline Graphon tabulated(Eigen::MatrixXd grid, Domain domain = Domain::interval) {
  if (grid.rows() == 0 || grid.rows() != grid.cols())
    throw std::invalid_argument("tabulated: grid must be square and non-empty");
  if (grid.minCoeff() < 0.0 || grid.maxCoeff() > 1.0)
    throw std::invalid_argument("tabulated: values must lie in [0, 1]");
  if ((grid - grid.transpose()).cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("tabulated: grid must be symmetric");
  return {Tabulated{std::move(grid)}, domain};
}

namespace detail {

/// Reduce to [-1/2, 1/2).
inline double wrap_centered(double d) {
  d -= std::floor(d + 0.5);
  return d;
}

/// Reduce to [0, 1).
inline double wrap_unit(double x) { return x - std::floor(x); }

}  // namespace detail

inline KernelValue eval(const Graphon& g, double x, double y) {
  if (g.domain == Domain::torus && !g.is<SmallWorld>()) {
    x = detail::wrap_unit(x);
    y = detail::wrap_unit(y);
  }
  return std::visit(
      [&](const auto& k) -> KernelValue {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ErdosRenyi>) {
          return {k.p};
        } else if constexpr (std::is_same_v<T, PowerLaw>) {
          if (x <= 0.0 || y <= 0.0) return {1.0, true};
          const double v = std::pow(x * y, -k.alpha);
          if (v > 1.0) return {1.0, true};
          return {v};
        } else if constexpr (std::is_same_v<T, SmallWorld>) {
          const double d = std::abs(detail::wrap_centered(x - y));
          return {d <= k.r ? 1.0 - k.p : k.p};
        } else {
          const auto m = k.grid.rows();
          const auto cell = [m](double t) {
            return std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(t * m)), 0, m - 1);
          };
          return {k.grid(cell(x), cell(y))};
        }
      },
      g.kind);
}

/// One-line descriptor, e.g. "smallworld p=0.05 r=0.1 domain=torus".
inline std::string describe(const Graphon& g) {
  std::ostringstream os;
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ErdosRenyi>) {
          os << "er p=" << format_double(k.p);
        } else if constexpr (std::is_same_v<T, PowerLaw>) {
          os << "powerlaw alpha=" << format_double(k.alpha);
        } else if constexpr (std::is_same_v<T, SmallWorld>) {
          os << "smallworld p=" << format_double(k.p) << " r=" << format_double(k.r);
        } else {
          os << "tabulated size=" << k.grid.rows();
        }
      },
      g.kind);
  os << " domain=" << (g.domain == Domain::torus ? "torus" : "interval");
  return os.str();
}

using ConfigRecord = std::map<std::string, std::string>;

/// Load a tabulated grid from a whitespace- or comma-separated square table.
inline Eigen::MatrixXd read_grid(const std::string& path);

/// Build a graphon from a {variant, parameters, domain} record. Recognised
/// keys: graphon (er|powerlaw|smallworld|tabulated), p, alpha, r, grid_file,
/// domain (interval|torus).
inline Graphon graphon_from_record(const ConfigRecord& record) {
  const auto get = [&](const std::string& key) -> const std::string& {
    const auto it = record.find(key);
    if (it == record.end()) throw std::invalid_argument("graphon record: missing '" + key + "'");
    return it->second;
  };
  const std::string& variant = get("graphon");
  Graphon g;
  if (variant == "er") {
    g = erdos_renyi(parse_double(get("p")));
  } else if (variant == "powerlaw") {
    g = power_law(parse_double(get("alpha")));
  } else if (variant == "smallworld") {
    g = small_world(parse_double(get("p")), parse_double(get("r")));
  } else if (variant == "tabulated") {
    g = tabulated(read_grid(get("grid_file")));
  } else {
    throw std::invalid_argument("graphon record: unknown variant '" + variant + "'");
  }
  if (const auto it = record.find("domain"); it != record.end()) {
    if (it->second == "torus") {
      g.domain = Domain::torus;
    } else if (it->second == "interval") {
      if (g.is<SmallWorld>())
        throw std::invalid_argument("graphon record: small-world kernel is defined on the torus");
      g.domain = Domain::interval;
    } else {
      throw std::invalid_argument("graphon record: unknown domain '" + it->second + "'");
    }
  }
  return g;
}

/// Parse the output of describe() (tabulated grids need an extra grid_file).
inline Graphon graphon_from_descriptor(const std::string& descriptor) {
  std::istringstream is(descriptor);
  ConfigRecord record;
  is >> record["graphon"];
  for (std::string token; is >> token;) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("bad descriptor token '" + token + "'");
    record[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return graphon_from_record(record);
}

inline Eigen::MatrixXd read_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read grid file '" + path + "'");
  std::vector<std::vector<double>> rows;
  for (std::string line; std::getline(in, line);) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::vector<double> row;
    for (std::string cell; ls >> cell;) row.push_back(parse_double(cell));
    if (!row.empty()) rows.push_back(std::move(row));
  }
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd grid(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != m)
      throw std::invalid_argument("grid file '" + path + "' is not square");
    for (Eigen::Index j = 0; j < m; ++j) grid(i, j) = rows[i][j];
  }
  return grid;
}

}  // namespace graphon_ising
