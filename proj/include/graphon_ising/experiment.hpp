#pragma once

// Reproducible experiments: a flat key-value configuration and one runner per
// command, each writing plain CSV/JSON into the output directory.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphon_ising/bifurcation.hpp"
#include "graphon_ising/format.hpp"
#include "graphon_ising/montecarlo.hpp"
#include "graphon_ising/wrandom.hpp"

namespace graphon_ising {

/// Bad or inconsistent configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation that did not produce a trustworthy result (exit code 3).
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kConfigVersion = 1;

struct ConfigKey {
  std::string name;
  std::string fallback;  // empty: no default
  std::string help;
};

/// Every recognised configuration key. Config files and command-line flags
/// share these names.
inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"version", "1", "config format version"},
      {"graphon", "smallworld", "er | powerlaw | smallworld | tabulated"},
      {"p", "0.05", "ER density or small-world rewiring level"},
      {"alpha", "0.2", "power-law exponent in (0, 1/2)"},
      {"r", "0.1", "small-world neighbourhood radius"},
      {"grid-file", "", "square table for the tabulated graphon"},
      {"domain", "", "interval | torus (default depends on graphon)"},
      {"n", "256", "grid size for spectrum, solve and diagram"},
      {"k-max", "10", "highest Fourier mode in analytic spectra"},
      {"truncation", "none", "clamp | none: clamp kernel values to [0, 1] for operator work"},
      {"extremes", "4", "numeric eigenvalues reported from each end"},
      {"beta-min", "0", "diagram: lower end of the beta range"},
      {"beta-max", "8", "diagram: upper end of the beta range"},
      {"beta-step", "0.05", "diagram: largest continuation step"},
      {"eig-floor", "1e-12", "diagram: eigenvalues below this in modulus are ignored"},
      {"delta", "0.01", "diagram: relative offset from beta_c for branch switching"},
      {"tol", "1e-10", "residual tolerance"},
      {"beta", "3", "solve: inverse temperature"},
      {"init", "random", "solve: random | constant | mode"},
      {"init-mode", "1", "solve: mode used by init = mode"},
      {"init-amplitude", "0.5", "solve: initial amplitude"},
      {"method", "newton", "solve: newton | fixed-point"},
      {"max-iter", "10000", "solve: iteration cap"},
      {"damping", "0.7", "solve: fixed-point damping"},
      {"nodes", "1000", "sample and mc: number of nodes"},
      {"edge-list", "false", "sample: also write a text edge list"},
      {"probes", "4", "sample: probes for the operator check"},
      {"graph-file", "", "mc: load the graph instead of sampling"},
      {"coupling", "1", "mc: J = 1 (FM) or -1 (AFM)"},
      {"temperature", "", "mc: absolute temperature (overrides temperature-mode)"},
      {"temperature-mode", "0", "mc: T is set relative to |mu_k| of this mode"},
      {"temperature-offset", "-0.05", "mc: T = |mu_k| (1 + offset)"},
      {"sweeps", "1000", "mc: sweeps per chain"},
      {"measure-every", "10", "mc: sweeps between records"},
      {"mc-init", "random", "mc: random | mode"},
      {"mc-init-mode", "1", "mc: mode for mc-init = mode"},
      {"mc-k-max", "10", "mc: overlaps q_0 .. q_k recorded"},
      {"bins", "0", "mc: profile bins per record (0 disables)"},
      {"chains", "1", "mc: independent chains on the same graph"},
      {"dwell-mode", "1", "mc: mode for the dwell-time summary"},
      {"dwell-threshold", "0.5", "mc: overlap threshold for the dwell-time summary"},
      {"seed", "0", "master seed"},
      {"out-dir", "out", "output directory"},
      {"threads", "1", "worker threads (0: all cores)"},
  };
  return keys;
}

struct ExperimentConfig {
  Graphon graphon = small_world(0.05, 0.1);
  ConfigRecord values;  // every key, resolved

  [[nodiscard]] const std::string& str(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
  }
  [[nodiscard]] double real(const std::string& key) const {
    try {
      return parse_double(str(key));
    } catch (const std::invalid_argument&) {
      throw ConfigError("'" + key + "' must be a number, got '" + str(key) + "'");
    }
  }
  [[nodiscard]] long integer(const std::string& key, long lo, long hi) const {
    const double v = real(key);
    if (v != std::floor(v) || v < static_cast<double>(lo) || v > static_cast<double>(hi))
      throw ConfigError("'" + key + "' must be an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<long>(v);
  }
  [[nodiscard]] bool flag(const std::string& key) const {
    const auto& s = str(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("'" + key + "' must be true or false");
  }
  [[nodiscard]] std::uint64_t seed() const {
    const auto& s = str("seed");
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("'seed' must be a non-negative integer");
    return v;
  }
  [[nodiscard]] std::filesystem::path out_dir() const { return str("out-dir"); }
  [[nodiscard]] unsigned threads() const {
    const auto t = static_cast<unsigned>(integer("threads", 0, 1024));
    return t == 0 ? std::max(1u, std::thread::hardware_concurrency()) : t;
  }

  /// Fill defaults, validate and build the graphon. Unknown keys are rejected.
  static ExperimentConfig from_record(const ConfigRecord& given) {
    ExperimentConfig cfg;
    for (const auto& [key, value] : given) {
      const auto& keys = config_keys();
      if (std::none_of(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == key; }))
        throw ConfigError("unknown config key '" + key + "'");
      cfg.values[key] = value;
    }
    for (const auto& k : config_keys())
      if (!cfg.values.count(k.name)) cfg.values[k.name] = k.fallback;
    if (cfg.integer("version", 0, 1 << 20) != kConfigVersion)
      throw ConfigError("unsupported config version " + cfg.str("version"));

    ConfigRecord g{{"graphon", cfg.str("graphon")}};
    for (const char* key : {"p", "alpha", "r", "domain"})
      if (!cfg.str(key).empty()) g[key] = cfg.str(key);
    if (!cfg.str("grid-file").empty()) g["grid_file"] = cfg.str("grid-file");
    try {
      cfg.graphon = graphon_from_record(g);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    cfg.values["domain"] = cfg.graphon.domain == Domain::torus ? "torus" : "interval";

    // Touch every typed key once so that malformed values fail before any work.
    (void)cfg.integer("n", 1, 1 << 16);
    (void)cfg.integer("k-max", 0, 1 << 20);
    (void)cfg.integer("extremes", 0, 1 << 20);
    for (const char* key : {"beta-min", "beta-max", "beta", "init-amplitude", "temperature-offset", "dwell-threshold"})
      (void)cfg.real(key);
    for (const char* key : {"beta-step", "delta", "tol", "damping"})
      if (!(cfg.real(key) > 0.0)) throw ConfigError(std::string("'") + key + "' must be positive");
    if (!(cfg.real("eig-floor") >= 0.0)) throw ConfigError("'eig-floor' must be non-negative");
    if (!(cfg.real("beta-min") < cfg.real("beta-max"))) throw ConfigError("need beta-min < beta-max");
    if (cfg.str("truncation") != "clamp" && cfg.str("truncation") != "none")
      throw ConfigError("'truncation' must be clamp or none");
    if (cfg.str("init") != "random" && cfg.str("init") != "constant" && cfg.str("init") != "mode")
      throw ConfigError("'init' must be random, constant or mode");
    if (cfg.str("method") != "newton" && cfg.str("method") != "fixed-point")
      throw ConfigError("'method' must be newton or fixed-point");
    if (cfg.str("mc-init") != "random" && cfg.str("mc-init") != "mode")
      throw ConfigError("'mc-init' must be random or mode");
    (void)cfg.integer("init-mode", 0, 1 << 20);
    (void)cfg.integer("max-iter", 1, 1L << 40);
    (void)cfg.integer("nodes", 2, 1L << 31);
    (void)cfg.integer("probes", 1, 1 << 20);
    (void)cfg.flag("edge-list");
    const long j = cfg.integer("coupling", -1, 1);
    if (j == 0) throw ConfigError("'coupling' must be 1 or -1");
    if (!cfg.str("temperature").empty() && !(cfg.real("temperature") > 0.0))
      throw ConfigError("'temperature' must be positive");
    (void)cfg.integer("temperature-mode", 0, 1 << 20);
    (void)cfg.integer("sweeps", 1, 1L << 40);
    (void)cfg.integer("measure-every", 1, 1L << 40);
    (void)cfg.integer("mc-init-mode", 0, 1 << 20);
    (void)cfg.integer("mc-k-max", 0, 1 << 16);
    (void)cfg.integer("bins", 0, 1 << 20);
    (void)cfg.integer("chains", 1, 1 << 16);
    (void)cfg.integer("dwell-mode", 0, cfg.integer("mc-k-max", 0, 1 << 16));
    (void)cfg.seed();
    (void)cfg.threads();
    if (cfg.str("out-dir").empty()) throw ConfigError("'out-dir' must not be empty");
    return cfg;
  }

  /// Resolved configuration as "key = value" lines, readable by the CLI.
  /// Machine-local settings (out-dir, threads) do not affect outputs and are
  /// written as comments.
  [[nodiscard]] std::string serialize(const std::string& command) const {
    std::string text = "# graphon-ising resolved config\n# command: " + command + "\n";
    text += "version = " + str("version") + "\n";
    for (const auto& k : config_keys()) {
      if (k.name == "version") continue;
      const auto& v = str(k.name);
      if (v.empty()) continue;
      const bool local = k.name == "out-dir" || k.name == "threads";
      text += (local ? "# " : "") + k.name + " = " + v + "\n";
    }
    return text;
  }
};

namespace detail {

/// Run task(i) for i in [0, count) on `threads` workers; rethrows the first
/// failure by index so the error does not depend on scheduling.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& task) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned extra = std::min<std::size_t>(threads, count) > 1 ? std::min<std::size_t>(threads, count) - 1 : 0;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < extra; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::string csv_line(std::initializer_list<std::string> cells) {
  std::string line;
  for (const auto& c : cells) {
    if (!line.empty()) line += ',';
    line += c;
  }
  return line + '\n';
}

inline std::string path_in(const ExperimentConfig& cfg, const std::string& name) {
  return (cfg.out_dir() / name).string();
}

inline void write_text(const ExperimentConfig& cfg, const std::string& name, const std::string& text) {
  auto out = open_output(path_in(cfg, name));
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path_in(cfg, name) + "'");
}

inline void write_json(const ExperimentConfig& cfg, const std::string& name, const nlohmann::ordered_json& j) {
  write_text(cfg, name, j.dump(2) + "\n");
}

inline void prepare(const ExperimentConfig& cfg, const std::string& command) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir(), ec);
  if (ec) throw ConfigError("cannot create output directory '" + cfg.out_dir().string() + "': " + ec.message());
  write_text(cfg, "config.resolved", cfg.serialize(command));
}

inline KernelMatrix operator_kernel(const ExperimentConfig& cfg) {
  return discretize(cfg.graphon, static_cast<std::size_t>(cfg.integer("n", 1, 1 << 16)),
                    cfg.str("truncation") == "clamp" ? Truncation::clamp_to_unit : Truncation::none);
}

inline std::optional<Spectrum> try_analytic(const ExperimentConfig& cfg) {
  try {
    return analytic_spectrum(cfg.graphon, static_cast<int>(cfg.integer("k-max", 0, 1 << 20)));
  } catch (const UnsupportedVariant&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// spectrum.csv: analytic eigenvalues next to the closest unused numeric
/// eigenvalues of the discretised kernel; extremes.csv: the numeric spectrum's
/// ends.
inline void run_spectrum(const ExperimentConfig& cfg) {
  detail::prepare(cfg, "spectrum");
  const auto kernel = detail::operator_kernel(cfg);
  const auto numeric = full_numeric_spectrum(kernel);
  const auto analytic = detail::try_analytic(cfg);

  std::string csv = "k,eigenvalue,multiplicity,eigfn_descriptor,numeric_eigenvalue,deviation\n";
  if (analytic) {
    std::vector<bool> used(numeric.pairs.size(), false);
    for (const auto& p : analytic->pairs) {
      for (int copy = 0; copy < p.multiplicity; ++copy) {
        std::size_t best = numeric.pairs.size();
        for (std::size_t i = 0; i < numeric.pairs.size(); ++i)
          if (!used[i] && (best == numeric.pairs.size() ||
                           std::abs(numeric.pairs[i].value - p.value) < std::abs(numeric.pairs[best].value - p.value)))
            best = i;
        if (best == numeric.pairs.size()) break;
        used[best] = true;
        if (copy == 0) {
          const double v = numeric.pairs[best].value;
          csv += detail::csv_line({std::to_string(p.index), format_double(p.value), std::to_string(p.multiplicity),
                                   p.function.descriptor(), format_double(v), format_double(v - p.value)});
        }
      }
    }
  } else {
    for (const auto& p : numeric_spectrum(kernel, static_cast<std::size_t>(cfg.integer("k-max", 0, 1 << 20)) + 1).pairs)
      csv += detail::csv_line({std::to_string(p.index), format_double(p.value), "1", "grid", format_double(p.value), "0"});
  }
  detail::write_text(cfg, "spectrum.csv", csv);

  std::string ext = "index,eigenvalue\n";
  for (const auto& p : numeric_spectrum(kernel, static_cast<std::size_t>(cfg.integer("extremes", 0, 1 << 20))).pairs)
    ext += detail::csv_line({std::to_string(p.index), format_double(p.value)});
  detail::write_text(cfg, "extremes.csv", ext);
}

/// branches.csv plus manifest.json. Branch 0 is the trivial branch over the
/// whole beta range; every critical point inside the range contributes two
/// arms (+xi and -xi) continued away from beta_c to the end of the range and
/// back toward beta_c.
inline void run_diagram(const ExperimentConfig& cfg) {
  detail::prepare(cfg, "diagram");
  const auto kernel = detail::operator_kernel(cfg);
  const double lo = cfg.real("beta-min");
  const double hi = cfg.real("beta-max");
  const double tol = cfg.real("tol");
  const double step = cfg.real("beta-step");
  const double delta = cfg.real("delta");

  Spectrum spectrum;
  if (auto a = detail::try_analytic(cfg)) {
    spectrum = std::move(*a);
  } else {
    spectrum = numeric_spectrum(kernel, static_cast<std::size_t>(cfg.integer("k-max", 0, 1 << 20)) + 1);
  }
  std::vector<BifurcationPoint> points;
  for (const auto& bp : critical_points(spectrum, spectrum.pairs.size(), cfg.real("eig-floor")))
    if (bp.beta_c > lo && bp.beta_c < hi) points.push_back(bp);

  struct Arm {
    int id = 0;
    std::optional<BifurcationPoint> origin;
    bool negate = false;
    Branch branch;
    std::string status = "ok";
  };
  std::vector<Arm> arms;
  const auto add_arm = [&](std::optional<BifurcationPoint> origin, bool negate) {
    Arm arm;
    arm.id = static_cast<int>(arms.size());
    arm.origin = std::move(origin);
    arm.negate = negate;
    arms.push_back(std::move(arm));
  };
  add_arm(std::nullopt, false);
  for (const auto& bp : points) {
    add_arm(bp, false);
    add_arm(bp, true);
  }

  detail::parallel_for(arms.size(), cfg.threads(), [&](std::size_t i) {
    Arm& arm = arms[i];
    ContinuationOptions co;
    co.tol = tol;
    co.max_step = step;
    co.initial_step = std::min(step, 0.01);
    if (!arm.origin) {
      co.beta_end = hi;
      arm.branch = continue_branch(kernel, {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kernel.size())), lo}, co);
      return;
    }
    const BifurcationPoint& bp = *arm.origin;
    BranchSwitchOptions so;
    so.delta = delta;
    so.negate = arm.negate;
    so.solve.tol = tol;
    SwitchResult sw;
    try {
      sw = branch_switch(bp, kernel, so);
    } catch (const BranchNotFound& e) {
      arm.status = std::string("branch_not_found: ") + e.what();
      arm.branch.origin = bp;
      return;
    } catch (const SingularJacobian& e) {
      arm.status = std::string("singular: ") + e.what();
      arm.branch.origin = bp;
      return;
    }
    co.phase = sw.phase;
    const double near = bp.beta_c * 1.001;
    Branch toward;
    if ((sw.state.beta - near) * (sw.state.beta - bp.beta_c) > 0 && std::abs(sw.state.beta - near) > 1e-12) {
      co.beta_end = near;
      toward = continue_branch(kernel, sw.state, co, bp);
    }
    co.beta_end = bp.regime == Regime::ferromagnetic ? hi : lo;
    arm.branch = continue_branch(kernel, sw.state, co, bp);
    if (!toward.points.empty()) {
      arm.branch.points.insert(arm.branch.points.begin(), toward.points.rbegin(), toward.points.rend() - 1);
      arm.branch.truncated = arm.branch.truncated || toward.truncated;
      arm.branch.rejected_steps += toward.rejected_steps;
    }
  });

  std::string csv = "branch_id,k,beta,amplitude,probe_value,stability,modal_amplitude\n";
  nlohmann::ordered_json manifest;
  manifest["version"] = kConfigVersion;
  manifest["graphon"] = describe(cfg.graphon);
  manifest["n"] = kernel.size();
  manifest["beta_range"] = {lo, hi};
  manifest["critical_points"] = nlohmann::ordered_json::array();
  for (const auto& bp : points)
    manifest["critical_points"].push_back({{"k", bp.index},
                                           {"eigenvalue", bp.lambda},
                                           {"beta_c", bp.beta_c},
                                           {"regime", to_string(bp.regime)},
                                           {"mode", bp.mode.descriptor()}});
  manifest["branches"] = nlohmann::ordered_json::array();
  for (const auto& arm : arms) {
    const int k = arm.origin ? arm.origin->index : -1;
    for (const auto& p : arm.branch.points)
      csv += detail::csv_line({std::to_string(arm.id), std::to_string(k), format_double(p.beta), format_double(p.amplitude),
                               format_double(p.probe_value), p.stability ? to_string(*p.stability) : "",
                               format_double(p.modal_amplitude)});
    nlohmann::ordered_json b{{"branch_id", arm.id}, {"k", k}};
    b["kind"] = arm.origin ? "nontrivial" : "trivial";
    if (arm.origin) {
      b["regime"] = to_string(arm.origin->regime);
      b["beta_c"] = arm.origin->beta_c;
      b["sign"] = arm.negate ? -1 : 1;
    }
    b["status"] = arm.status;
    b["points"] = arm.branch.points.size();
    b["truncated"] = arm.branch.truncated;
    b["rejected_steps"] = arm.branch.rejected_steps;
    if (!arm.branch.points.empty())
      b["beta_span"] = {arm.branch.points.front().beta, arm.branch.points.back().beta};
    manifest["branches"].push_back(b);
  }
  detail::write_text(cfg, "branches.csv", csv);
  detail::write_json(cfg, "manifest.json", manifest);
}

/// solution.csv (x, u) and convergence.json. Throws NumericalFailure after
/// writing both files if the solver did not converge.
inline void run_solve(const ExperimentConfig& cfg) {
  detail::prepare(cfg, "solve");
  const auto kernel = detail::operator_kernel(cfg);
  const auto n = static_cast<Eigen::Index>(kernel.size());
  const double beta = cfg.real("beta");
  const double amp = cfg.real("init-amplitude");
  if (!(std::abs(amp) <= 1.0)) throw ConfigError("'init-amplitude' must lie in [-1, 1]");

  SolveOptions opt;
  opt.method = cfg.str("method") == "newton" ? SolveMethod::newton : SolveMethod::fixed_point;
  opt.tol = cfg.real("tol");
  opt.max_iter = static_cast<int>(std::min<long>(cfg.integer("max-iter", 1, 1L << 40), 1 << 30));
  opt.damping = cfg.real("damping");
  const Eigen::VectorXd x = grid_points(kernel.size());

  Eigen::VectorXd init(n);
  const auto& kind = cfg.str("init");
  if (kind == "constant") {
    init.setConstant(amp);
  } else if (kind == "random") {
    for (Eigen::Index i = 0; i < n; ++i)
      init(i) = amp * (2.0 * Philox4x32::uniform(cfg.seed(), 0xC0FFEEu, static_cast<std::uint32_t>(i)) - 1.0);
  } else {
    const int k = static_cast<int>(cfg.integer("init-mode", 0, 1 << 20));
    Eigenfunction f = Eigenfunction::cosine(k);
    if (auto a = detail::try_analytic(cfg)) {
      for (const auto& p : a->pairs)
        if (p.index == k) f = p.function;
    }
    init = amp * f.sample(kernel.size());
    if (kernel.translation_invariant() && k >= 1 && f.kind == Eigenfunction::Kind::cosine)
      opt.phase = (2.0 * std::numbers::pi * k * x.array()).sin().matrix();
  }

  SolveResult r;
  try {
    r = solve(kernel, beta, init, opt);
  } catch (const SingularJacobian& e) {
    throw NumericalFailure(e.what());
  }
  std::string csv = "x,u\n";
  for (Eigen::Index i = 0; i < n; ++i) csv += detail::csv_line({format_double(x(i)), format_double(r.state.u(i))});
  detail::write_text(cfg, "solution.csv", csv);

  nlohmann::ordered_json j{{"iterations", r.record.iterations},
                           {"final_residual", r.record.final_residual},
                           {"method", to_string(r.record.method)},
                           {"converged", r.record.converged},
                           {"beta", beta}};
  if (r.record.converged) {
    if (beta != 0.0) j["free_energy"] = free_energy(kernel, r.state.u, 1.0 / beta);
    const auto s = stability(kernel, r.state);
    j["stability"] = to_string(s.classification);
    j["leading_multiplier"] = s.leading_multiplier;
  }
  detail::write_json(cfg, "convergence.json", j);
  if (!r.record.converged)
    throw NumericalFailure("solver did not converge (residual " + format_double(r.record.final_residual) + ")");
}

/// graph.bin, degrees.csv, summary.json and optionally edges.txt.
inline void run_sample(const ExperimentConfig& cfg) {
  detail::prepare(cfg, "sample");
  const auto n = static_cast<std::size_t>(cfg.integer("nodes", 2, 1L << 31));
  const auto a = sample(cfg.graphon, n, cfg.seed());
  write_graph(a, detail::path_in(cfg, "graph.bin"));
  if (cfg.flag("edge-list")) {
    auto out = open_output(detail::path_in(cfg, "edges.txt"));
    write_edge_list(a, out);
  }
  const auto prof = degree_profile(a, cfg.graphon);
  std::string csv = "i,x,degree_over_n,expected\n";
  const Eigen::VectorXd x = grid_points(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    csv += detail::csv_line({std::to_string(i), format_double(x(ii)), format_double(prof.empirical(ii)),
                             format_double(prof.expected(ii))});
  }
  detail::write_text(cfg, "degrees.csv", csv);
  nlohmann::ordered_json j{{"graphon", describe(cfg.graphon)},
                           {"nodes", n},
                           {"seed", cfg.seed()},
                           {"edges", a.edge_count()},
                           {"leading_eigenvalue_over_n", leading_eigenvalue(a) / static_cast<double>(n)},
                           {"operator_deviation",
                            empirical_operator_check(a, cfg.graphon, static_cast<std::size_t>(cfg.integer("probes", 1, 1 << 20)),
                                                     cfg.seed())},
                           {"max_degree_deviation", (prof.empirical - prof.expected).cwiseAbs().maxCoeff()}};
  detail::write_json(cfg, "summary.json", j);
}

/// Temperature for mc: explicit, or |mu_k| (1 + offset) for the configured
/// mode of graphon g.
inline double mc_temperature(const ExperimentConfig& cfg, const Graphon& g) {
  if (!cfg.str("temperature").empty()) return cfg.real("temperature");
  const int k = static_cast<int>(cfg.integer("temperature-mode", 0, 1 << 20));
  double mu = 0.0;
  bool found = false;
  if (g.is<SmallWorld>()) {
    mu = small_world_eigenvalue(g.as<SmallWorld>(), k);
    found = true;
  } else if (!g.is<Tabulated>()) {
    for (const auto& p : analytic_spectrum(g, k).pairs)
      if (p.index == k) {
        mu = p.value;
        found = true;
      }
  }
  if (!found) throw ConfigError("no analytic eigenvalue for temperature-mode " + std::to_string(k) + "; set temperature");
  const double t = std::abs(mu) * (1.0 + cfg.real("temperature-offset"));
  if (!(t > 0.0)) throw ConfigError("resolved temperature " + format_double(t) + " is not positive");
  return t;
}

/// Chain c runs with this seed; the graph itself uses the master seed.
inline std::uint64_t chain_seed(std::uint64_t seed, std::size_t chain) {
  const auto w = Philox4x32::generate({static_cast<std::uint32_t>(chain), 0x6D63u, 0, 0}, Philox4x32::key_from_seed(seed));
  return (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
}

/// Per chain c: trajectory_c.csv, snapshot_c.csv (x, sigma) and, with bins,
/// profile_c.csv; summary.json collects temperatures and dwell times.
inline void run_mc(const ExperimentConfig& cfg) {
  detail::prepare(cfg, "mc");
  Adjacency a;
  Graphon g = cfg.graphon;
  if (const auto& file = cfg.str("graph-file"); !file.empty()) {
    if (!std::filesystem::exists(file)) throw ConfigError("graph file '" + file + "' not found");
    a = read_graph(file);
    // A loaded graph carries its own graphon; prefer it for mode temperatures.
    try {
      g = graphon_from_descriptor(a.source());
    } catch (const std::invalid_argument&) {
    }
  } else {
    a = sample(cfg.graphon, static_cast<std::size_t>(cfg.integer("nodes", 2, 1L << 31)), cfg.seed());
  }
  const std::size_t n = a.size();
  const auto chains = static_cast<std::size_t>(cfg.integer("chains", 1, 1 << 16));
  QuenchOptions base;
  base.coupling = static_cast<int>(cfg.integer("coupling", -1, 1));
  base.temperature = mc_temperature(cfg, g);
  base.sweeps = cfg.integer("sweeps", 1, 1L << 40);
  base.measure_every = cfg.integer("measure-every", 1, 1L << 40);
  base.k_max = static_cast<int>(cfg.integer("mc-k-max", 0, 1 << 16));
  base.bins = static_cast<std::size_t>(cfg.integer("bins", 0, 1 << 20));
  if (cfg.str("mc-init") == "mode")
    base.init = InitialCondition::from_mode(static_cast<int>(cfg.integer("mc-init-mode", 0, 1 << 20)));

  std::vector<std::optional<QuenchResult>> slots(chains);
  detail::parallel_for(chains, cfg.threads(), [&](std::size_t c) {
    QuenchOptions opt = base;
    opt.seed = chain_seed(cfg.seed(), c);
    slots[c] = quench(a, opt);
  });

  const Eigen::VectorXd x = grid_points(n);
  const int dwell_mode = static_cast<int>(cfg.integer("dwell-mode", 0, base.k_max));
  const double threshold = cfg.real("dwell-threshold");
  nlohmann::ordered_json summary{{"graph", a.source()},
                                 {"nodes", n},
                                 {"graph_seed", a.seed()},
                                 {"coupling", base.coupling},
                                 {"temperature", base.temperature},
                                 {"dwell_mode", dwell_mode},
                                 {"dwell_threshold", threshold},
                                 {"chains", nlohmann::ordered_json::array()}};
  for (std::size_t c = 0; c < chains; ++c) {
    const auto& res = *slots[c];
    const std::string tag = std::to_string(c);
    std::string traj = "sweep,energy_per_spin";
    for (int k = 0; k <= base.k_max; ++k) traj += ",q_" + std::to_string(k);
    traj += ",acceptance\n";
    for (const auto& r : res.trajectory.records) {
      traj += std::to_string(r.sweep) + ',' + format_double(r.energy);
      for (const double q : r.overlaps) traj += ',' + format_double(q);
      traj += ',' + format_double(r.acceptance) + '\n';
    }
    detail::write_text(cfg, "trajectory_" + tag + ".csv", traj);

    std::string snap = "x,sigma\n";
    for (std::size_t i = 0; i < n; ++i)
      snap += detail::csv_line({format_double(x(static_cast<Eigen::Index>(i))), std::to_string(res.final_state.spins()[i])});
    detail::write_text(cfg, "snapshot_" + tag + ".csv", snap);

    if (base.bins > 0) {
      std::string prof = "sweep";
      for (std::size_t b = 0; b < base.bins; ++b) prof += ",bin_" + std::to_string(b);
      prof += '\n';
      for (const auto& r : res.trajectory.records) {
        prof += std::to_string(r.sweep);
        for (const double m : r.profile) prof += ',' + format_double(m);
        prof += '\n';
      }
      detail::write_text(cfg, "profile_" + tag + ".csv", prof);
    }

    const auto dwell = dwell_time(res.trajectory, dwell_mode, threshold);
    const auto& last = res.trajectory.records.back();
    summary["chains"].push_back({{"chain", c},
                                 {"seed", chain_seed(cfg.seed(), c)},
                                 {"dwell_sweeps", dwell.sweeps},
                                 {"dwell_censored", dwell.censored},
                                 {"final_energy_per_spin", last.energy},
                                 {"final_overlaps", last.overlaps}});
  }
  detail::write_json(cfg, "summary.json", summary);
}

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> names = {"spectrum", "diagram", "solve", "sample", "mc"};
  return names;
}

inline void run_command(const std::string& command, const ExperimentConfig& cfg) {
  if (command == "spectrum") return run_spectrum(cfg);
  if (command == "diagram") return run_diagram(cfg);
  if (command == "solve") return run_solve(cfg);
  if (command == "sample") return run_sample(cfg);
  if (command == "mc") return run_mc(cfg);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace graphon_ising
