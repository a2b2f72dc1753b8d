// graphon-ising: spectra, bifurcation diagrams, mean-field solves, W-random
// graphs and Metropolis runs from one key-value configuration.

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "graphon_ising/experiment.hpp"

namespace gi = graphon_ising;

namespace {

constexpr int kConfigErrorExit = 2;
constexpr int kNumericalFailureExit = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ising model on graphons: spectra, mean-field branches, W-random graphs, Monte Carlo"};
  app.set_config("--config", "", "key = value config file (flags override it)");
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);

  std::map<std::string, std::string> raw;
  std::map<std::string, CLI::Option*> options;
  for (const auto& key : gi::config_keys()) {
    std::string help = key.help;
    if (!key.fallback.empty()) help += " [" + key.fallback + "]";
    options[key.name] = app.add_option("--" + key.name, raw[key.name], help);
  }
  std::map<std::string, CLI::App*> subs;
  subs["spectrum"] = app.add_subcommand("spectrum", "analytic and numeric kernel spectra");
  subs["diagram"] = app.add_subcommand("diagram", "bifurcation diagram by branch switching and continuation");
  subs["solve"] = app.add_subcommand("solve", "solve the self-consistency equation at one beta");
  subs["sample"] = app.add_subcommand("sample", "sample a W-random graph");
  subs["mc"] = app.add_subcommand("mc", "Metropolis quench on a W-random graph");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigErrorExit;
  }

  std::string command;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) command = name;

  gi::ConfigRecord given;
  for (const auto& [name, opt] : options)
    if (opt->count() > 0) given[name] = raw[name];

  try {
    const auto cfg = gi::ExperimentConfig::from_record(given);
    gi::run_command(command, cfg);
  } catch (const gi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigErrorExit;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigErrorExit;
  } catch (const gi::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailureExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
