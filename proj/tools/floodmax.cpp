// Command-line front end: floodmax <fit|predict|cv|gof|prelim|synth> [options]

#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "floodmax/config.hpp"
#include "floodmax/run.hpp"

using namespace floodmax;

int main(int argc, char** argv) {
  CLI::App app{"Bayesian hierarchical model for monthly maxima of river flow"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> chains;
  std::string out_dir;
  bool quiet = false;
  std::vector<std::string> overrides;

  const std::vector<std::pair<Mode, const char*>> modes = {
      {Mode::fit, "Run the MCMC sampler and write posterior samples, diagnostics and summaries"},
      {Mode::predict, "Predict monthly flow quantiles for covariate rows from a previous fit"},
      {Mode::cv, "Leave-one-river-out cross-validation"},
      {Mode::gof, "Per-cell Gumbel ML fits with bootstrap Anderson-Darling tests"},
      {Mode::prelim, "Preliminary analysis: ML fits, GOF, log-linear regression with stepwise AIC"},
      {Mode::synth, "Generate a synthetic data set with known parameters"},
  };
  for (const auto& [mode, help] : modes) {
    CLI::App* sub = app.add_subcommand(mode_name(mode), help);
    sub->add_option("--config", config_path, "Plain-text key = value configuration file");
    sub->add_option("--seed", seed, "Master seed (overrides sampler.seed)");
    sub->add_option("--chains", chains, "Number of chains (overrides sampler.n_chains)")->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "Output directory (overrides paths.output)");
    sub->add_option("--set", overrides, "Extra key=value setting, may be repeated");
    sub->add_flag("--quiet", quiet, "Suppress progress output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  Mode mode = Mode::fit;
  for (const auto& [m, help] : modes)
    if (app.got_subcommand(mode_name(m))) mode = m;

  RunConfig cfg;
  try {
    cfg = config_path.empty() ? parse_config("") : load_config(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError(kv, "--set expects key=value");
      set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.sampler.seed = *seed;
    if (chains) cfg.sampler.n_chains = *chains;
    if (!out_dir.empty()) cfg.paths.output = out_dir;
    cfg.quiet = quiet;
    cfg.validate();
  } catch (const ConfigError& e) {
    std::cerr << "floodmax: error kind=config" << (e.key.empty() ? "" : " key=" + e.key) << " message=\"" << e.what()
              << "\"\n";
    return kExitUsage;
  }
  return run(mode, cfg, quiet ? nullptr : &std::clog, std::cerr);
}
