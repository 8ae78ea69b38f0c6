#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "floodmax/priors.hpp"
#include "floodmax/sampler.hpp"
#include "floodmax/synthetic.hpp"

namespace floodmax {

enum class Mode { fit, predict, cv, gof, prelim, synth };

const char* mode_name(Mode m);
std::optional<Mode> parse_mode(const std::string& s);

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& message);
  std::string key;
};

struct PathSettings {
  std::filesystem::path observations;
  std::filesystem::path covariates;
  std::filesystem::path output = "floodmax_out";
  // Directory holding a previous fit (predict mode).
  std::filesystem::path samples;
  // Covariate rows to predict for (predict mode). Defaults to the training covariates.
  std::filesystem::path predict_covariates;
};

struct PredictSettings {
  // Draw fresh residuals per posterior draw (full predictive). false gives the
  // latent regression surface only.
  bool residuals = true;
  std::vector<double> quantiles{0.5, 0.9};
  double interval = 0.8;
};

struct CvSettings {
  double data_quantile = 0.9;
  // Sample quantiles above 0.9 are refused unless this is set.
  bool allow_high_quantile = false;
};

struct ReportSettings {
  bool cell_fits = true;
  double cdf_band = 0.95;
  int density_grid = 256;
  int min_cell_obs = 5;
};

struct RunConfig {
  PathSettings paths;
  SamplerConfig sampler;
  double kappa = 1.0;
  PriorOverrides priors;
  int gof_n_boot = 999;
  PredictSettings predict;
  CvSettings cv;
  ReportSettings report;
  SynthSettings synth;
  bool quiet = false;

  void validate() const;
  // Every setting as sorted key=value lines, output path and quiet excluded.
  std::string canonical() const;
  std::uint64_t hash() const;
};

// Plain text, one "key = value" per line, '#' starts a comment. Unset keys
// keep their defaults, unknown keys are errors. Relative paths are resolved
// against the directory of the config file.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
// Applies one key=value pair; throws ConfigError naming the key.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value,
                      const std::filesystem::path& base_dir = {});
std::vector<std::string> config_keys();

}  // namespace floodmax
