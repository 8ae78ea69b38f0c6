#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "floodmax/design.hpp"
#include "floodmax/priors.hpp"
#include "floodmax/random.hpp"
#include "floodmax/sampler.hpp"

namespace floodmax {

struct IntervalSummary {
  double median = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double mean = 0.0;
};

// Equal-tailed summary over draws: median and the central `interval` band.
IntervalSummary summarize_draws(std::vector<double> draws, double interval);

struct PredictOptions {
  bool residuals = true;
  double interval = 0.8;
};

struct PredictiveSummary {
  std::vector<std::string> stations;
  int n_months = kDefaultMonths;
  std::vector<double> levels;
  // Per level: draws x (J*M) predicted flow quantiles, in sample row order.
  std::vector<Eigen::MatrixXd> draws;
  // Index (cell * levels.size() + level), cell = j*M + m.
  std::vector<IntervalSummary> summary;
  std::vector<std::string> warnings;

  const IntervalSummary& at(int river, int month, int level) const {
    return summary[static_cast<std::size_t>((river * n_months + month) * levels.size() + level)];
  }
};

// Posterior predictive flow quantiles for the rows of `target`, which must be
// centered with the training constants. Per draw and cell:
//   eta = x'beta + sum_k beta*_{k,m} x_k (+ eps_eta), tau likewise,
//   value = Gumbel quantile at each level with mu = e^eta, sigma = e^tau.
// Residuals come from substreams keyed by (base seed, draw contents, station,
// month), so the result does not depend on the order of the sample rows.
// Covariates outside the training range produce warnings.
PredictiveSummary predictive_quantiles(const PosteriorSamples& samples, const CovariateTable& target,
                                       const std::vector<double>& levels, RandomStream& rng,
                                       const PredictOptions& options = {});

// Same for a single flattened draw (one row of a sample file), no residuals
// unless a stream is supplied.
Eigen::MatrixXd predict_draw(const ParameterLayout& layout, const Eigen::Ref<const Eigen::RowVectorXd>& draw,
                             const CovariateTable& target, const std::vector<double>& levels,
                             RandomStream* residual_rng = nullptr);

struct CellFitReport {
  int river = 0;
  int month = 0;  // 0-based
  std::vector<double> y;          // sorted observations
  std::vector<double> empirical;  // Hazen positions (i - 0.5)/n
  // Model CDF at each observation across draws.
  std::vector<double> model_mean, model_lower, model_upper;
  // Smooth curve over a grid spanning the data.
  std::vector<double> grid, grid_mean, grid_lower, grid_upper;
};

// Requires >= min_obs observations in the cell. `band` is the pointwise
// credible level (default 95%). At most max_draws evenly spaced pooled draws
// are used.
CellFitReport cell_fit_report(const PosteriorSamples& samples, const CellData& data, int river, int month,
                              double band = 0.95, int min_obs = 5, int grid_points = 101, int max_draws = 4000);

struct CvOptions {
  double data_quantile = 0.9;
  bool allow_high_quantile = false;
  PredictOptions predict;
};

struct CvFold {
  int river = 0;
  std::string station;
  bool ok = false;
  std::string error;
  int training_rivers = 0;
  int training_cells = 0;
  std::size_t training_observations = 0;
  std::uint64_t training_checksum = 0;
  bool excludes_held_out = false;
  std::uint64_t fold_seed = 0;
  // Per month.
  std::vector<IntervalSummary> pred_median, pred_high;
  std::vector<double> data_median, data_high;
  std::vector<int> n_points;
  std::vector<std::vector<double>> points;
  double rank_correlation = 0.0;  // Spearman, predicted vs sample medians
  std::vector<std::string> warnings;
};

struct CvResult {
  double data_quantile = 0.9;
  std::vector<CvFold> folds;
};

// Checksum of everything a fold trains on: station ids, covariates and flows.
std::uint64_t training_checksum(const RawCovariateTable& covariates, const CellData& data);

// Leave-one-river-out: for each river, centering, design and MCMC use only the
// other rivers; the held-out river is then predicted from its covariates and
// compared to its monthly sample median and data_quantile. A fold that fails
// is recorded with its error and skipped. `progress` is called after each fold.
CvResult cross_validate(const CellData& data, const RawCovariateTable& covariates, const PriorOverrides& priors,
                        double kappa, const SamplerConfig& cfg, const CvOptions& options = {},
                        const std::function<void(const CvFold&)>& progress = {});

CellData select_rivers(const CellData& data, const std::vector<int>& rivers);

}  // namespace floodmax
