#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "floodmax/design.hpp"
#include "floodmax/gumbel.hpp"
#include "floodmax/sampler.hpp"

namespace floodmax {

struct CellGof {
  int river = 0;
  int month = 0;  // 0-based
  int n = 0;
  bool ok = false;
  std::string note;
  gumbel::GumbelParams fit;
  double ad_statistic = 0.0;
  double ad_p_value = 0.0;
};

struct GofReport {
  std::vector<CellGof> cells;
  std::vector<double> bin_edges;  // 11 edges over [0, 1]
  std::vector<int> bin_counts;    // 10 bins
  double ks_uniform = 0.0;        // KS distance of the p-values from U(0, 1)
};

// Per-cell ML fit and bootstrap Anderson-Darling test. Cells with fewer than
// min_obs observations, or whose fit fails, are skipped with a note. Each
// cell's bootstrap uses the substream derive(seed, {bootstrap, cell}).
GofReport goodness_of_fit(const CellData& data, int n_boot, std::uint64_t seed, int min_obs = 5);

struct RegressionFit {
  std::vector<int> terms;  // candidate covariate indices (0-based), sorted
  Eigen::VectorXd coef;    // intercept first, then terms in order
  double rss = 0.0;
  double aic = 0.0;
  int n = 0;
};

// OLS of y on an intercept plus the chosen columns of `candidates`.
// AIC = n log(2 pi RSS / n) + n + 2 (number of coefficients + 1).
RegressionFit ols_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& candidates, std::vector<int> terms);

struct StepwiseStep {
  std::string action;  // start, add, drop
  int term = -1;
  double aic = 0.0;
  std::vector<int> model;
};

struct StepwiseResult {
  std::vector<StepwiseStep> trace;
  RegressionFit selected;
};

// Both-direction stepwise search by AIC from the intercept-only model.
StepwiseResult stepwise_aic(const Eigen::VectorXd& y, const Eigen::MatrixXd& candidates);
std::vector<RegressionFit> all_subsets(const Eigen::VectorXd& y, const Eigen::MatrixXd& candidates);

struct PrelimReport {
  std::vector<std::string> stations;
  std::vector<std::string> covariate_names;
  GofReport gof;
  // Index 0: log mu-hat, index 1: log sigma-hat, over cells with a usable fit.
  std::array<std::vector<RegressionFit>, 2> subsets;
  std::array<StepwiseResult, 2> stepwise;
  std::array<int, 2> n_cells{0, 0};
  Eigen::MatrixXd correlation;  // pairwise correlations of the centered log covariates
};

PrelimReport preliminary_analysis(const CellData& data, const RawCovariateTable& covariates, int n_boot,
                                  std::uint64_t seed, int min_obs = 5);

}  // namespace floodmax
