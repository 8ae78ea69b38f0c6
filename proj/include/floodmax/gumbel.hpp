#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "floodmax/random.hpp"

namespace floodmax::gumbel {

inline constexpr double euler_gamma = 0.57721566490153286061;

struct GumbelParams {
  double mu = 0.0;
  double sigma = 1.0;

  // Throws std::invalid_argument unless sigma > 0 and both are finite.
  void validate() const;
  double mean() const { return mu + euler_gamma * sigma; }
};

double cdf(const GumbelParams& p, double y);
double log_cdf(const GumbelParams& p, double y);
// log(1 - F(y)), accurate in both tails.
double log_survival(const GumbelParams& p, double y);
// Throws std::domain_error unless 0 < q < 1.
double quantile(const GumbelParams& p, double q);
double logpdf(const GumbelParams& p, double y);
double sample_one(const GumbelParams& p, RandomStream& rng);
std::vector<double> sample(const GumbelParams& p, std::size_t n, RandomStream& rng);

struct FitResult {
  GumbelParams params;
  int iterations = 0;
  // Fewer than 5 observations: the fit is returned but flagged.
  bool small_sample = false;
};

class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, GumbelParams last)
      : std::runtime_error(what), last_iterate(last) {}
  GumbelParams last_iterate;
};

inline constexpr int kFitMaxIterations = 200;
inline constexpr double kFitRelTolerance = 1e-10;

// Maximum likelihood. Solves the profile equation
//   sigma = mean(y) - sum(y exp(-y/sigma)) / sum(exp(-y/sigma))
// by safeguarded Newton, then mu = -sigma log(mean(exp(-y/sigma))).
// Throws std::invalid_argument for fewer than two distinct values, FitError
// when the iteration cap is hit.
FitResult ml_fit(std::span<const double> y);

// Score of the sample log-likelihood, scaled by sigma/n so it is unitless.
std::pair<double, double> scaled_score(const GumbelParams& p, std::span<const double> y);
double log_likelihood(const GumbelParams& p, std::span<const double> y);

struct AndersonDarling {
  double statistic = 0.0;
  double p_value = 1.0;
  GumbelParams fitted;
};

// A^2 of the sample pushed through its own fitted CDF.
double ad_statistic(std::span<const double> y, const GumbelParams& fitted);

// Parametric bootstrap p-value: (1 + #{A^2_b >= A^2}) / (n_boot + 1), each
// replicate refitted. Requires >= 5 observations and n_boot >= 99.
AndersonDarling anderson_darling(std::span<const double> y, int n_boot, RandomStream& rng);

}  // namespace floodmax::gumbel
