#pragma once

#include <string>
#include <vector>

#include "floodmax/design.hpp"
#include "floodmax/io.hpp"
#include "floodmax/priors.hpp"
#include "floodmax/random.hpp"
#include "floodmax/sampler.hpp"

namespace floodmax {

// Station ids and catchment areas (km^2) of the eight Icelandic catchments,
// used as the covariate skeleton for synthetic data.
struct Catchment {
  const char* station;
  double area_km2;
};
inline constexpr Catchment kIcelandicCatchments[] = {
    {"VHM10", 392.0}, {"VHM19", 37.0},   {"VHM26", 267.0},   {"VHM45", 456.0},
    {"VHM51", 296.0}, {"VHM198", 195.0}, {"VHM200", 1094.0}, {"VHM204", 103.0},
};

struct SynthSettings {
  int n_rivers = 8;
  int n_years = 30;
  int first_year = 1971;
  double kappa = 1.0;
  // Coefficients on centered log covariates (intercept, area, max precipitation).
  std::vector<double> beta{3.5, 0.75, 0.9};
  std::vector<double> alpha{2.0, 0.75, 1.0};
  std::vector<double> psi{0.4, 0.05, 0.05};
  std::vector<double> phi{0.2, 0.05, 0.05};
  double sigma_eta = 0.2;
  double sigma_tau = 0.2;
  // Draw beta, alpha and all SDs from the default priors instead.
  bool coefficients_from_prior = false;
  // log max daily precipitation = log(level) + amplitude cos(2 pi (m - peak) / 12)
  //                               + river effect + cell noise
  double precip_level_mm = 30.0;
  double precip_seasonal_amplitude = 0.5;
  int precip_peak_month = 10;
  double precip_river_sd = 0.3;
  double precip_noise_sd = 0.1;
  // Probability that a (river, year, month) record is absent.
  double missing_prob = 0.0;

  void validate() const;
};

struct SyntheticData {
  ObservationTable observations;
  RawCovariateTable covariates;
  CovariateTable centered;
  LatentState truth;
  // Gumbel draws <= 0 that were redrawn to keep flows positive.
  long redrawn_nonpositive = 0;
};

SyntheticData generate_synthetic(const SynthSettings& settings, RandomStream& rng);

// Draw from N(0, sd^2 Q^{-1}); exactly zero when sd == 0.
Eigen::VectorXd draw_seasonal_effect(const SeasonalPrecision& q, double sd, RandomStream& rng);

}  // namespace floodmax
