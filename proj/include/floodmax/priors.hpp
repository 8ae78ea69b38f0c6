#pragma once

#include <Eigen/Dense>
#include <vector>

#include "floodmax/design.hpp"

namespace floodmax {

struct NormalPrior {
  double mean = 0.0;
  double sd = 1.0;

  double log_density(double x) const;
};

// Exponential prior on a standard deviation. For a Gaussian random effect with
// base model "SD = 0", the penalised-complexity distance from the base model is
// proportional to the SD itself, so a constant-rate penalty on that distance
// is an exponential prior on the SD.
struct ExponentialPrior {
  double rate = 1.0;

  double mean() const { return 1.0 / rate; }
  double log_density(double x) const;
  double cdf(double x) const;
};

struct PriorSet {
  std::vector<NormalPrior> beta;   // k = 0..p
  std::vector<NormalPrior> alpha;  // k = 0..p
  std::vector<ExponentialPrior> psi;
  std::vector<ExponentialPrior> phi;
  ExponentialPrior sigma_eta;
  ExponentialPrior sigma_tau;

  int n_coefficients() const { return static_cast<int>(beta.size()); }
  void validate() const;
};

// Normal with P(X < lower) = P(X > upper) = tail_mass.
NormalPrior elicit_normal_from_interval(double lower, double upper, double tail_mass);

// Exponential whose q-quantile is `value`: rate = -log(1 - q) / value.
ExponentialPrior elicit_exponential_from_quantile(double q, double value);

// Defaults for the monthly-maxima model with p slope covariates:
//   intercepts       N(0, 100^2)
//   slopes           N(0.5, 0.304^2)   (5% mass below 0 and above 1)
//   psi_0, phi_0     Exp(1.275)        (0.95 quantile at 2.35)
//   psi_k, phi_k     Exp(14.4)         (0.99 quantile at 0.32)
//   sigma_eta, sigma_tau  Exp(0.46)    (0.99 quantile at 10)
PriorSet default_prior_set(int n_slopes);

// Tunable pieces of the default prior set. Unset fields keep the defaults.
struct PriorOverrides {
  NormalPrior intercept{0.0, 100.0};
  NormalPrior slope = elicit_normal_from_interval(0.0, 1.0, 0.05);
  double psi0_rate = elicit_exponential_from_quantile(0.95, 2.35).rate;
  double psi_slope_rate = elicit_exponential_from_quantile(0.99, 0.32).rate;
  double sigma_rate = elicit_exponential_from_quantile(0.99, 10.0).rate;
};
PriorSet make_prior_set(int n_slopes, const PriorOverrides& o);

// Values for the data-poor parameters of the latent model. Seasonal vectors
// are stored covariate-major: entry k*M + m.
struct CoefficientState {
  Eigen::VectorXd beta, beta_star, alpha, alpha_star;
  Eigen::VectorXd psi, phi;
  double sigma_eta = 1.0;
  double sigma_tau = 1.0;
};

// log N(v | 0, sd^2 Q^{-1}) evaluated in precision form.
double seasonal_log_density(const Eigen::Ref<const Eigen::VectorXd>& v, double sd, const SeasonalPrecision& q);

// Sum of all prior log densities: beta, alpha (normal); beta*_k, alpha*_k
// (seasonal Gaussian); psi, phi, sigma_eta, sigma_tau (exponential).
// Throws std::domain_error if any SD is not positive.
double log_prior_density(const CoefficientState& state, const PriorSet& priors, const SeasonalPrecision& q);

}  // namespace floodmax
