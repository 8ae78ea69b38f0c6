#include "floodmax/priors.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace floodmax {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

double NormalPrior::log_density(double x) const {
  const double z = (x - mean) / sd;
  return -0.5 * kLog2Pi - std::log(sd) - 0.5 * z * z;
}

double ExponentialPrior::log_density(double x) const {
  if (x < 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(rate) - rate * x;
}

double ExponentialPrior::cdf(double x) const { return x <= 0.0 ? 0.0 : -std::expm1(-rate * x); }

void PriorSet::validate() const {
  const std::size_t n = beta.size();
  if (n == 0 || alpha.size() != n || psi.size() != n || phi.size() != n)
    throw std::invalid_argument("prior set: inconsistent coefficient counts");
  for (const auto* group : {&beta, &alpha})
    for (const auto& p : *group)
      if (!(p.sd > 0.0)) throw std::invalid_argument("prior set: normal prior sd must be positive");
  for (const auto* group : {&psi, &phi})
    for (const auto& p : *group)
      if (!(p.rate > 0.0)) throw std::invalid_argument("prior set: exponential rate must be positive");
  if (!(sigma_eta.rate > 0.0) || !(sigma_tau.rate > 0.0))
    throw std::invalid_argument("prior set: exponential rate must be positive");
}

NormalPrior elicit_normal_from_interval(double lower, double upper, double tail_mass) {
  if (!(lower < upper)) throw std::invalid_argument("elicit_normal_from_interval: need lower < upper");
  if (!(tail_mass > 0.0 && tail_mass < 0.5))
    throw std::invalid_argument("elicit_normal_from_interval: tail mass must lie in (0, 0.5)");
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - tail_mass);
  return {0.5 * (lower + upper), 0.5 * (upper - lower) / z};
}

ExponentialPrior elicit_exponential_from_quantile(double q, double value) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("elicit_exponential_from_quantile: q must lie in (0, 1)");
  if (!(value > 0.0)) throw std::invalid_argument("elicit_exponential_from_quantile: value must be positive");
  return {-std::log1p(-q) / value};
}

PriorSet make_prior_set(int n_slopes, const PriorOverrides& o) {
  if (n_slopes < 0) throw std::invalid_argument("prior set: negative covariate count");
  PriorSet ps;
  ps.beta.push_back(o.intercept);
  ps.psi.push_back({o.psi0_rate});
  for (int k = 0; k < n_slopes; ++k) {
    ps.beta.push_back(o.slope);
    ps.psi.push_back({o.psi_slope_rate});
  }
  ps.alpha = ps.beta;
  ps.phi = ps.psi;
  ps.sigma_eta = {o.sigma_rate};
  ps.sigma_tau = {o.sigma_rate};
  ps.validate();
  return ps;
}

PriorSet default_prior_set(int n_slopes) { return make_prior_set(n_slopes, PriorOverrides{}); }

double seasonal_log_density(const Eigen::Ref<const Eigen::VectorXd>& v, double sd, const SeasonalPrecision& q) {
  if (!(sd > 0.0)) throw std::domain_error("seasonal prior: standard deviation must be positive");
  const double M = static_cast<double>(v.size());
  const double quad = v.dot(q.Q * v) / (sd * sd);
  return -0.5 * M * kLog2Pi + 0.5 * q.log_det - M * std::log(sd) - 0.5 * quad;
}

double log_prior_density(const CoefficientState& s, const PriorSet& priors, const SeasonalPrecision& q) {
  const int P = priors.n_coefficients();
  const int M = q.n_months();
  if (s.beta.size() != P || s.alpha.size() != P || s.psi.size() != P || s.phi.size() != P ||
      s.beta_star.size() != P * M || s.alpha_star.size() != P * M)
    throw std::invalid_argument("log_prior_density: state dimensions do not match priors");
  if (!(s.sigma_eta > 0.0) || !(s.sigma_tau > 0.0) || (s.psi.array() <= 0.0).any() || (s.phi.array() <= 0.0).any())
    throw std::domain_error("log_prior_density: standard deviations must be positive");

  double lp = 0.0;
  for (int k = 0; k < P; ++k) {
    lp += priors.beta[k].log_density(s.beta[k]);
    lp += priors.alpha[k].log_density(s.alpha[k]);
    lp += seasonal_log_density(s.beta_star.segment(k * M, M), s.psi[k], q);
    lp += seasonal_log_density(s.alpha_star.segment(k * M, M), s.phi[k], q);
    lp += priors.psi[k].log_density(s.psi[k]);
    lp += priors.phi[k].log_density(s.phi[k]);
  }
  lp += priors.sigma_eta.log_density(s.sigma_eta);
  lp += priors.sigma_tau.log_density(s.sigma_tau);
  return lp;
}

}  // namespace floodmax
