#include "floodmax/synthetic.hpp"

#include <cmath>
#include <stdexcept>

#include "floodmax/gumbel.hpp"

namespace floodmax {

void SynthSettings::validate() const {
  if (n_rivers < 1 || n_years < 1) throw std::invalid_argument("synthetic: need at least one river and one year");
  const std::size_t P = 3;
  if (beta.size() != P || alpha.size() != P || psi.size() != P || phi.size() != P)
    throw std::invalid_argument("synthetic: beta, alpha, psi and phi need 3 entries (intercept, area, precipitation)");
  for (const auto* v : {&psi, &phi})
    for (double x : *v)
      if (x < 0.0) throw std::invalid_argument("synthetic: seasonal SDs must be >= 0");
  if (!(sigma_eta > 0.0) || !(sigma_tau > 0.0)) throw std::invalid_argument("synthetic: residual SDs must be > 0");
  if (!(missing_prob >= 0.0 && missing_prob < 1.0)) throw std::invalid_argument("synthetic: missing_prob in [0, 1)");
  if (!(precip_level_mm > 0.0)) throw std::invalid_argument("synthetic: precipitation level must be positive");
}

Eigen::VectorXd draw_seasonal_effect(const SeasonalPrecision& q, double sd, RandomStream& rng) {
  const int M = q.n_months();
  if (sd == 0.0) return Eigen::VectorXd::Zero(M);
  Eigen::VectorXd z(M);
  for (int m = 0; m < M; ++m) z[m] = rng.normal();
  const Eigen::LLT<Eigen::MatrixXd> llt(q.Q);
  return sd * llt.matrixU().solve(z);
}

SyntheticData generate_synthetic(const SynthSettings& s, RandomStream& rng) {
  s.validate();
  const int J = s.n_rivers;
  const int M = kDefaultMonths;
  SyntheticData out;

  RawCovariateTable& raw = out.covariates;
  raw.n_months = M;
  raw.names = {"area_km2", "max_daily_precip"};
  raw.values.resize(J * M, 2);
  constexpr int n_known = static_cast<int>(std::size(kIcelandicCatchments));
  for (int j = 0; j < J; ++j) {
    double area;
    if (j < n_known) {
      raw.stations.push_back(kIcelandicCatchments[j].station);
      area = kIcelandicCatchments[j].area_km2;
    } else {
      raw.stations.push_back("SYN" + std::to_string(j + 1));
      area = std::exp(std::log(30.0) + rng.uniform() * (std::log(1500.0) - std::log(30.0)));
    }
    const double river_effect = s.precip_river_sd * rng.normal();
    for (int m = 0; m < M; ++m) {
      const double season = s.precip_seasonal_amplitude * std::cos(2.0 * M_PI * (m + 1 - s.precip_peak_month) / M);
      raw.values(j * M + m, 0) = area;
      raw.values(j * M + m, 1) =
          std::exp(std::log(s.precip_level_mm) + season + river_effect + s.precip_noise_sd * rng.normal());
    }
  }
  out.centered = center_log_covariates(raw);
  const DesignMatrices design = build_design(out.centered);
  const SeasonalPrecision q = seasonal_precision(s.kappa, M);

  LatentState& t = out.truth;
  const int P = 3;
  t.beta = Eigen::Map<const Eigen::VectorXd>(s.beta.data(), P);
  t.alpha = Eigen::Map<const Eigen::VectorXd>(s.alpha.data(), P);
  t.psi = Eigen::Map<const Eigen::VectorXd>(s.psi.data(), P);
  t.phi = Eigen::Map<const Eigen::VectorXd>(s.phi.data(), P);
  t.sigma_eta = s.sigma_eta;
  t.sigma_tau = s.sigma_tau;
  if (s.coefficients_from_prior) {
    const PriorSet priors = default_prior_set(P - 1);
    for (int k = 0; k < P; ++k) {
      t.beta[k] = priors.beta[k].mean + priors.beta[k].sd * rng.normal();
      t.alpha[k] = priors.alpha[k].mean + priors.alpha[k].sd * rng.normal();
      t.psi[k] = rng.exponential(priors.psi[k].rate);
      t.phi[k] = rng.exponential(priors.phi[k].rate);
    }
    t.sigma_eta = rng.exponential(priors.sigma_eta.rate);
    t.sigma_tau = rng.exponential(priors.sigma_tau.rate);
  }
  t.beta_star.resize(P * M);
  t.alpha_star.resize(P * M);
  for (int k = 0; k < P; ++k) {
    t.beta_star.segment(k * M, M) = draw_seasonal_effect(q, t.psi[k], rng);
    t.alpha_star.segment(k * M, M) = draw_seasonal_effect(q, t.phi[k], rng);
  }
  t.eta = design.X * t.beta + design.Z * t.beta_star;
  t.tau = design.X * t.alpha + design.Z * t.alpha_star;
  for (int c = 0; c < J * M; ++c) {
    t.eta[c] += t.sigma_eta * rng.normal();
    t.tau[c] += t.sigma_tau * rng.normal();
  }

  for (int j = 0; j < J; ++j)
    for (int yr = 0; yr < s.n_years; ++yr)
      for (int m = 0; m < M; ++m) {
        if (s.missing_prob > 0.0 && rng.uniform() < s.missing_prob) continue;
        const gumbel::GumbelParams g{std::exp(t.eta[j * M + m]), std::exp(t.tau[j * M + m])};
        double y = gumbel::sample_one(g, rng);
        while (y <= 0.0) {
          ++out.redrawn_nonpositive;
          y = gumbel::sample_one(g, rng);
        }
        out.observations.records.push_back({raw.stations[j], s.first_year + yr, m + 1, y});
      }
  return out;
}

}  // namespace floodmax
