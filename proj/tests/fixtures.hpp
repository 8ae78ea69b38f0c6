#pragma once

#include <algorithm>
#include <string>

#include "floodmax/design.hpp"
#include "floodmax/gumbel.hpp"
#include "floodmax/sampler.hpp"

namespace fixture {

// J rivers, M months, one covariate per slope, Gumbel data drawn around a
// log-linear surface. Cell (j, m) gets `years` values unless listed in `empty`.
struct Tiny {
  floodmax::RawCovariateTable raw;
  floodmax::CovariateTable covariates;
  floodmax::CellData data;
};

inline Tiny make_tiny(int J, int M, int slopes, int years, std::uint64_t seed, std::vector<int> empty = {}) {
  using namespace floodmax;
  RandomStream rng(seed);
  Tiny t;
  t.raw.n_months = M;
  for (int k = 0; k < slopes; ++k) t.raw.names.push_back("c" + std::to_string(k));
  t.raw.values.resize(J * M, slopes);
  for (int j = 0; j < J; ++j) {
    t.raw.stations.push_back("R" + std::to_string(j + 1));
    const double level = std::exp(rng.normal(4.0, 0.8));
    for (int m = 0; m < M; ++m)
      for (int k = 0; k < slopes; ++k)
        t.raw.values(j * M + m, k) =
            k == 0 ? level : std::exp(3.0 + 0.4 * std::cos(2 * M_PI * m / M) + 0.2 * rng.normal());
  }
  t.covariates = center_log_covariates(t.raw);
  t.data.n_rivers = J;
  t.data.n_months = M;
  t.data.y.resize(J * M);
  for (int c = 0; c < J * M; ++c) {
    if (std::find(empty.begin(), empty.end(), c) != empty.end()) continue;
    double eta = 3.0, tau = 1.5;
    for (int k = 0; k < slopes; ++k) {
      eta += 0.7 * t.covariates.x(c, k + 1);
      tau += 0.6 * t.covariates.x(c, k + 1);
    }
    eta += 0.1 * rng.normal();
    tau += 0.1 * rng.normal();
    for (int i = 0; i < years; ++i)
      t.data.y[c].push_back(gumbel::sample_one({std::exp(eta), std::exp(tau)}, rng));
  }
  return t;
}

inline floodmax::Model tiny_model(const Tiny& t, double kappa = 1.0) {
  return floodmax::make_model(t.covariates, t.data, kappa, floodmax::PriorOverrides{});
}

// Joint prior of nu = (coefficients, seasonal effects) as a dense Gaussian.
inline void dense_prior(const floodmax::Model& model, const Eigen::VectorXd& seasonal_sd, bool location, Eigen::VectorXd& mean,
                 Eigen::MatrixXd& cov) {
  const int P = model.n_coefficients(), M = model.n_months();
  const int D = P * (M + 1);
  mean = Eigen::VectorXd::Zero(D);
  cov = Eigen::MatrixXd::Zero(D, D);
  const Eigen::MatrixXd Qinv = model.seasonal.Q.inverse();
  for (int k = 0; k < P; ++k) {
    const auto& pr = location ? model.priors.beta[k] : model.priors.alpha[k];
    mean[k] = pr.mean;
    cov(k, k) = pr.sd * pr.sd;
    cov.block(P + k * M, P + k * M, M, M) = seasonal_sd[k] * seasonal_sd[k] * Qinv;
  }
}

inline Eigen::MatrixXd dense_A(const floodmax::Model& model) {
  Eigen::MatrixXd A(model.n_cells(), model.design.X.cols() + model.design.Z.cols());
  A << model.design.X, model.design.Z;
  return A;
}

}  // namespace fixture
