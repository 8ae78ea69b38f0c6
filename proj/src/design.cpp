#include "floodmax/design.hpp"

#include <cmath>
#include <stdexcept>

namespace floodmax {

void RawCovariateTable::validate() const {
  const Eigen::Index cells = static_cast<Eigen::Index>(stations.size()) * n_months;
  if (values.rows() != cells || values.cols() != n_covariates())
    throw std::invalid_argument("covariate table: dimension mismatch");
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index k = 0; k < values.cols(); ++k)
      if (!(values(i, k) > 0.0) || !std::isfinite(values(i, k)))
        throw std::invalid_argument("covariate table: nonpositive value for " + names[k] + " at station " +
                                    stations[i / n_months] + ", month " + std::to_string(i % n_months + 1));
}

RawCovariateTable RawCovariateTable::select_rivers(const std::vector<int>& rivers) const {
  RawCovariateTable out;
  out.n_months = n_months;
  out.names = names;
  out.values.resize(static_cast<Eigen::Index>(rivers.size()) * n_months, values.cols());
  for (std::size_t r = 0; r < rivers.size(); ++r) {
    out.stations.push_back(stations.at(rivers[r]));
    out.values.middleRows(static_cast<Eigen::Index>(r) * n_months, n_months) =
        values.middleRows(static_cast<Eigen::Index>(rivers[r]) * n_months, n_months);
  }
  return out;
}

namespace {

Eigen::MatrixXd log_values(const RawCovariateTable& raw) {
  raw.validate();
  return raw.values.array().log().matrix();
}

CovariateTable assemble(const RawCovariateTable& raw, const Eigen::MatrixXd& logs, CovariateCentering centering) {
  CovariateTable out;
  out.stations = raw.stations;
  out.n_months = raw.n_months;
  out.x.resize(logs.rows(), logs.cols() + 1);
  out.x.col(0).setOnes();
  for (Eigen::Index k = 0; k < logs.cols(); ++k)
    out.x.col(k + 1) = logs.col(k).array() - centering.means[k];
  out.centering = std::move(centering);
  return out;
}

}  // namespace

CovariateTable center_log_covariates(const RawCovariateTable& raw) {
  const Eigen::MatrixXd logs = log_values(raw);
  CovariateCentering c;
  c.names = raw.names;
  for (Eigen::Index k = 0; k < logs.cols(); ++k) {
    const double mean = logs.col(k).mean();
    c.means.push_back(mean);
    c.min.push_back(logs.col(k).minCoeff() - mean);
    c.max.push_back(logs.col(k).maxCoeff() - mean);
  }
  return assemble(raw, logs, std::move(c));
}

CovariateTable center_log_covariates(const RawCovariateTable& raw, const CovariateCentering& centering) {
  if (centering.means.size() != raw.names.size())
    throw std::invalid_argument("covariate centering: covariate count mismatch");
  for (std::size_t k = 0; k < raw.names.size(); ++k)
    if (!centering.names.empty() && centering.names[k] != raw.names[k])
      throw std::invalid_argument("covariate centering: expected covariate '" + centering.names[k] + "', got '" +
                                  raw.names[k] + "'");
  return assemble(raw, log_values(raw), centering);
}

DesignMatrices build_design(const CovariateTable& c) {
  const int M = c.n_months;
  const Eigen::Index JM = c.x.rows();
  if (M < 1 || JM != static_cast<Eigen::Index>(c.n_rivers()) * M)
    throw std::invalid_argument("build_design: covariate rows do not match rivers x months");
  const int P = c.n_coefficients();

  DesignMatrices d;
  d.n_rivers = c.n_rivers();
  d.n_months = M;
  d.X = c.x;
  d.Z = Eigen::MatrixXd::Zero(JM, static_cast<Eigen::Index>(P) * M);
  for (Eigen::Index row = 0; row < JM; ++row) {
    const int m = static_cast<int>(row % M);
    for (int k = 0; k < P; ++k) d.Z(row, d.z_column(k, m)) = c.x(row, k);
  }
  return d;
}

double SeasonalPrecision::correlation(int lag) const {
  const int M = n_months();
  const double f1 = stencil_f1(kappa), f2 = stencil_f2(kappa);
  double acc = 0.0;
  for (int k = 0; k < M; ++k) {
    const double w = 2.0 * M_PI * k / M;
    acc += std::cos(w * lag) / (f2 + 2.0 * f1 * std::cos(w) + 2.0 * std::cos(2.0 * w));
  }
  return acc / (M * s);
}

SeasonalPrecision seasonal_precision(double kappa, int n_months) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw std::domain_error("seasonal_precision: kappa must be positive");
  if (n_months < 5) throw std::domain_error("seasonal_precision: need at least 5 months for the circular stencil");
  const int M = n_months;
  const double f1 = stencil_f1(kappa), f2 = stencil_f2(kappa);

  // Eigenvalues of the unscaled circulant: f2 + 2 f1 cos(w) + 2 cos(2w).
  Eigen::VectorXd base(M);
  for (int k = 0; k < M; ++k) {
    const double w = 2.0 * M_PI * k / M;
    base[k] = f2 + 2.0 * f1 * std::cos(w) + 2.0 * std::cos(2.0 * w);
  }
  SeasonalPrecision out;
  out.kappa = kappa;
  out.s = base.cwiseInverse().mean();

  const double band[5] = {1.0, f1, f2, f1, 1.0};
  out.Q = Eigen::MatrixXd::Zero(M, M);
  for (int m = 0; m < M; ++m)
    for (int off = -2; off <= 2; ++off) out.Q(m, ((m + off) % M + M) % M) += out.s * band[off + 2];

  out.eigenvalues = out.s * base;
  out.log_det = out.eigenvalues.array().log().sum();
  return out;
}

}  // namespace floodmax
