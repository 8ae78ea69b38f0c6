#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace floodmax {

inline constexpr int kDefaultMonths = 12;

// Raw per-(river, month) covariates as read from disk, before logs.
// Row (j, m) sits at j * n_months + m.
struct RawCovariateTable {
  std::vector<std::string> stations;
  int n_months = kDefaultMonths;
  std::vector<std::string> names;  // e.g. {"area_km2", "max_daily_precip"}
  Eigen::MatrixXd values;          // (J*M) x p, all > 0

  int n_rivers() const { return static_cast<int>(stations.size()); }
  int n_covariates() const { return static_cast<int>(names.size()); }
  void validate() const;
  // Sub-table with only the listed river indices, in that order.
  RawCovariateTable select_rivers(const std::vector<int>& rivers) const;
};

// Constants used to center log covariates, kept with a fit so that new rivers
// are placed on the training scale. min/max are the centered training range.
struct CovariateCentering {
  std::vector<std::string> names;
  std::vector<double> means;
  std::vector<double> min;
  std::vector<double> max;
};

// Centered log covariates. Column 0 is the intercept (all ones), column k >= 1
// is log(raw_k) minus its training grand mean.
struct CovariateTable {
  std::vector<std::string> stations;
  int n_months = kDefaultMonths;
  Eigen::MatrixXd x;  // (J*M) x (p+1)
  CovariateCentering centering;

  int n_rivers() const { return static_cast<int>(stations.size()); }
  int n_coefficients() const { return static_cast<int>(x.cols()); }
  int row(int river, int month) const { return river * n_months + month; }
};

// Grand-mean centering over all (river, month) cells. Throws
// std::invalid_argument on a nonpositive covariate value.
CovariateTable center_log_covariates(const RawCovariateTable& raw);
// Centering with externally supplied (training) constants.
CovariateTable center_log_covariates(const RawCovariateTable& raw, const CovariateCentering& centering);

struct DesignMatrices {
  Eigen::MatrixXd X;  // JM x (p+1)
  Eigen::MatrixXd Z;  // JM x (p+1)M, Z = (Z_0, ..., Z_p), Z_k = diag(X_k)(1_J kron I_M)
  int n_rivers = 0;
  int n_months = 0;

  int n_coefficients() const { return static_cast<int>(X.cols()); }
  int n_cells() const { return static_cast<int>(X.rows()); }
  // Column of Z holding the seasonal effect of covariate k in month m.
  int z_column(int k, int month) const { return k * n_months + month; }
};

DesignMatrices build_design(const CovariateTable& c);

// Circulant seasonal precision s * circ[1, f1, f2, f1, 1] with
// f1 = -2(kappa^2 + 2), f2 = kappa^4 + 4 kappa^2 + 6, scaled so Q^{-1} has unit diagonal.
struct SeasonalPrecision {
  double kappa = 1.0;
  double s = 1.0;
  Eigen::MatrixXd Q;
  Eigen::VectorXd eigenvalues;  // eigenvalues of Q, k = 0..M-1
  double log_det = 0.0;

  int n_months() const { return static_cast<int>(Q.rows()); }
  // Correlation at the given month lag implied by Q^{-1}.
  double correlation(int lag) const;
};

inline double stencil_f1(double kappa) { return -2.0 * (kappa * kappa + 2.0); }
inline double stencil_f2(double kappa) {
  const double k2 = kappa * kappa;
  return k2 * k2 + 4.0 * k2 + 6.0;
}

// Throws std::domain_error for kappa <= 0 or M < 5.
SeasonalPrecision seasonal_precision(double kappa, int n_months = kDefaultMonths);

}  // namespace floodmax
