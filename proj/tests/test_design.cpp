#include <doctest.h>

#include <cmath>

#include "floodmax/design.hpp"
#include "oracles.hpp"

using namespace floodmax;

TEST_CASE("seasonal precision at kappa = 1, M = 12") {
  const auto q = seasonal_precision(1.0, 12);
  CHECK(q.s == doctest::Approx(0.268).epsilon(0.001 / 0.268));
  CHECK(q.correlation(1) == doctest::Approx(0.67).epsilon(0.005 / 0.67));
  const Eigen::MatrixXd cov = q.Q.inverse();
  for (int m = 0; m < 12; ++m) CHECK(std::abs(cov(m, m) - 1.0) < 1e-10);
}

TEST_CASE("seasonal precision band and circulant structure") {
  for (double kappa : {0.3, 1.0, 2.5}) {
    const auto q = seasonal_precision(kappa, 12);
    const double k2 = kappa * kappa;
    const double f1 = -2.0 * (k2 + 2.0), f2 = k2 * k2 + 4.0 * k2 + 6.0;
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j) {
        const int d = std::min((i - j + 12) % 12, (j - i + 12) % 12);
        const double expect = d == 0 ? f2 : d == 1 ? f1 : d == 2 ? 1.0 : 0.0;
        CHECK(q.Q(i, j) == doctest::Approx(q.s * expect).epsilon(1e-14));
      }
  }
}

TEST_CASE("scaled inverse is a correlation matrix and matches correlation()") {
  for (int M : {5, 7, 12, 24}) {
    const auto q = seasonal_precision(1.3, M);
    const Eigen::MatrixXd cov = q.Q.inverse();
    for (int m = 0; m < M; ++m) CHECK(std::abs(cov(m, m) - 1.0) < 1e-10);
    for (int lag = 0; lag < M; ++lag) CHECK(q.correlation(lag) == doctest::Approx(cov(0, lag)).epsilon(1e-10));
  }
}

TEST_CASE("eigenvalues and log determinant agree with dense decompositions") {
  const auto q = seasonal_precision(0.8, 12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q.Q);
  Eigen::VectorXd ours = q.eigenvalues;
  std::sort(ours.data(), ours.data() + ours.size());
  for (int i = 0; i < 12; ++i) CHECK(ours[i] == doctest::Approx(es.eigenvalues()[i]).epsilon(1e-10));
  const Eigen::LLT<Eigen::MatrixXd> llt(q.Q);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  CHECK(q.log_det == doctest::Approx(logdet).epsilon(1e-12));
}

TEST_CASE("seasonal precision rejects bad arguments") {
  CHECK_THROWS_AS(seasonal_precision(0.0, 12), std::domain_error);
  CHECK_THROWS_AS(seasonal_precision(-1.0, 12), std::domain_error);
  CHECK_THROWS_AS(seasonal_precision(1.0, 4), std::domain_error);
  CHECK_NOTHROW(seasonal_precision(1.0, 5));
}

TEST_CASE("neighbouring months are more correlated than distant ones") {
  const auto q = seasonal_precision(1.0, 12);
  for (int lag = 1; lag < 6; ++lag) CHECK(q.correlation(lag) > q.correlation(lag + 1));
  CHECK(q.correlation(1) == doctest::Approx(q.correlation(11)).epsilon(1e-12));
}

namespace {

RawCovariateTable table1_areas() {
  // Catchment areas (km^2) of the eight gauged rivers, constant over months.
  const std::vector<std::pair<std::string, double>> rows = {
      {"VHM10", 392}, {"VHM19", 37},   {"VHM26", 267},   {"VHM45", 456},
      {"VHM51", 296}, {"VHM198", 195}, {"VHM200", 1094}, {"VHM204", 103}};
  RawCovariateTable t;
  t.n_months = 12;
  t.names = {"area_km2"};
  t.values.resize(8 * 12, 1);
  for (int j = 0; j < 8; ++j) {
    t.stations.push_back(rows[j].first);
    for (int m = 0; m < 12; ++m) t.values(j * 12 + m, 0) = rows[j].second;
  }
  return t;
}

}  // namespace

TEST_CASE("log-area centering over the eight catchments") {
  const auto t = table1_areas();
  double mean = 0;
  for (double a : {392, 37, 267, 456, 296, 195, 1094, 103}) mean += std::log(a) / 8.0;
  const auto c = center_log_covariates(t);
  CHECK(c.centering.means[0] == doctest::Approx(mean).epsilon(1e-14));
  CHECK(c.centering.means[0] == doctest::Approx(5.485951).epsilon(1e-6));
  CHECK(c.x(c.row(6, 3), 1) == doctest::Approx(std::log(1094.0) - mean).epsilon(1e-14));
  CHECK(c.x(c.row(6, 3), 1) == doctest::Approx(1.511645).epsilon(1e-6));
  CHECK(c.x.col(1).mean() == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(c.centering.max[0] == doctest::Approx(std::log(1094.0) - mean));
  CHECK(c.centering.min[0] == doctest::Approx(std::log(37.0) - mean));
  for (int r = 0; r < 96; ++r) CHECK(c.x(r, 0) == 1.0);
}

TEST_CASE("training centering is reused for new rivers") {
  const auto t = table1_areas();
  const auto train = center_log_covariates(t.select_rivers({0, 1, 2, 3, 4, 5, 7}));
  const auto held = center_log_covariates(t.select_rivers({6}), train.centering);
  CHECK(held.x(0, 1) == doctest::Approx(std::log(1094.0) - train.centering.means[0]).epsilon(1e-14));
  const auto again = center_log_covariates(t.select_rivers({0, 1, 2, 3, 4, 5, 7}), train.centering);
  CHECK((again.x - train.x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("nonpositive covariates are rejected") {
  auto t = table1_areas();
  t.values(5, 0) = 0.0;
  CHECK_THROWS_AS(center_log_covariates(t), std::invalid_argument);
}

TEST_CASE("Z equals diag(X_k)(1_J kron I_M) stacked over k") {
  RawCovariateTable t;
  const int J = 3, M = 5;
  t.n_months = M;
  t.names = {"a", "b"};
  t.values.resize(J * M, 2);
  for (int j = 0; j < J; ++j) {
    t.stations.push_back("R" + std::to_string(j));
    for (int m = 0; m < M; ++m) {
      t.values(j * M + m, 0) = 10.0 + j + 0.3 * m;
      t.values(j * M + m, 1) = 2.0 + 0.5 * j * m;
    }
  }
  const auto c = center_log_covariates(t);
  const auto d = build_design(c);
  Eigen::MatrixXd kron = Eigen::MatrixXd::Zero(J * M, M);
  for (int j = 0; j < J; ++j) kron.block(j * M, 0, M, M) = Eigen::MatrixXd::Identity(M, M);
  for (int k = 0; k < 3; ++k) {
    const Eigen::MatrixXd Zk = c.x.col(k).asDiagonal() * kron;
    CHECK((d.Z.middleCols(k * M, M) - Zk).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK((d.X - c.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.z_column(2, 4) == 14);
}

TEST_CASE("small Kronecker expansion entry") {
  CovariateTable c;
  c.stations = {"A", "B"};
  c.n_months = 3;
  c.x.resize(6, 2);
  for (int j = 1; j <= 2; ++j)
    for (int m = 1; m <= 3; ++m) {
      c.x((j - 1) * 3 + m - 1, 0) = 1.0;
      c.x((j - 1) * 3 + m - 1, 1) = j + m;
    }
  const auto d = build_design(c);
  const int row = (2 - 1) * 3 + (3 - 1);
  CHECK(d.Z(row, d.z_column(1, 2)) == 5.0);
  CHECK(d.Z(row, d.z_column(1, 0)) == 0.0);
  CHECK(d.Z(row, d.z_column(1, 1)) == 0.0);
}
