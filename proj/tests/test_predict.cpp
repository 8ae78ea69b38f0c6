#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "floodmax/gumbel.hpp"
#include "floodmax/predict.hpp"
#include "floodmax/synthetic.hpp"
#include "oracles.hpp"

using namespace floodmax;

namespace {

// Posterior made of explicit rows.
PosteriorSamples samples_from(const ParameterLayout& L, const std::vector<LatentState>& draws, int chains = 1) {
  PosteriorSamples s;
  s.layout = L;
  s.master_seed = 1;
  const int per = static_cast<int>(draws.size()) / chains;
  for (int c = 0; c < chains; ++c) {
    ChainSamples ch;
    ch.chain = c;
    ch.draws.resize(per, L.size());
    for (int i = 0; i < per; ++i) ch.draws.row(i) = L.flatten(draws[c * per + i]).transpose();
    s.chains.push_back(ch);
  }
  return s;
}

LatentState random_state(int J, int M, int P, RandomStream& rng) {
  LatentState s;
  s.beta = Eigen::VectorXd::Zero(P);
  s.alpha = Eigen::VectorXd::Zero(P);
  s.beta[0] = rng.normal(3.0, 0.2);
  s.alpha[0] = rng.normal(1.0, 0.2);
  for (int k = 1; k < P; ++k) {
    s.beta[k] = rng.normal(0.7, 0.1);
    s.alpha[k] = rng.normal(0.6, 0.1);
  }
  s.beta_star = Eigen::VectorXd::Zero(P * M);
  s.alpha_star = Eigen::VectorXd::Zero(P * M);
  for (int i = 0; i < P * M; ++i) {
    s.beta_star[i] = 0.2 * rng.normal();
    s.alpha_star[i] = 0.2 * rng.normal();
  }
  s.psi = Eigen::VectorXd::Constant(P, 0.3);
  s.phi = Eigen::VectorXd::Constant(P, 0.3);
  s.sigma_eta = 0.2;
  s.sigma_tau = 0.15;
  s.eta = Eigen::VectorXd::Constant(J * M, 3.0);
  s.tau = Eigen::VectorXd::Constant(J * M, 1.0);
  for (int i = 0; i < J * M; ++i) {
    s.eta[i] += 0.3 * rng.normal();
    s.tau[i] += 0.3 * rng.normal();
  }
  return s;
}

CovariateTable centered_target(const std::vector<std::string>& stations, int M, const Eigen::MatrixXd& x_slopes) {
  CovariateTable t;
  t.stations = stations;
  t.n_months = M;
  t.x.resize(x_slopes.rows(), x_slopes.cols() + 1);
  t.x.col(0).setOnes();
  t.x.rightCols(x_slopes.cols()) = x_slopes;
  for (Eigen::Index k = 0; k < x_slopes.cols(); ++k) {
    t.centering.names.push_back("c" + std::to_string(k));
    t.centering.means.push_back(0.0);
    t.centering.min.push_back(-1.0);
    t.centering.max.push_back(1.0);
  }
  return t;
}

}  // namespace

TEST_CASE("single fixed draw at centered covariates reduces to the closed form") {
  const int M = 12;
  const ParameterLayout L(1, M, 2);
  RandomStream rng(1);
  LatentState s = random_state(1, M, 2, rng);
  s.beta << -5.0, 0.75;
  s.beta_star.setZero();
  s.alpha_star.setZero();
  const auto samples = samples_from(L, {s});
  const auto target = centered_target({"NEW"}, M, Eigen::MatrixXd::Zero(M, 1));
  RandomStream prng(2);
  const auto p = predictive_quantiles(samples, target, {0.5, 0.9}, prng, {false, 0.8});
  const double expect = std::exp(-5.0) - std::exp(s.alpha[0]) * std::log(std::log(2.0));
  for (int m = 0; m < M; ++m) {
    CHECK(p.at(0, m, 0).median == doctest::Approx(expect).epsilon(1e-13));
    CHECK(p.at(0, m, 0).lower == p.at(0, m, 0).upper);
  }
  CHECK(p.warnings.empty());
}

TEST_CASE("higher quantile levels never fall below lower ones, draw by draw") {
  const int M = 12, J = 3;
  const ParameterLayout L(J, M, 3);
  RandomStream rng(3);
  std::vector<LatentState> draws;
  for (int i = 0; i < 200; ++i) draws.push_back(random_state(J, M, 3, rng));
  const auto samples = samples_from(L, draws, 2);
  Eigen::MatrixXd xs(J * M, 2);
  for (Eigen::Index i = 0; i < xs.size(); ++i) xs.data()[i] = 0.5 * rng.normal();
  const auto target = centered_target({"A", "B", "C"}, M, xs);
  RandomStream prng(4);
  const auto p = predictive_quantiles(samples, target, {0.1, 0.5, 0.9, 0.99}, prng);
  for (std::size_t l = 1; l < p.levels.size(); ++l)
    CHECK((p.draws[l] - p.draws[l - 1]).minCoeff() >= 0.0);
}

TEST_CASE("prediction does not depend on the order of the sample rows") {
  const int M = 12, J = 2;
  const ParameterLayout L(J, M, 3);
  RandomStream rng(5);
  std::vector<LatentState> draws;
  for (int i = 0; i < 120; ++i) draws.push_back(random_state(J, M, 3, rng));
  const auto a = samples_from(L, draws, 3);
  std::vector<LatentState> shuffled = draws;
  std::reverse(shuffled.begin(), shuffled.end());
  std::rotate(shuffled.begin(), shuffled.begin() + 37, shuffled.end());
  const auto b = samples_from(L, shuffled, 2);
  Eigen::MatrixXd xs = Eigen::MatrixXd::Constant(J * M, 2, 0.3);
  const auto target = centered_target({"A", "B"}, M, xs);
  RandomStream r1(6), r2(6);
  const auto pa = predictive_quantiles(a, target, {0.5, 0.9}, r1);
  const auto pb = predictive_quantiles(b, target, {0.5, 0.9}, r2);
  for (std::size_t i = 0; i < pa.summary.size(); ++i) {
    CHECK(pa.summary[i].median == pb.summary[i].median);
    CHECK(pa.summary[i].lower == pb.summary[i].lower);
    CHECK(pa.summary[i].upper == pb.summary[i].upper);
    CHECK(pa.summary[i].mean == pb.summary[i].mean);
  }
}

TEST_CASE("residual draws widen the predictive band; without them the draw-wise surface is used") {
  const int M = 12;
  const ParameterLayout L(1, M, 2);
  RandomStream rng(7);
  std::vector<LatentState> draws;
  for (int i = 0; i < 300; ++i) draws.push_back(random_state(1, M, 2, rng));
  const auto samples = samples_from(L, draws);
  const auto target = centered_target({"X"}, M, Eigen::MatrixXd::Constant(M, 1, 0.2));
  RandomStream r1(8), r2(8);
  const auto full = predictive_quantiles(samples, target, {0.5}, r1, {true, 0.8});
  const auto surf = predictive_quantiles(samples, target, {0.5}, r2, {false, 0.8});
  const Eigen::RowVectorXd row0 = samples.chains[0].draws.row(0);
  const Eigen::MatrixXd direct = predict_draw(L, row0, target, {0.5});
  for (int m = 0; m < M; ++m) CHECK(surf.draws[0](0, m) == doctest::Approx(direct(m, 0)).epsilon(1e-14));
  double wf = 0, ws = 0;
  for (int m = 0; m < M; ++m) {
    wf += full.at(0, m, 0).upper - full.at(0, m, 0).lower;
    ws += surf.at(0, m, 0).upper - surf.at(0, m, 0).lower;
  }
  CHECK(wf > ws);
}

TEST_CASE("covariates outside the training range give warnings, not errors") {
  const int M = 12;
  const ParameterLayout L(1, M, 2);
  RandomStream rng(9);
  const auto samples = samples_from(L, {random_state(1, M, 2, rng)});
  const auto target = centered_target({"FAR"}, M, Eigen::MatrixXd::Constant(M, 1, 3.0));
  RandomStream prng(1);
  const auto p = predictive_quantiles(samples, target, {0.5}, prng);
  CHECK(p.warnings.size() == 1);
  CHECK(std::isfinite(p.at(0, 0, 0).median));
}

TEST_CASE("model-pinned-at-truth PP points sit on the diagonal") {
  const int M = 5;
  const ParameterLayout L(1, M, 1);
  RandomStream rng(10);
  LatentState s = random_state(1, M, 1, rng);
  s.eta[2] = std::log(40.0);
  s.tau[2] = std::log(9.0);
  CellData data;
  data.n_rivers = 1;
  data.n_months = M;
  data.y.resize(M);
  data.y[2] = gumbel::sample({40.0, 9.0}, 400, rng);
  const auto samples = samples_from(L, std::vector<LatentState>(50, s));
  const auto r = cell_fit_report(samples, data, 0, 2);
  const double n = 400;
  double dmax = 0;
  for (std::size_t i = 0; i < r.y.size(); ++i) dmax = std::max(dmax, std::abs(r.model_mean[i] - r.empirical[i]));
  CHECK(dmax < 1.36 / std::sqrt(n) + 0.5 / n);
  // Every draw is identical, so the band collapses.
  for (std::size_t i = 0; i < r.y.size(); ++i) CHECK(r.model_upper[i] - r.model_lower[i] == 0.0);
}

TEST_CASE("cell fit report values are CDFs and nondecreasing") {
  const int M = 5;
  const ParameterLayout L(2, M, 1);
  RandomStream rng(11);
  std::vector<LatentState> draws;
  for (int i = 0; i < 100; ++i) draws.push_back(random_state(2, M, 1, rng));
  CellData data;
  data.n_rivers = 2;
  data.n_months = M;
  data.y.resize(2 * M);
  data.y[6] = gumbel::sample({20.0, 3.0}, 30, rng);
  data.y[7] = {1.0, 2.0, 3.0};
  const auto samples = samples_from(L, draws);
  const auto r = cell_fit_report(samples, data, 1, 1);
  auto check_cdf = [](const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(v[i] >= 0.0);
      CHECK(v[i] <= 1.0);
      if (i) CHECK(v[i] >= v[i - 1]);
    }
  };
  check_cdf(r.empirical);
  check_cdf(r.model_mean);
  check_cdf(r.model_lower);
  check_cdf(r.model_upper);
  check_cdf(r.grid_mean);
  for (std::size_t i = 0; i < r.y.size(); ++i) CHECK(r.model_lower[i] <= r.model_upper[i]);
  CHECK(r.empirical.front() == doctest::Approx(0.5 / 30));
  CHECK_THROWS_AS(cell_fit_report(samples, data, 1, 2), std::invalid_argument);
}

TEST_CASE("summaries are equal-tailed type-7 quantiles") {
  std::vector<double> v;
  for (int i = 1; i <= 11; ++i) v.push_back(i);
  const auto s = summarize_draws(v, 0.8);
  CHECK(s.median == 6.0);
  CHECK(s.lower == doctest::Approx(2.0));
  CHECK(s.upper == doctest::Approx(10.0));
  CHECK(s.mean == 6.0);
}

namespace {

SyntheticData synth(int rivers, std::uint64_t seed, int years = 30) {
  SynthSettings st;
  st.n_rivers = rivers;
  st.n_years = years;
  RandomStream rng(seed);
  return generate_synthetic(st, rng);
}

CellData cells_of(const SyntheticData& d) {
  CellData c;
  c.n_rivers = d.covariates.n_rivers();
  c.n_months = 12;
  c.y.resize(c.n_rivers * 12);
  std::vector<std::string> st = d.covariates.stations;
  for (const auto& r : d.observations.records) {
    const int j = static_cast<int>(std::find(st.begin(), st.end(), r.station) - st.begin());
    c.y[j * 12 + r.month - 1].push_back(r.flow);
  }
  return c;
}

SamplerConfig quick(int iters, int burn, int chains, std::uint64_t seed) {
  SamplerConfig c;
  c.n_iter = iters;
  c.n_burnin = burn;
  c.n_chains = chains;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("ungauged synthetic river: true monthly medians fall inside the 80% predictive band") {
  int inside = 0, total = 0;
  for (std::uint64_t rep = 0; rep < 3; ++rep) {
    const auto d = synth(8, 100 + rep);
    const CellData cells = cells_of(d);
    const int held = 1 + static_cast<int>(rep) * 2;
    std::vector<int> train;
    for (int j = 0; j < 8; ++j)
      if (j != held) train.push_back(j);
    const auto train_cov = center_log_covariates(d.covariates.select_rivers(train));
    const Model model = make_model(train_cov, select_rivers(cells, train), 1.0, {});
    const auto samples = run_sampler(model, quick(1500, 500, 2, rep + 1));
    const auto target = center_log_covariates(d.covariates.select_rivers({held}), train_cov.centering);
    RandomStream prng(rep);
    const auto p = predictive_quantiles(samples, target, {0.5}, prng);
    for (int m = 0; m < 12; ++m) {
      const double truth =
          gumbel::quantile({std::exp(d.truth.eta[held * 12 + m]), std::exp(d.truth.tau[held * 12 + m])}, 0.5);
      inside += truth >= p.at(0, m, 0).lower && truth <= p.at(0, m, 0).upper;
      ++total;
    }
  }
  CHECK(inside >= 0.7 * total);
}

TEST_CASE("two-river cross-validation: folds, exclusion and rank correlation") {
  const auto d = synth(2, 7);
  const CellData cells = cells_of(d);
  const auto res = cross_validate(cells, d.covariates, {}, 1.0, quick(1500, 500, 2, 3));
  REQUIRE(res.folds.size() == 2);
  for (const auto& f : res.folds) {
    REQUIRE(f.ok);
    CHECK(f.training_rivers == 1);
    CHECK(f.training_cells == 12);
    CHECK(f.excludes_held_out);
    CHECK(f.training_observations == cells.n_observations() - 12 * 30);
    CHECK(f.rank_correlation > 0.7);
    for (int m = 0; m < 12; ++m) CHECK(f.pred_high[m].median >= f.pred_median[m].median);
  }
  CHECK(res.folds[0].training_checksum != res.folds[1].training_checksum);
  CHECK(res.folds[0].training_checksum ==
        training_checksum(d.covariates.select_rivers({1}), select_rivers(cells, {1})));
}

TEST_CASE("cross-validation refuses noisy empirical quantiles and degenerate inputs") {
  const auto d = synth(2, 8, 5);
  const CellData cells = cells_of(d);
  CvOptions o;
  o.data_quantile = 0.95;
  CHECK_THROWS_AS(cross_validate(cells, d.covariates, {}, 1.0, quick(20, 10, 1, 1), o), std::invalid_argument);
  const auto one = select_rivers(cells, {0});
  CHECK_THROWS_AS(cross_validate(one, d.covariates.select_rivers({0}), {}, 1.0, quick(20, 10, 1, 1)),
                  std::invalid_argument);
}

TEST_CASE("training checksum reacts to any change in the training data") {
  const auto d = synth(3, 9, 4);
  CellData cells = cells_of(d);
  const auto h0 = training_checksum(d.covariates, cells);
  cells.y[5][0] += 1e-9;
  CHECK(training_checksum(d.covariates, cells) != h0);
}
