#include "floodmax/predict.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "floodmax/gumbel.hpp"
#include "floodmax/stats.hpp"

namespace floodmax {

IntervalSummary summarize_draws(std::vector<double> draws, double interval) {
  if (draws.empty()) throw std::invalid_argument("summarize_draws: no draws");
  std::sort(draws.begin(), draws.end());
  const double tail = 0.5 * (1.0 - interval);
  IntervalSummary s;
  s.median = stats::quantile_sorted(draws, 0.5);
  s.lower = stats::quantile_sorted(draws, tail);
  s.upper = stats::quantile_sorted(draws, 1.0 - tail);
  // Summation in sorted order keeps the mean independent of draw order.
  s.mean = std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(draws.size());
  return s;
}

namespace {

void check_target(const ParameterLayout& layout, const CovariateTable& target) {
  if (target.n_coefficients() != layout.n_coefficients())
    throw std::invalid_argument("predict: target has " + std::to_string(target.n_coefficients() - 1) +
                                " covariates, the fit has " + std::to_string(layout.n_coefficients() - 1));
  if (target.n_months != layout.n_months()) throw std::invalid_argument("predict: month count differs from the fit");
}

// Linear predictors (eta, tau) without residuals for target row (j, m).
std::pair<double, double> linear_predictors(const ParameterLayout& L, const Eigen::Ref<const Eigen::RowVectorXd>& d,
                                            const CovariateTable& target, int j, int m) {
  double eta = 0.0, tau = 0.0;
  for (int k = 0; k < L.n_coefficients(); ++k) {
    const double x = target.x(target.row(j, m), k);
    eta += x * (d[L.beta(k)] + d[L.beta_star(k, m)]);
    tau += x * (d[L.alpha(k)] + d[L.alpha_star(k, m)]);
  }
  return {eta, tau};
}

std::uint64_t hash_string(const std::string& s) { return fnv1a(s.data(), s.size()); }

}  // namespace

Eigen::MatrixXd predict_draw(const ParameterLayout& layout, const Eigen::Ref<const Eigen::RowVectorXd>& draw,
                             const CovariateTable& target, const std::vector<double>& levels,
                             RandomStream* residual_rng) {
  check_target(layout, target);
  const int M = target.n_months;
  const double sd_eta = draw[layout.sigma_eta()], sd_tau = draw[layout.sigma_tau()];
  Eigen::MatrixXd out(target.n_rivers() * M, static_cast<Eigen::Index>(levels.size()));
  for (int j = 0; j < target.n_rivers(); ++j)
    for (int m = 0; m < M; ++m) {
      auto [eta, tau] = linear_predictors(layout, draw, target, j, m);
      if (residual_rng) {
        eta += sd_eta * residual_rng->normal();
        tau += sd_tau * residual_rng->normal();
      }
      const gumbel::GumbelParams g{std::exp(eta), std::exp(tau)};
      for (std::size_t l = 0; l < levels.size(); ++l) out(j * M + m, static_cast<Eigen::Index>(l)) = gumbel::quantile(g, levels[l]);
    }
  return out;
}

PredictiveSummary predictive_quantiles(const PosteriorSamples& samples, const CovariateTable& target,
                                       const std::vector<double>& levels, RandomStream& rng,
                                       const PredictOptions& options) {
  const ParameterLayout& L = samples.layout;
  check_target(L, target);
  if (levels.empty()) throw std::invalid_argument("predict: no quantile levels");
  for (double q : levels)
    if (!(q > 0.0 && q < 1.0)) throw std::domain_error("predict: quantile levels must lie in (0, 1)");
  const Eigen::MatrixXd pooled = samples.pooled();
  if (pooled.rows() == 0) throw std::invalid_argument("predict: no posterior draws");

  const int J = target.n_rivers(), M = target.n_months;
  const int nL = static_cast<int>(levels.size());
  PredictiveSummary out;
  out.stations = target.stations;
  out.n_months = M;
  out.levels = levels;

  const auto& c = target.centering;
  for (int j = 0; j < J; ++j)
    for (std::size_t k = 0; k < c.names.size(); ++k) {
      double lo = INFINITY, hi = -INFINITY;
      for (int m = 0; m < M; ++m) {
        lo = std::min(lo, target.x(target.row(j, m), static_cast<Eigen::Index>(k + 1)));
        hi = std::max(hi, target.x(target.row(j, m), static_cast<Eigen::Index>(k + 1)));
      }
      const double tol = 1e-9 * std::max(1.0, c.max[k] - c.min[k]);
      if (lo < c.min[k] - tol || hi > c.max[k] + tol)
        out.warnings.push_back("station " + target.stations[j] + ": log " + c.names[k] +
                               " lies outside the training range; prediction extrapolates");
    }

  const std::uint64_t base = rng.next_u64();
  std::vector<std::uint64_t> station_keys(J);
  for (int j = 0; j < J; ++j) station_keys[j] = hash_string(target.stations[j]);

  out.draws.assign(nL, Eigen::MatrixXd(pooled.rows(), J * M));
  for (Eigen::Index d = 0; d < pooled.rows(); ++d) {
    const auto row = pooled.row(d);
    const Eigen::RowVectorXd copy = row;
    const std::uint64_t draw_key = fnv1a(copy.data(), sizeof(double) * static_cast<std::size_t>(copy.size()));
    const double sd_eta = row[L.sigma_eta()], sd_tau = row[L.sigma_tau()];
    for (int j = 0; j < J; ++j) {
      RandomStream eps = RandomStream::derive(base, {tag(StreamTag::predict), draw_key, station_keys[j]});
      for (int m = 0; m < M; ++m) {
        auto [eta, tau] = linear_predictors(L, copy, target, j, m);
        const double e1 = eps.normal(), e2 = eps.normal();
        if (options.residuals) {
          eta += sd_eta * e1;
          tau += sd_tau * e2;
        }
        const gumbel::GumbelParams g{std::exp(eta), std::exp(tau)};
        for (int l = 0; l < nL; ++l) out.draws[l](d, j * M + m) = gumbel::quantile(g, levels[l]);
      }
    }
  }

  out.summary.resize(static_cast<std::size_t>(J * M * nL));
  std::vector<double> buf(static_cast<std::size_t>(pooled.rows()));
  for (int cell = 0; cell < J * M; ++cell)
    for (int l = 0; l < nL; ++l) {
      for (Eigen::Index d = 0; d < pooled.rows(); ++d) buf[d] = out.draws[l](d, cell);
      out.summary[static_cast<std::size_t>(cell * nL + l)] = summarize_draws(buf, options.interval);
    }
  return out;
}

CellFitReport cell_fit_report(const PosteriorSamples& samples, const CellData& data, int river, int month, double band,
                              int min_obs, int grid_points, int max_draws) {
  const ParameterLayout& L = samples.layout;
  if (river < 0 || river >= data.n_rivers || month < 0 || month >= data.n_months)
    throw std::out_of_range("cell_fit_report: cell index out of range");
  if (L.n_rivers() != data.n_rivers || L.n_months() != data.n_months)
    throw std::invalid_argument("cell_fit_report: samples and data disagree on dimensions");
  const auto& cell = data.cell(river, month);
  if (static_cast<int>(cell.size()) < min_obs)
    throw std::invalid_argument("cell_fit_report: cell has " + std::to_string(cell.size()) + " observations, need " +
                                std::to_string(min_obs));
  const Eigen::VectorXd eta_all = samples.pooled_column(L.eta(river, month));
  const Eigen::VectorXd tau_all = samples.pooled_column(L.tau(river, month));
  if (eta_all.size() == 0) throw std::invalid_argument("cell_fit_report: no posterior draws");
  // Evenly spaced subset of the pooled draws.
  const Eigen::Index D = std::min<Eigen::Index>(eta_all.size(), std::max(1, max_draws));
  Eigen::VectorXd eta(D), tau(D);
  for (Eigen::Index d = 0; d < D; ++d) {
    const Eigen::Index src = d * eta_all.size() / D;
    eta[d] = eta_all[src];
    tau[d] = tau_all[src];
  }

  CellFitReport r;
  r.river = river;
  r.month = month;
  r.y = cell;
  std::sort(r.y.begin(), r.y.end());
  const std::size_t n = r.y.size();
  for (std::size_t i = 0; i < n; ++i) r.empirical.push_back((static_cast<double>(i) + 0.5) / static_cast<double>(n));

  const double range = r.y.back() - r.y.front();
  const double pad = range > 0.0 ? 0.25 * range : std::max(1.0, 0.25 * std::abs(r.y.front()));
  for (int g = 0; g < grid_points; ++g)
    r.grid.push_back(r.y.front() - pad + (range + 2.0 * pad) * g / (grid_points - 1));

  auto evaluate = [&](const std::vector<double>& at, std::vector<double>& mean, std::vector<double>& lo,
                      std::vector<double>& hi) {
    std::vector<double> buf(static_cast<std::size_t>(D));
    for (double y : at) {
      for (Eigen::Index d = 0; d < D; ++d) buf[d] = gumbel::cdf({std::exp(eta[d]), std::exp(tau[d])}, y);
      const IntervalSummary s = summarize_draws(buf, band);
      mean.push_back(s.mean);
      lo.push_back(s.lower);
      hi.push_back(s.upper);
    }
  };
  evaluate(r.y, r.model_mean, r.model_lower, r.model_upper);
  evaluate(r.grid, r.grid_mean, r.grid_lower, r.grid_upper);
  return r;
}

CellData select_rivers(const CellData& data, const std::vector<int>& rivers) {
  CellData out;
  out.n_rivers = static_cast<int>(rivers.size());
  out.n_months = data.n_months;
  for (int j : rivers) {
    if (j < 0 || j >= data.n_rivers) throw std::out_of_range("select_rivers: river index out of range");
    for (int m = 0; m < data.n_months; ++m) out.y.push_back(data.cell(j, m));
  }
  return out;
}

std::uint64_t training_checksum(const RawCovariateTable& covariates, const CellData& data) {
  std::uint64_t h = fnv1a(nullptr, 0);
  const char sep = '\x1f';
  for (const auto& s : covariates.stations) {
    h = fnv1a(s.data(), s.size(), h);
    h = fnv1a(&sep, 1, h);
  }
  for (Eigen::Index r = 0; r < covariates.values.rows(); ++r)
    for (Eigen::Index c = 0; c < covariates.values.cols(); ++c) {
      const double v = covariates.values(r, c);
      h = fnv1a(&v, sizeof v, h);
    }
  for (const auto& cell : data.y) {
    const std::uint64_t n = cell.size();
    h = fnv1a(&n, sizeof n, h);
    if (!cell.empty()) h = fnv1a(cell.data(), sizeof(double) * cell.size(), h);
  }
  return h;
}

CvResult cross_validate(const CellData& data, const RawCovariateTable& covariates, const PriorOverrides& priors,
                        double kappa, const SamplerConfig& cfg, const CvOptions& options,
                        const std::function<void(const CvFold&)>& progress) {
  const int J = data.n_rivers, M = data.n_months;
  if (J < 2) throw std::invalid_argument("cross_validate: need at least two rivers");
  if (covariates.n_rivers() != J || covariates.n_months != M)
    throw std::invalid_argument("cross_validate: covariates and data disagree on rivers or months");
  if (!(options.data_quantile > 0.5 && options.data_quantile < 1.0))
    throw std::invalid_argument("cross_validate: data quantile must lie in (0.5, 1)");
  if (options.data_quantile > 0.9 && !options.allow_high_quantile)
    throw std::invalid_argument("cross_validate: sample quantiles above 0.9 are too noisy with ~50 points per cell");
  cfg.validate();

  CvResult result;
  result.data_quantile = options.data_quantile;
  for (int h = 0; h < J; ++h) {
    CvFold fold;
    fold.river = h;
    fold.station = covariates.stations[h];
    std::vector<int> train;
    for (int j = 0; j < J; ++j)
      if (j != h) train.push_back(j);

    for (int m = 0; m < M; ++m) {
      std::vector<double> pts = data.cell(h, m);
      std::sort(pts.begin(), pts.end());
      fold.n_points.push_back(static_cast<int>(pts.size()));
      fold.data_median.push_back(pts.empty() ? NAN : stats::quantile_sorted(pts, 0.5));
      fold.data_high.push_back(pts.empty() ? NAN : stats::quantile_sorted(pts, options.data_quantile));
      fold.points.push_back(data.cell(h, m));
    }

    try {
      const RawCovariateTable train_cov = covariates.select_rivers(train);
      CellData train_data = select_rivers(data, train);
      fold.training_rivers = train_cov.n_rivers();
      fold.training_cells = train_data.n_cells();
      fold.training_observations = train_data.n_observations();
      fold.training_checksum = training_checksum(train_cov, train_data);
      fold.excludes_held_out =
          std::find(train_cov.stations.begin(), train_cov.stations.end(), fold.station) == train_cov.stations.end() &&
          fold.training_observations + std::accumulate(fold.n_points.begin(), fold.n_points.end(), std::size_t{0}) ==
              data.n_observations();
      if (!fold.excludes_held_out) throw std::logic_error("training set contains held-out data");

      const CovariateTable centered = center_log_covariates(train_cov);
      const Model model = make_model(centered, std::move(train_data), kappa, priors);
      SamplerConfig fold_cfg = cfg;
      fold.fold_seed = RandomStream::derive(cfg.seed, {tag(StreamTag::fold), static_cast<std::uint64_t>(h)}).seed();
      fold_cfg.seed = fold.fold_seed;
      const PosteriorSamples samples = run_sampler(model, fold_cfg);

      const CovariateTable target = center_log_covariates(covariates.select_rivers({h}), centered.centering);
      RandomStream rng = RandomStream::derive(fold.fold_seed, {tag(StreamTag::predict)});
      const PredictiveSummary pq =
          predictive_quantiles(samples, target, {0.5, options.data_quantile}, rng, options.predict);
      fold.warnings = pq.warnings;
      std::vector<double> pm, dm;
      for (int m = 0; m < M; ++m) {
        fold.pred_median.push_back(pq.at(0, m, 0));
        fold.pred_high.push_back(pq.at(0, m, 1));
        if (fold.n_points[m] > 0) {
          pm.push_back(pq.at(0, m, 0).median);
          dm.push_back(fold.data_median[m]);
        }
      }
      fold.rank_correlation = pm.size() >= 3 ? stats::spearman(pm, dm) : NAN;
      fold.ok = true;
    } catch (const std::exception& e) {
      fold.ok = false;
      fold.error = e.what();
    }
    if (progress) progress(fold);
    result.folds.push_back(std::move(fold));
  }
  return result;
}

}  // namespace floodmax
