#include "floodmax/prelim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "floodmax/random.hpp"
#include "floodmax/stats.hpp"

namespace floodmax {

GofReport goodness_of_fit(const CellData& data, int n_boot, std::uint64_t seed, int min_obs) {
  GofReport r;
  std::vector<double> pvals;
  for (int j = 0; j < data.n_rivers; ++j)
    for (int m = 0; m < data.n_months; ++m) {
      CellGof c;
      c.river = j;
      c.month = m;
      const auto& y = data.cell(j, m);
      c.n = static_cast<int>(y.size());
      if (c.n < min_obs) {
        c.note = "fewer than " + std::to_string(min_obs) + " observations";
      } else {
        try {
          RandomStream rng = RandomStream::derive(
              seed, {tag(StreamTag::bootstrap), static_cast<std::uint64_t>(j * data.n_months + m)});
          const auto ad = gumbel::anderson_darling(y, n_boot, rng);
          c.fit = ad.fitted;
          c.ad_statistic = ad.statistic;
          c.ad_p_value = ad.p_value;
          c.ok = true;
          pvals.push_back(ad.p_value);
        } catch (const std::exception& e) {
          c.note = e.what();
        }
      }
      r.cells.push_back(std::move(c));
    }
  for (int b = 0; b <= 10; ++b) r.bin_edges.push_back(b / 10.0);
  r.bin_counts.assign(10, 0);
  for (double p : pvals) ++r.bin_counts[std::min(9, static_cast<int>(p * 10.0))];
  r.ks_uniform = pvals.empty() ? NAN : stats::ks_distance_uniform(pvals);
  return r;
}

RegressionFit ols_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& candidates, std::vector<int> terms) {
  std::sort(terms.begin(), terms.end());
  const int n = static_cast<int>(y.size());
  const int k = static_cast<int>(terms.size());
  if (candidates.rows() != n) throw std::invalid_argument("ols_fit: row mismatch");
  if (n <= k + 1) throw std::invalid_argument("ols_fit: not enough observations");
  Eigen::MatrixXd X(n, k + 1);
  X.col(0).setOnes();
  for (int t = 0; t < k; ++t) X.col(t + 1) = candidates.col(terms[t]);
  RegressionFit f;
  f.terms = terms;
  f.n = n;
  f.coef = X.colPivHouseholderQr().solve(y);
  f.rss = (y - X * f.coef).squaredNorm();
  f.aic = n * std::log(2.0 * M_PI * f.rss / n) + n + 2.0 * (k + 2);
  return f;
}

std::vector<RegressionFit> all_subsets(const Eigen::VectorXd& y, const Eigen::MatrixXd& candidates) {
  const int p = static_cast<int>(candidates.cols());
  if (p > 20) throw std::invalid_argument("all_subsets: too many candidates");
  std::vector<RegressionFit> out;
  for (unsigned mask = 0; mask < (1u << p); ++mask) {
    std::vector<int> terms;
    for (int t = 0; t < p; ++t)
      if (mask & (1u << t)) terms.push_back(t);
    out.push_back(ols_fit(y, candidates, terms));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.aic < b.aic; });
  return out;
}

StepwiseResult stepwise_aic(const Eigen::VectorXd& y, const Eigen::MatrixXd& candidates) {
  const int p = static_cast<int>(candidates.cols());
  StepwiseResult r;
  RegressionFit current = ols_fit(y, candidates, {});
  r.trace.push_back({"start", -1, current.aic, {}});
  for (int guard = 0; guard < 4 * (p + 1); ++guard) {
    RegressionFit best = current;
    std::string action;
    int term = -1;
    for (int t = 0; t < p; ++t) {
      std::vector<int> terms = current.terms;
      const auto it = std::find(terms.begin(), terms.end(), t);
      const bool in = it != terms.end();
      if (in)
        terms.erase(it);
      else
        terms.push_back(t);
      const RegressionFit f = ols_fit(y, candidates, terms);
      if (f.aic < best.aic - 1e-12) {
        best = f;
        action = in ? "drop" : "add";
        term = t;
      }
    }
    if (term < 0) break;
    current = best;
    r.trace.push_back({action, term, current.aic, current.terms});
  }
  r.selected = current;
  return r;
}

PrelimReport preliminary_analysis(const CellData& data, const RawCovariateTable& covariates, int n_boot,
                                  std::uint64_t seed, int min_obs) {
  if (covariates.n_rivers() != data.n_rivers || covariates.n_months != data.n_months)
    throw std::invalid_argument("preliminary_analysis: covariates and data disagree on rivers or months");
  PrelimReport r;
  r.stations = covariates.stations;
  r.covariate_names = covariates.names;
  r.gof = goodness_of_fit(data, n_boot, seed, min_obs);

  const CovariateTable centered = center_log_covariates(covariates);
  const int p = covariates.n_covariates();
  const Eigen::MatrixXd cand_all = centered.x.rightCols(p);

  r.correlation.resize(p, p);
  for (int a = 0; a < p; ++a)
    for (int b = 0; b < p; ++b) {
      const Eigen::VectorXd ca = cand_all.col(a), cb = cand_all.col(b);
      r.correlation(a, b) = stats::pearson(std::span<const double>(ca.data(), ca.size()),
                                           std::span<const double>(cb.data(), cb.size()));
    }

  for (int which = 0; which < 2; ++which) {
    std::vector<int> rows;
    std::vector<double> resp;
    for (const auto& c : r.gof.cells) {
      if (!c.ok) continue;
      const double v = which == 0 ? c.fit.mu : c.fit.sigma;
      if (!(v > 0.0)) continue;
      rows.push_back(c.river * data.n_months + c.month);
      resp.push_back(std::log(v));
    }
    r.n_cells[which] = static_cast<int>(rows.size());
    if (static_cast<int>(rows.size()) <= p + 2) continue;
    Eigen::MatrixXd cand(rows.size(), p);
    for (std::size_t i = 0; i < rows.size(); ++i) cand.row(static_cast<Eigen::Index>(i)) = cand_all.row(rows[i]);
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(resp.data(), static_cast<Eigen::Index>(resp.size()));
    r.subsets[which] = all_subsets(y, cand);
    r.stepwise[which] = stepwise_aic(y, cand);
  }
  return r;
}

}  // namespace floodmax
