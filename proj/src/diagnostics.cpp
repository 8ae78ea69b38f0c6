#include "floodmax/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace floodmax {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double variance(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

// Autocovariance of a centred series at one lag, normalised by n.
double autocovariance(const Eigen::VectorXd& centred, Eigen::Index lag) {
  const Eigen::Index n = centred.size();
  return centred.head(n - lag).dot(centred.tail(n - lag)) / static_cast<double>(n);
}

}  // namespace

double split_rhat(const ChainSeries& chains) {
  ChainSeries halves;
  for (const auto& c : chains) {
    const Eigen::Index h = c.size() / 2;
    if (h < 2) return kNaN;
    halves.push_back(c.head(h));
    halves.push_back(c.segment(c.size() - h, h));
  }
  const double n = static_cast<double>(halves.front().size());
  const double m = static_cast<double>(halves.size());
  Eigen::VectorXd means(halves.size()), vars(halves.size());
  for (std::size_t i = 0; i < halves.size(); ++i) {
    means[i] = halves[i].mean();
    vars[i] = variance(halves[i]);
  }
  const double W = vars.mean();
  if (!(W > 0.0)) return kNaN;
  const double B = n * (means.array() - means.mean()).square().sum() / (m - 1.0);
  const double var_plus = (n - 1.0) / n * W + B / n;
  return std::sqrt(var_plus / W);
}

double effective_sample_size(const ChainSeries& chains) {
  if (chains.empty()) return kNaN;
  const Eigen::Index n = chains.front().size();
  for (const auto& c : chains)
    if (c.size() != n) throw std::invalid_argument("effective_sample_size: chains differ in length");
  if (n < 4) return kNaN;
  const double m = static_cast<double>(chains.size());
  const Eigen::Index max_lag = n - 1;

  std::vector<Eigen::VectorXd> centred;
  Eigen::VectorXd means(chains.size());
  for (std::size_t i = 0; i < chains.size(); ++i) {
    means[i] = chains[i].mean();
    centred.push_back(chains[i].array() - means[i]);
  }
  double W = 0.0;
  for (const auto& c : centred) W += autocovariance(c, 0) * n / (n - 1.0);
  W /= m;
  const double B_over_n = chains.size() > 1 ? (means.array() - means.mean()).square().sum() / (m - 1.0) : 0.0;
  const double var_plus = W * (n - 1.0) / n + B_over_n;
  if (!(var_plus > 0.0)) return kNaN;

  auto rho = [&](Eigen::Index lag) {
    double mean_acov = 0.0;
    for (const auto& c : centred) mean_acov += autocovariance(c, lag);
    mean_acov /= m;
    return 1.0 - (W - mean_acov) / var_plus;
  };

  // Geyer: sum pairs Gamma_k = rho_{2k} + rho_{2k+1} while positive, enforcing monotone decrease.
  double sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; 2 * k + 1 <= max_lag; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    sum += pair;
    prev_pair = pair;
  }
  const double tau = -1.0 + 2.0 * sum;
  const double total = m * static_cast<double>(n);
  return total / std::max(tau, 1.0 / std::log10(total));
}

const ParameterDiagnostics& DiagnosticsReport::at(const std::string& name) const {
  for (const auto& p : parameters)
    if (p.name == name) return p;
  throw std::out_of_range("no diagnostics for parameter " + name);
}

DiagnosticsReport diagnostics(const PosteriorSamples& samples) {
  DiagnosticsReport report;
  const auto& names = samples.layout.names();
  for (int i = 0; i < samples.layout.size(); ++i) {
    ChainSeries series;
    for (const auto& c : samples.chains) series.push_back(c.draws.col(i));
    const Eigen::VectorXd pooled = samples.pooled_column(i);
    ParameterDiagnostics pd;
    pd.name = names[i];
    pd.mean = pooled.size() > 0 ? pooled.mean() : kNaN;
    pd.sd = std::sqrt(variance(pooled));
    pd.rhat = samples.chains.size() >= 2 ? split_rhat(series) : kNaN;
    pd.ess = effective_sample_size(series);
    report.parameters.push_back(pd);
  }
  for (const auto& c : samples.chains)
    report.chains.push_back(
        {c.chain, c.seed, c.accept_rich, c.accept_poor, c.poor_failures, c.final_step_hyper, c.final_scale_rich});
  return report;
}

}  // namespace floodmax
