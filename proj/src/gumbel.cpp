#include "floodmax/gumbel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace floodmax::gumbel {

void GumbelParams::validate() const {
  if (!std::isfinite(mu)) throw std::invalid_argument("gumbel: location must be finite");
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("gumbel: scale must be positive and finite");
}

double cdf(const GumbelParams& p, double y) {
  if (y == std::numeric_limits<double>::infinity()) return 1.0;
  if (y == -std::numeric_limits<double>::infinity()) return 0.0;
  return std::exp(-std::exp(-(y - p.mu) / p.sigma));
}

double log_cdf(const GumbelParams& p, double y) { return -std::exp(-(y - p.mu) / p.sigma); }

double log_survival(const GumbelParams& p, double y) {
  return std::log(-std::expm1(-std::exp(-(y - p.mu) / p.sigma)));
}

double quantile(const GumbelParams& p, double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::domain_error("gumbel: quantile level must lie in (0, 1)");
  return p.mu - p.sigma * std::log(-std::log(q));
}

double logpdf(const GumbelParams& p, double y) {
  const double z = (y - p.mu) / p.sigma;
  return -std::log(p.sigma) - z - std::exp(-z);
}

double sample_one(const GumbelParams& p, RandomStream& rng) {
  return p.mu - p.sigma * std::log(-std::log(rng.uniform()));
}

std::vector<double> sample(const GumbelParams& p, std::size_t n, RandomStream& rng) {
  std::vector<double> out(n);
  for (auto& v : out) v = sample_one(p, rng);
  return out;
}

double log_likelihood(const GumbelParams& p, std::span<const double> y) {
  double s = 0.0;
  for (double v : y) s += logpdf(p, v);
  return s;
}

std::pair<double, double> scaled_score(const GumbelParams& p, std::span<const double> y) {
  double s_mu = 0.0, s_sigma = 0.0;
  for (double v : y) {
    const double z = (v - p.mu) / p.sigma;
    const double w = std::exp(-z);
    s_mu += 1.0 - w;
    s_sigma += z * (1.0 - w) - 1.0;
  }
  const double n = static_cast<double>(y.size());
  return {s_mu / n, s_sigma / n};
}

namespace {

// Profile equation on centered data d (mean zero), shifted so exponents are <= 0:
//   g(sigma) = sigma + sum(d w) / sum(w),  w = exp(-(d - d_min)/sigma)
// g is strictly increasing with g'(sigma) = 1 + Var_w(d)/sigma^2.
struct Profile {
  std::span<const double> d;
  double d_min;

  void eval(double sigma, double& g, double& dg) const {
    double sw = 0.0, swd = 0.0, swd2 = 0.0;
    for (double v : d) {
      const double w = std::exp(-(v - d_min) / sigma);
      sw += w;
      swd += w * v;
      swd2 += w * v * v;
    }
    const double m = swd / sw;
    const double var = std::max(0.0, swd2 / sw - m * m);
    g = sigma + m;
    dg = 1.0 + var / (sigma * sigma);
  }
};

}  // namespace

FitResult ml_fit(std::span<const double> y) {
  if (y.size() < 2) throw std::invalid_argument("gumbel ml_fit: need at least two observations");
  const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
  if (*lo_it == *hi_it) throw std::invalid_argument("gumbel ml_fit: degenerate sample (all values equal)");

  const double n = static_cast<double>(y.size());
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / n;
  std::vector<double> d(y.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    d[i] = y[i] - ybar;
    ss += d[i] * d[i];
  }
  const double d_min = *lo_it - ybar;
  const Profile prof{d, d_min};

  // Bracket: g(0+) = d_min < 0 and g(range) >= range + d_min > 0.
  double lo = 0.0, hi = (*hi_it - *lo_it);
  double sigma = std::sqrt(ss / (n - 1.0)) * std::sqrt(6.0) / M_PI;
  if (!(sigma > lo && sigma < hi)) sigma = 0.5 * hi;

  int it = 0;
  bool converged = false;
  for (; it < kFitMaxIterations; ++it) {
    double g, dg;
    prof.eval(sigma, g, dg);
    if (g > 0.0) hi = sigma; else lo = sigma;
    double next = sigma - g / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - sigma);
    sigma = next;
    if (step <= kFitRelTolerance * sigma) {
      converged = true;
      ++it;
      break;
    }
  }

  double sw = 0.0;
  for (double v : d) sw += std::exp(-(v - d_min) / sigma);
  const GumbelParams fitted{ybar + d_min - sigma * std::log(sw / n), sigma};
  if (!converged) throw FitError("gumbel ml_fit: no convergence within iteration cap", fitted);
  return FitResult{fitted, it, y.size() < 5};
}

double ad_statistic(std::span<const double> y, const GumbelParams& fitted) {
  std::vector<double> s(y.begin(), y.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lf = log_cdf(fitted, s[i]);
    const double ls = log_survival(fitted, s[n - 1 - i]);
    acc += (2.0 * static_cast<double>(i) + 1.0) * (lf + ls);
  }
  return -static_cast<double>(n) - acc / static_cast<double>(n);
}

AndersonDarling anderson_darling(std::span<const double> y, int n_boot, RandomStream& rng) {
  if (y.size() < 5) throw std::invalid_argument("anderson_darling: need at least 5 observations");
  if (n_boot < 99) throw std::invalid_argument("anderson_darling: n_boot must be at least 99");

  std::vector<double> sorted(y.begin(), y.end());
  std::sort(sorted.begin(), sorted.end());
  const GumbelParams fitted = ml_fit(sorted).params;
  const double a2 = ad_statistic(sorted, fitted);

  const std::uint64_t base = rng.next_u64();
  int exceed = 0;
  std::vector<double> rep(sorted.size());
  for (int b = 0; b < n_boot; ++b) {
    RandomStream sub = RandomStream::derive(base, {tag(StreamTag::bootstrap), static_cast<std::uint64_t>(b)});
    for (auto& v : rep) v = sample_one(fitted, sub);
    GumbelParams refit;
    try {
      refit = ml_fit(rep).params;
    } catch (const FitError& e) {
      refit = e.last_iterate;
    }
    if (ad_statistic(rep, refit) >= a2) ++exceed;
  }
  return {a2, (1.0 + exceed) / (n_boot + 1.0), fitted};
}

}  // namespace floodmax::gumbel
