#pragma once

#include <span>
#include <vector>

namespace floodmax::stats {

// Linear-interpolation sample quantile (Hyndman-Fan type 7). Copies and sorts.
double quantile(std::span<const double> x, double q);
// Same on already sorted input.
double quantile_sorted(std::span<const double> sorted, double q);

// Ranks 1..n with ties given their average rank.
std::vector<double> ranks(std::span<const double> x);
double pearson(std::span<const double> a, std::span<const double> b);
double spearman(std::span<const double> a, std::span<const double> b);

// Largest gap between the empirical CDF of x and the uniform CDF on [0, 1].
double ks_distance_uniform(std::span<const double> x);

struct DensityGrid {
  std::vector<double> x;
  std::vector<double> density;
};

// Gaussian kernel density estimate with Silverman's bandwidth on `points`
// equally spaced values covering the data plus three bandwidths either side.
DensityGrid kde(std::span<const double> x, int points);

}  // namespace floodmax::stats
