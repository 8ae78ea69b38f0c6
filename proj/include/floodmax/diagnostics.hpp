#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "floodmax/sampler.hpp"

namespace floodmax {

// Each chain is one column-like series of equal length.
using ChainSeries = std::vector<Eigen::VectorXd>;

// Split R-hat: every chain is cut in half and the halves are treated as
// separate chains. NaN when the within-chain variance is zero or there are
// fewer than two chains.
double split_rhat(const ChainSeries& chains);

// Effective sample size over all chains, with autocorrelations truncated by
// Geyer's initial monotone sequence. NaN for zero-variance input.
double effective_sample_size(const ChainSeries& chains);

struct ParameterDiagnostics {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double rhat = 0.0;
  double ess = 0.0;
};

struct ChainDiagnostics {
  int chain = 0;
  std::uint64_t seed = 0;
  double accept_rich = 0.0;
  double accept_poor = 0.0;
  long poor_failures = 0;
  double final_step_hyper = 0.0;
  double final_scale_rich = 0.0;
};

struct DiagnosticsReport {
  std::vector<ParameterDiagnostics> parameters;
  std::vector<ChainDiagnostics> chains;

  const ParameterDiagnostics& at(const std::string& name) const;
};

DiagnosticsReport diagnostics(const PosteriorSamples& samples);

}  // namespace floodmax
