#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "floodmax/design.hpp"
#include "floodmax/priors.hpp"
#include "floodmax/random.hpp"

namespace floodmax {

// Observed maxima grouped by (river, month), cell j*M + m lines up with the
// design rows. Empty cells are legal.
struct CellData {
  int n_rivers = 0;
  int n_months = kDefaultMonths;
  std::vector<std::vector<double>> y;

  int n_cells() const { return n_rivers * n_months; }
  std::size_t n_observations() const;
  const std::vector<double>& cell(int river, int month) const { return y.at(river * n_months + month); }
};

// eta = log(mu), tau = log(sigma) per cell, plus the data-poor block.
struct LatentState : CoefficientState {
  Eigen::VectorXd eta;
  Eigen::VectorXd tau;

  bool all_finite() const;
};

struct Model {
  DesignMatrices design;
  SeasonalPrecision seasonal;
  PriorSet priors;
  CellData data;

  Model(DesignMatrices d, SeasonalPrecision s, PriorSet p, CellData c);

  int n_coefficients() const { return design.n_coefficients(); }
  int n_months() const { return design.n_months; }
  int n_cells() const { return design.n_cells(); }
  int n_latent_coefficients() const { return n_coefficients() * (n_months() + 1); }
};

// Design, seasonal precision (kappa) and priors assembled around a centered
// covariate table and the matching cell data.
Model make_model(const CovariateTable& covariates, CellData data, double kappa, const PriorOverrides& priors);

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Data-rich block

// Conditional target of (eta, tau) for one cell given the data-poor block:
//   prod_t Gumbel(y_t | e^eta, e^tau) * N(eta | eta_mean, sd_eta^2) * N(tau | tau_mean, sd_tau^2)
class CellTarget {
 public:
  CellTarget(std::span<const double> y, double eta_mean, double sd_eta, double tau_mean, double sd_tau)
      : y_(y), eta_mean_(eta_mean), sd_eta_(sd_eta), tau_mean_(tau_mean), sd_tau_(sd_tau) {}

  struct Evaluation {
    double log_density;
    Eigen::Vector2d gradient;
    Eigen::Matrix2d hessian;
  };

  // Unnormalised log density.
  double log_density(double eta, double tau) const;
  Evaluation evaluate(double eta, double tau) const;

  std::span<const double> y() const { return y_; }
  double eta_mean() const { return eta_mean_; }
  double sd_eta() const { return sd_eta_; }
  double tau_mean() const { return tau_mean_; }
  double sd_tau() const { return sd_tau_; }

 private:
  std::span<const double> y_;
  double eta_mean_, sd_eta_, tau_mean_, sd_tau_;
};

inline constexpr double kMinLogScale = -20.0;
inline constexpr double kFallbackProposalSd = 0.1;

struct CellMove {
  bool accepted = false;
  bool exact = false;     // empty cell, drawn from the Gaussian prior
  bool fallback = false;  // Hessian not negative definite at the current point
};

// One Metropolis-Hastings update of (eta, tau). Proposal: Gaussian with mean
// x + min(scale^2, 1) (-H)^{-1} g and covariance scale^2 (-H)^{-1}, both
// evaluated at the current point, so scale 1 is the full Newton proposal and
// small scales give short local moves; the reverse density is evaluated at the
// proposed point. Falls back to a random walk with SD 0.1 when -H is not
// positive definite. Proposals with tau < -20 are rejected.
CellMove cell_mh_update(const CellTarget& target, double& eta, double& tau, double scale, RandomStream& rng);

struct RichStepStats {
  int proposed = 0;
  int accepted = 0;
  int exact = 0;
  int fallback = 0;
};

// Updates every cell independently with its own stream (cell_streams[j*M+m]).
RichStepStats data_rich_step(LatentState& state, const Model& model, std::vector<RandomStream>& cell_streams,
                             double scale);

// ---------------------------------------------------------------------------
// Data-poor block

struct GaussianConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;
  Eigen::LLT<Eigen::MatrixXd> llt;

  Eigen::MatrixXd covariance() const;
  Eigen::VectorXd draw(RandomStream& rng) const;
  double log_det_precision() const;
};

// Conditionals of nu_eta = (beta, beta*) and nu_tau = (alpha, alpha*).
// Given (eta, tau) the two are independent.
struct DataPoorConditional {
  GaussianConditional eta_part;
  GaussianConditional tau_part;
};

enum class Subsystem { location, scale };

// Fixed pieces of the linear-Gaussian layer: A = [X Z], A'A and prior means.
class DataPoorBlock {
 public:
  explicit DataPoorBlock(const Model& model);

  // Exact Gaussian conditional of nu given the response (eta or tau), the
  // seasonal SDs (psi or phi) and the residual SD.
  GaussianConditional conditional(const Eigen::VectorXd& response, const Eigen::VectorXd& seasonal_sd,
                                  double residual_sd, Subsystem which) const;

  // log p(response | seasonal_sd, residual_sd) with nu integrated out, from the
  // precision form. Optionally hands back the conditional it factorised.
  double log_marginal(const Eigen::VectorXd& response, const Eigen::VectorXd& seasonal_sd, double residual_sd,
                      Subsystem which, GaussianConditional* conditional_out = nullptr) const;

  const Eigen::MatrixXd& A() const { return A_; }
  const Model& model() const { return *model_; }
  int dimension() const { return static_cast<int>(A_.cols()); }

 private:
  const Model* model_;
  Eigen::MatrixXd A_;
  Eigen::MatrixXd AtA_;
  Eigen::VectorXd prior_mean_[2];
  Eigen::VectorXd prior_precision_diag_[2];  // coefficient part only
};

DataPoorConditional data_poor_gaussian_conditional(const LatentState& state, const DataPoorBlock& block);

// Hyperparameters on the log scale: (log psi_0..p, log phi_0..p, log sigma_eta, log sigma_tau).
Eigen::VectorXd log_hyperparameters(const CoefficientState& s);
void set_log_hyperparameters(CoefficientState& s, const Eigen::VectorXd& theta);
double log_hyperprior(const Eigen::VectorXd& theta, const PriorSet& priors);

// Joint log-scale Gaussian random walk: theta* = theta + step * chol * z.
struct HyperProposal {
  double step = 0.1;
  Eigen::MatrixXd chol;  // lower triangular; identity until adapted
};

struct PoorStepResult {
  bool accepted = false;
  bool numerical_failure = false;
};

// One-block move over (theta, nu). The acceptance ratio uses the marginal
// density of (eta, tau) given theta, the hyperprior and the log-scale Jacobian.
// On acceptance nu is the exact draw from the conditional at theta*. On
// rejection theta is kept and nu is refreshed from its conditional at the
// current theta (a Gibbs step that leaves the same target invariant).
PoorStepResult data_poor_step(LatentState& state, const DataPoorBlock& block, const HyperProposal& proposal,
                              RandomStream& rng);

// ---------------------------------------------------------------------------
// Chains

struct SamplerConfig {
  int n_iter = 30000;
  int n_burnin = 10000;
  int thin = 1;
  int n_chains = 4;
  std::uint64_t seed = 1;
  double rw_step_hyper = 0.1;
  double target_accept_rich = 0.7;
  double target_accept_poor = 0.3;
  // SD of the log-normal perturbation of starting hyperparameters, per chain.
  double init_jitter = 0.5;

  void validate() const;
  int retained_per_chain() const { return (n_iter - n_burnin) / thin; }
};

// Column naming of a posterior draw. k is 0-based, months and rivers 1-based:
// beta_k, beta_star_k_m, alpha_k, alpha_star_k_m, psi_k, phi_k, sigma_eta,
// sigma_tau, eta_j_m, tau_j_m.
class ParameterLayout {
 public:
  ParameterLayout() = default;
  ParameterLayout(int n_rivers, int n_months, int n_coefficients);
  // Recovers the dimensions from a list of column names.
  static ParameterLayout from_names(const std::vector<std::string>& names);

  int n_rivers() const { return J_; }
  int n_months() const { return M_; }
  int n_coefficients() const { return P_; }
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  int index_of(const std::string& name) const;

  int beta(int k) const { return k; }
  int beta_star(int k, int m) const { return P_ + k * M_ + m; }
  int alpha(int k) const { return P_ * (M_ + 1) + k; }
  int alpha_star(int k, int m) const { return P_ * (M_ + 1) + P_ + k * M_ + m; }
  int psi(int k) const { return 2 * P_ * (M_ + 1) + k; }
  int phi(int k) const { return 2 * P_ * (M_ + 1) + P_ + k; }
  int sigma_eta() const { return 2 * P_ * (M_ + 2); }
  int sigma_tau() const { return sigma_eta() + 1; }
  int eta(int j, int m) const { return sigma_tau() + 1 + j * M_ + m; }
  int tau(int j, int m) const { return sigma_tau() + 1 + J_ * M_ + j * M_ + m; }

  Eigen::VectorXd flatten(const LatentState& s) const;
  LatentState unflatten(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;

 private:
  int J_ = 0, M_ = 0, P_ = 0;
  std::vector<std::string> names_;
};

struct ChainSamples {
  int chain = 0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd draws;  // retained draws x layout.size()
  double accept_rich = 0.0;
  double accept_poor = 0.0;
  long poor_failures = 0;
  double final_step_hyper = 0.0;
  double final_scale_rich = 0.0;
};

struct PosteriorSamples {
  ParameterLayout layout;
  std::uint64_t master_seed = 0;
  // Hash recorded in the sample files, 0 when unknown.
  std::uint64_t config_hash = 0;
  std::vector<ChainSamples> chains;

  Eigen::Index total_draws() const;
  // All chains stacked in chain order.
  Eigen::MatrixXd pooled() const;
  Eigen::VectorXd pooled_column(int index) const;
};

struct InitOptions {
  double hyper_jitter = 0.0;
};

// eta, tau from per-cell Gumbel ML fits where a cell has >= 2 distinct values
// (and a positive fitted location), otherwise from least squares of the fitted
// values on X. beta, alpha from that least squares; seasonal effects at 0;
// SDs at their prior means (optionally jittered on the log scale).
LatentState initialize_state(const Model& model, RandomStream& rng, const InitOptions& opt = {});

double log_likelihood(const LatentState& s, const Model& model);
double log_posterior(const LatentState& s, const Model& model);

// One chain. Stream layout: poor-block stream derive(seed, {chain, c}); cell
// streams derive(chain seed, {cell, i}).
ChainSamples run_chain(const Model& model, const SamplerConfig& cfg, int chain);

// All chains, run concurrently; result is independent of scheduling.
PosteriorSamples run_sampler(const Model& model, const SamplerConfig& cfg);

}  // namespace floodmax
