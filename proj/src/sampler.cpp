#include "floodmax/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>

#include "floodmax/gumbel.hpp"

namespace floodmax {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

std::size_t CellData::n_observations() const {
  std::size_t n = 0;
  for (const auto& c : y) n += c.size();
  return n;
}

bool LatentState::all_finite() const {
  auto fin = [](const Eigen::VectorXd& v) { return v.allFinite(); };
  return fin(eta) && fin(tau) && fin(beta) && fin(beta_star) && fin(alpha) && fin(alpha_star) && fin(psi) &&
         fin(phi) && std::isfinite(sigma_eta) && std::isfinite(sigma_tau);
}

Model::Model(DesignMatrices d, SeasonalPrecision s, PriorSet p, CellData c)
    : design(std::move(d)), seasonal(std::move(s)), priors(std::move(p)), data(std::move(c)) {
  priors.validate();
  if (seasonal.n_months() != design.n_months) throw std::invalid_argument("model: seasonal precision size != months");
  if (priors.n_coefficients() != design.n_coefficients())
    throw std::invalid_argument("model: prior count does not match covariate count");
  if (data.n_rivers != design.n_rivers || data.n_months != design.n_months ||
      static_cast<int>(data.y.size()) != design.n_cells())
    throw std::invalid_argument("model: observation cells do not match the design");
}

Model make_model(const CovariateTable& covariates, CellData data, double kappa, const PriorOverrides& priors) {
  return Model(build_design(covariates), seasonal_precision(kappa, covariates.n_months),
               make_prior_set(covariates.n_coefficients() - 1, priors), std::move(data));
}

// ---------------------------------------------------------------------------
// Data-rich block

double CellTarget::log_density(double eta, double tau) const {
  const double mu = std::exp(eta), sigma = std::exp(tau);
  double lp = 0.0;
  for (double v : y_) {
    const double z = (v - mu) / sigma;
    lp += -z - std::exp(-z);
  }
  lp -= static_cast<double>(y_.size()) * tau;
  const double de = (eta - eta_mean_) / sd_eta_, dt = (tau - tau_mean_) / sd_tau_;
  return lp - 0.5 * (de * de + dt * dt);
}

CellTarget::Evaluation CellTarget::evaluate(double eta, double tau) const {
  const double mu = std::exp(eta), sigma = std::exp(tau);
  const double r = mu / sigma;
  const double n = static_cast<double>(y_.size());
  double sz = 0.0, sw = 0.0, swz = 0.0, swz2 = 0.0;
  for (double v : y_) {
    const double z = (v - mu) / sigma;
    const double w = std::exp(-z);
    sz += z;
    sw += w;
    swz += w * z;
    swz2 += w * z * z;
  }
  Evaluation e;
  const double de = (eta - eta_mean_) / sd_eta_, dt = (tau - tau_mean_) / sd_tau_;
  e.log_density = -n * tau - sz - sw - 0.5 * (de * de + dt * dt);
  // d/deta z = -r, d/dtau z = -z, per-observation log density -tau - z - w.
  e.gradient << r * (n - sw) - de / sd_eta_, -n + sz - swz - dt / sd_tau_;
  const double h_ee = r * (n - sw) - r * r * sw - 1.0 / (sd_eta_ * sd_eta_);
  const double h_et = -r * (n - sw) - r * swz;
  const double h_tt = -(sz - swz) - swz2 - 1.0 / (sd_tau_ * sd_tau_);
  e.hessian << h_ee, h_et, h_et, h_tt;
  return e;
}

namespace {

// Gaussian proposal N(mean, cov) with cov = L L'.
struct Proposal {
  Eigen::Vector2d mean;
  Eigen::Matrix2d chol;       // lower
  Eigen::Matrix2d precision;  // cov^{-1}
  double log_det_cov;
  bool fallback;

  double log_density(const Eigen::Vector2d& x) const {
    const Eigen::Vector2d d = x - mean;
    return -kLog2Pi - 0.5 * log_det_cov - 0.5 * d.dot(precision * d);
  }
};

Proposal make_proposal(const Eigen::Vector2d& x, const CellTarget::Evaluation& e, double scale) {
  const Eigen::Matrix2d neg_h = -e.hessian;
  const double det = neg_h.determinant();
  Proposal p;
  if (neg_h(0, 0) > 0.0 && det > 0.0 && std::isfinite(det) && e.gradient.allFinite()) {
    const Eigen::Matrix2d cov_unit = neg_h.inverse();
    p.fallback = false;
    p.mean = x + std::min(scale * scale, 1.0) * (cov_unit * e.gradient);
    const Eigen::Matrix2d cov = scale * scale * cov_unit;
    const double l00 = std::sqrt(cov(0, 0));
    const double l10 = cov(1, 0) / l00;
    const double l11 = std::sqrt(std::max(cov(1, 1) - l10 * l10, 0.0));
    p.chol << l00, 0.0, l10, l11;
    p.precision = neg_h / (scale * scale);
    p.log_det_cov = 4.0 * std::log(scale) - std::log(det);
  } else {
    p.fallback = true;
    p.mean = x;
    const double v = kFallbackProposalSd * kFallbackProposalSd;
    p.chol = Eigen::Matrix2d::Identity() * kFallbackProposalSd;
    p.precision = Eigen::Matrix2d::Identity() / v;
    p.log_det_cov = 2.0 * std::log(v);
  }
  return p;
}

}  // namespace

CellMove cell_mh_update(const CellTarget& target, double& eta, double& tau, double scale, RandomStream& rng) {
  CellMove move;
  if (target.y().empty()) {
    eta = target.eta_mean() + target.sd_eta() * rng.normal();
    tau = target.tau_mean() + target.sd_tau() * rng.normal();
    move.accepted = move.exact = true;
    return move;
  }
  const Eigen::Vector2d x(eta, tau);
  const CellTarget::Evaluation here = target.evaluate(eta, tau);
  const Proposal fwd = make_proposal(x, here, scale);
  move.fallback = fwd.fallback;

  const Eigen::Vector2d z(rng.normal(), rng.normal());
  const Eigen::Vector2d xp = fwd.mean + fwd.chol * z;
  const double u = rng.uniform();
  if (!xp.allFinite() || xp[1] < kMinLogScale || xp[0] > 700.0 || xp[1] > 700.0) return move;

  const CellTarget::Evaluation there = target.evaluate(xp[0], xp[1]);
  if (!std::isfinite(there.log_density)) return move;
  const Proposal rev = make_proposal(xp, there, scale);
  const double log_ratio =
      there.log_density - here.log_density + rev.log_density(x) - fwd.log_density(xp);
  if (std::log(u) < log_ratio) {
    eta = xp[0];
    tau = xp[1];
    move.accepted = true;
  }
  return move;
}

RichStepStats data_rich_step(LatentState& state, const Model& model, std::vector<RandomStream>& cell_streams,
                             double scale) {
  const auto& d = model.design;
  const Eigen::VectorXd eta_mean = d.X * state.beta + d.Z * state.beta_star;
  const Eigen::VectorXd tau_mean = d.X * state.alpha + d.Z * state.alpha_star;
  if (static_cast<int>(cell_streams.size()) != model.n_cells())
    throw std::invalid_argument("data_rich_step: one stream per cell required");

  RichStepStats stats;
  for (int c = 0; c < model.n_cells(); ++c) {
    const CellTarget target(model.data.y[c], eta_mean[c], state.sigma_eta, tau_mean[c], state.sigma_tau);
    const CellMove mv = cell_mh_update(target, state.eta[c], state.tau[c], scale, cell_streams[c]);
    if (mv.exact) {
      ++stats.exact;
      continue;
    }
    ++stats.proposed;
    stats.accepted += mv.accepted;
    stats.fallback += mv.fallback;
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Data-poor block

Eigen::MatrixXd GaussianConditional::covariance() const {
  return llt.solve(Eigen::MatrixXd::Identity(mean.size(), mean.size()));
}

Eigen::VectorXd GaussianConditional::draw(RandomStream& rng) const {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + llt.matrixU().solve(z);
}

double GaussianConditional::log_det_precision() const {
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

DataPoorBlock::DataPoorBlock(const Model& model) : model_(&model) {
  const auto& d = model.design;
  A_.resize(d.n_cells(), d.X.cols() + d.Z.cols());
  A_ << d.X, d.Z;
  AtA_ = A_.transpose() * A_;
  const int P = model.n_coefficients();
  for (int which = 0; which < 2; ++which) {
    const auto& normals = which == 0 ? model.priors.beta : model.priors.alpha;
    prior_mean_[which] = Eigen::VectorXd::Zero(A_.cols());
    prior_precision_diag_[which].resize(P);
    for (int k = 0; k < P; ++k) {
      prior_mean_[which][k] = normals[k].mean;
      prior_precision_diag_[which][k] = 1.0 / (normals[k].sd * normals[k].sd);
    }
  }
}

GaussianConditional DataPoorBlock::conditional(const Eigen::VectorXd& response, const Eigen::VectorXd& seasonal_sd,
                                               double residual_sd, Subsystem which) const {
  const int w = which == Subsystem::location ? 0 : 1;
  const int P = model_->n_coefficients();
  const int M = model_->n_months();
  const Eigen::MatrixXd& Q = model_->seasonal.Q;
  const double inv_var = 1.0 / (residual_sd * residual_sd);

  GaussianConditional g;
  g.precision = AtA_ * inv_var;
  for (int k = 0; k < P; ++k) {
    g.precision(k, k) += prior_precision_diag_[w][k];
    g.precision.block(P + k * M, P + k * M, M, M) += Q / (seasonal_sd[k] * seasonal_sd[k]);
  }
  Eigen::VectorXd b = A_.transpose() * response * inv_var;
  b.head(P) += prior_precision_diag_[w].cwiseProduct(prior_mean_[w].head(P));
  g.llt.compute(g.precision);
  if (g.llt.info() != Eigen::Success) throw SamplerError("data-poor conditional: precision is not positive definite");
  g.mean = g.llt.solve(b);
  return g;
}

double DataPoorBlock::log_marginal(const Eigen::VectorXd& response, const Eigen::VectorXd& seasonal_sd,
                                   double residual_sd, Subsystem which, GaussianConditional* conditional_out) const {
  const int w = which == Subsystem::location ? 0 : 1;
  const int P = model_->n_coefficients();
  const int M = model_->n_months();
  GaussianConditional g = conditional(response, seasonal_sd, residual_sd, which);

  const double n = static_cast<double>(response.size());
  double log_det_prior = 0.0;
  double prior_quad = 0.0;
  for (int k = 0; k < P; ++k) {
    log_det_prior += std::log(prior_precision_diag_[w][k]);
    log_det_prior += model_->seasonal.log_det - 2.0 * M * std::log(seasonal_sd[k]);
    const double dk = g.mean[k] - prior_mean_[w][k];
    prior_quad += prior_precision_diag_[w][k] * dk * dk;
    const auto v = g.mean.segment(P + k * M, M);
    prior_quad += v.dot(model_->seasonal.Q * v) / (seasonal_sd[k] * seasonal_sd[k]);
  }
  const double rss = (response - A_ * g.mean).squaredNorm();
  const double var = residual_sd * residual_sd;
  const double lm = -0.5 * n * (kLog2Pi + std::log(var)) + 0.5 * log_det_prior - 0.5 * g.log_det_precision() -
                    0.5 * (rss / var + prior_quad);
  if (conditional_out) *conditional_out = std::move(g);
  return lm;
}

DataPoorConditional data_poor_gaussian_conditional(const LatentState& state, const DataPoorBlock& block) {
  return {block.conditional(state.eta, state.psi, state.sigma_eta, Subsystem::location),
          block.conditional(state.tau, state.phi, state.sigma_tau, Subsystem::scale)};
}

Eigen::VectorXd log_hyperparameters(const CoefficientState& s) {
  const Eigen::Index P = s.psi.size();
  Eigen::VectorXd theta(2 * P + 2);
  theta << s.psi.array().log().matrix(), s.phi.array().log().matrix(), std::log(s.sigma_eta), std::log(s.sigma_tau);
  return theta;
}

void set_log_hyperparameters(CoefficientState& s, const Eigen::VectorXd& theta) {
  const Eigen::Index P = s.psi.size();
  s.psi = theta.head(P).array().exp().matrix();
  s.phi = theta.segment(P, P).array().exp().matrix();
  s.sigma_eta = std::exp(theta[2 * P]);
  s.sigma_tau = std::exp(theta[2 * P + 1]);
}

double log_hyperprior(const Eigen::VectorXd& theta, const PriorSet& priors) {
  const int P = priors.n_coefficients();
  double lp = 0.0;
  for (int k = 0; k < P; ++k) {
    lp += priors.psi[k].log_density(std::exp(theta[k]));
    lp += priors.phi[k].log_density(std::exp(theta[P + k]));
  }
  lp += priors.sigma_eta.log_density(std::exp(theta[2 * P]));
  lp += priors.sigma_tau.log_density(std::exp(theta[2 * P + 1]));
  return lp;
}

namespace {

struct HyperEvaluation {
  double log_target = -std::numeric_limits<double>::infinity();
  GaussianConditional eta_part, tau_part;
};

// log p(eta | psi, sigma_eta) + log p(tau | phi, sigma_tau) + log prior + Jacobian.
HyperEvaluation evaluate_hyper(const LatentState& s, const Eigen::VectorXd& theta, const DataPoorBlock& block,
                               const PriorSet& priors) {
  const Eigen::Index P = s.psi.size();
  HyperEvaluation h;
  const Eigen::VectorXd psi = theta.head(P).array().exp().matrix();
  const Eigen::VectorXd phi = theta.segment(P, P).array().exp().matrix();
  const double lm_eta = block.log_marginal(s.eta, psi, std::exp(theta[2 * P]), Subsystem::location, &h.eta_part);
  const double lm_tau = block.log_marginal(s.tau, phi, std::exp(theta[2 * P + 1]), Subsystem::scale, &h.tau_part);
  h.log_target = lm_eta + lm_tau + log_hyperprior(theta, priors) + theta.sum();
  return h;
}

void assign_coefficients(LatentState& s, const Eigen::VectorXd& nu_eta, const Eigen::VectorXd& nu_tau) {
  const Eigen::Index P = s.beta.size();
  s.beta = nu_eta.head(P);
  s.beta_star = nu_eta.tail(nu_eta.size() - P);
  s.alpha = nu_tau.head(P);
  s.alpha_star = nu_tau.tail(nu_tau.size() - P);
}

}  // namespace

PoorStepResult data_poor_step(LatentState& state, const DataPoorBlock& block, const HyperProposal& proposal,
                              RandomStream& rng) {
  const PriorSet& priors = block.model().priors;
  const Eigen::VectorXd theta = log_hyperparameters(state);
  const Eigen::Index d = theta.size();

  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < d; ++i) z[i] = rng.normal();
  const Eigen::VectorXd step = proposal.chol.size() == d * d ? Eigen::VectorXd(proposal.chol * z) : z;
  const Eigen::VectorXd theta_new = theta + proposal.step * step;
  const double u = rng.uniform();

  PoorStepResult result;
  HyperEvaluation current = evaluate_hyper(state, theta, block, priors);
  HyperEvaluation candidate;
  try {
    candidate = evaluate_hyper(state, theta_new, block, priors);
  } catch (const SamplerError&) {
    result.numerical_failure = true;
  }
  if (!result.numerical_failure && std::isfinite(candidate.log_target) &&
      std::log(u) < candidate.log_target - current.log_target) {
    set_log_hyperparameters(state, theta_new);
    assign_coefficients(state, candidate.eta_part.draw(rng), candidate.tau_part.draw(rng));
    result.accepted = true;
  } else {
    assign_coefficients(state, current.eta_part.draw(rng), current.tau_part.draw(rng));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Layout

ParameterLayout::ParameterLayout(int n_rivers, int n_months, int n_coefficients)
    : J_(n_rivers), M_(n_months), P_(n_coefficients) {
  auto add_block = [&](const std::string& name) {
    for (int k = 0; k < P_; ++k) names_.push_back(name + "_" + std::to_string(k));
    for (int k = 0; k < P_; ++k)
      for (int m = 0; m < M_; ++m)
        names_.push_back(name + "_star_" + std::to_string(k) + "_" + std::to_string(m + 1));
  };
  add_block("beta");
  add_block("alpha");
  for (int k = 0; k < P_; ++k) names_.push_back("psi_" + std::to_string(k));
  for (int k = 0; k < P_; ++k) names_.push_back("phi_" + std::to_string(k));
  names_.push_back("sigma_eta");
  names_.push_back("sigma_tau");
  for (const char* name : {"eta", "tau"})
    for (int j = 0; j < J_; ++j)
      for (int m = 0; m < M_; ++m)
        names_.push_back(std::string(name) + "_" + std::to_string(j + 1) + "_" + std::to_string(m + 1));
}

ParameterLayout ParameterLayout::from_names(const std::vector<std::string>& names) {
  int P = 0, M = 0, cells = 0;
  for (const auto& n : names) {
    if (n.rfind("psi_", 0) == 0) ++P;
    if (n.rfind("beta_star_0_", 0) == 0) ++M;
    if (n.rfind("eta_", 0) == 0) ++cells;
  }
  if (P == 0 || M == 0 || cells % M != 0) throw std::invalid_argument("sample columns do not describe a model layout");
  ParameterLayout layout(cells / M, M, P);
  if (layout.names() != names) throw std::invalid_argument("sample columns are not in canonical order");
  return layout;
}

int ParameterLayout::index_of(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw std::out_of_range("unknown parameter: " + name);
  return static_cast<int>(it - names_.begin());
}

Eigen::VectorXd ParameterLayout::flatten(const LatentState& s) const {
  Eigen::VectorXd v(size());
  v << s.beta, s.beta_star, s.alpha, s.alpha_star, s.psi, s.phi, s.sigma_eta, s.sigma_tau, s.eta, s.tau;
  return v;
}

LatentState ParameterLayout::unflatten(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  if (row.size() != size()) throw std::invalid_argument("unflatten: row length does not match layout");
  LatentState s;
  const int PM = P_ * M_, JM = J_ * M_;
  s.beta = row.segment(beta(0), P_).transpose();
  s.beta_star = row.segment(beta_star(0, 0), PM).transpose();
  s.alpha = row.segment(alpha(0), P_).transpose();
  s.alpha_star = row.segment(alpha_star(0, 0), PM).transpose();
  s.psi = row.segment(psi(0), P_).transpose();
  s.phi = row.segment(phi(0), P_).transpose();
  s.sigma_eta = row[sigma_eta()];
  s.sigma_tau = row[sigma_tau()];
  s.eta = row.segment(sigma_tau() + 1, JM).transpose();
  s.tau = row.segment(sigma_tau() + 1 + JM, JM).transpose();
  return s;
}

Eigen::Index PosteriorSamples::total_draws() const {
  Eigen::Index n = 0;
  for (const auto& c : chains) n += c.draws.rows();
  return n;
}

Eigen::MatrixXd PosteriorSamples::pooled() const {
  Eigen::MatrixXd out(total_draws(), layout.size());
  Eigen::Index r = 0;
  for (const auto& c : chains) {
    out.middleRows(r, c.draws.rows()) = c.draws;
    r += c.draws.rows();
  }
  return out;
}

Eigen::VectorXd PosteriorSamples::pooled_column(int index) const {
  Eigen::VectorXd out(total_draws());
  Eigen::Index r = 0;
  for (const auto& c : chains) {
    out.segment(r, c.draws.rows()) = c.draws.col(index);
    r += c.draws.rows();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initialisation and chains

LatentState initialize_state(const Model& model, RandomStream& rng, const InitOptions& opt) {
  const int P = model.n_coefficients();
  const int M = model.n_months();
  const int JM = model.n_cells();
  const PriorSet& priors = model.priors;

  Eigen::VectorXd eta_fit(JM), tau_fit(JM);
  std::vector<int> fitted;
  for (int c = 0; c < JM; ++c) {
    const auto& y = model.data.y[c];
    if (y.size() < 2 || std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); })) continue;
    try {
      const auto fit = gumbel::ml_fit(y).params;
      if (fit.mu > 0.0) {
        eta_fit[c] = std::log(fit.mu);
        tau_fit[c] = std::log(fit.sigma);
        fitted.push_back(c);
      }
    } catch (const std::exception&) {
    }
  }

  LatentState s;
  s.beta.resize(P);
  s.alpha.resize(P);
  for (int k = 0; k < P; ++k) {
    s.beta[k] = priors.beta[k].mean;
    s.alpha[k] = priors.alpha[k].mean;
  }
  if (static_cast<int>(fitted.size()) >= P) {
    Eigen::MatrixXd Xf(fitted.size(), P);
    Eigen::VectorXd ef(fitted.size()), tf(fitted.size());
    for (std::size_t i = 0; i < fitted.size(); ++i) {
      Xf.row(i) = model.design.X.row(fitted[i]);
      ef[i] = eta_fit[fitted[i]];
      tf[i] = tau_fit[fitted[i]];
    }
    const auto qr = Xf.colPivHouseholderQr();
    if (qr.rank() == P) {
      s.beta = qr.solve(ef);
      s.alpha = qr.solve(tf);
    }
  }
  s.eta = model.design.X * s.beta;
  s.tau = model.design.X * s.alpha;
  for (int c : fitted) {
    s.eta[c] = eta_fit[c];
    s.tau[c] = tau_fit[c];
  }
  s.beta_star = Eigen::VectorXd::Zero(P * M);
  s.alpha_star = Eigen::VectorXd::Zero(P * M);
  s.psi.resize(P);
  s.phi.resize(P);
  for (int k = 0; k < P; ++k) {
    s.psi[k] = priors.psi[k].mean();
    s.phi[k] = priors.phi[k].mean();
  }
  s.sigma_eta = priors.sigma_eta.mean();
  s.sigma_tau = priors.sigma_tau.mean();
  if (opt.hyper_jitter > 0.0) {
    Eigen::VectorXd theta = log_hyperparameters(s);
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] += opt.hyper_jitter * rng.normal();
    set_log_hyperparameters(s, theta);
  }
  return s;
}

double log_likelihood(const LatentState& s, const Model& model) {
  double ll = 0.0;
  for (int c = 0; c < model.n_cells(); ++c)
    ll += gumbel::log_likelihood({std::exp(s.eta[c]), std::exp(s.tau[c])}, model.data.y[c]);
  return ll;
}

double log_posterior(const LatentState& s, const Model& model) {
  const auto& d = model.design;
  const Eigen::VectorXd re = s.eta - d.X * s.beta - d.Z * s.beta_star;
  const Eigen::VectorXd rt = s.tau - d.X * s.alpha - d.Z * s.alpha_star;
  const double n = static_cast<double>(re.size());
  const double resid = -n * (kLog2Pi + std::log(s.sigma_eta) + std::log(s.sigma_tau)) -
                       0.5 * re.squaredNorm() / (s.sigma_eta * s.sigma_eta) -
                       0.5 * rt.squaredNorm() / (s.sigma_tau * s.sigma_tau);
  return log_likelihood(s, model) + resid + log_prior_density(s, model.priors, model.seasonal);
}

void SamplerConfig::validate() const {
  if (n_iter < 1 || n_burnin < 0 || n_burnin >= n_iter)
    throw std::invalid_argument("sampler config: need 0 <= n_burnin < n_iter");
  if (thin < 1) throw std::invalid_argument("sampler config: thin must be >= 1");
  if (n_chains < 1) throw std::invalid_argument("sampler config: n_chains must be >= 1");
  if (!(rw_step_hyper > 0.0)) throw std::invalid_argument("sampler config: rw_step_hyper must be positive");
  if (!(target_accept_rich > 0.0 && target_accept_rich < 1.0) ||
      !(target_accept_poor > 0.0 && target_accept_poor < 1.0))
    throw std::invalid_argument("sampler config: target acceptance rates must lie in (0, 1)");
  if (init_jitter < 0.0) throw std::invalid_argument("sampler config: init_jitter must be >= 0");
}

namespace {

constexpr double kMinRichScale = 0.1;
constexpr double kMaxRichScale = 3.0;

// Robbins-Monro gain for burn-in adaptation.
double adapt_gain(int t) { return 0.5 / std::pow(1.0 + t, 0.6); }

}  // namespace

ChainSamples run_chain(const Model& model, const SamplerConfig& cfg, int chain) {
  cfg.validate();
  const ParameterLayout layout(model.design.n_rivers, model.n_months(), model.n_coefficients());
  const DataPoorBlock block(model);

  RandomStream rng = RandomStream::derive(cfg.seed, {tag(StreamTag::chain), static_cast<std::uint64_t>(chain)});
  RandomStream init_rng = RandomStream::derive(rng.seed(), {tag(StreamTag::init)});
  std::vector<RandomStream> cell_streams;
  cell_streams.reserve(model.n_cells());
  for (int c = 0; c < model.n_cells(); ++c)
    cell_streams.push_back(RandomStream::derive(rng.seed(), {tag(StreamTag::cell), static_cast<std::uint64_t>(c)}));

  LatentState state = initialize_state(model, init_rng, {cfg.init_jitter});

  ChainSamples out;
  out.chain = chain;
  out.seed = rng.seed();
  out.draws.resize(cfg.retained_per_chain(), layout.size());

  const int d = 2 * model.n_coefficients() + 2;
  HyperProposal proposal{cfg.rw_step_hyper, Eigen::MatrixXd::Identity(d, d)};
  double rich_scale = 1.0;
  const int adapt_interval = std::max(100, cfg.n_burnin / 10);
  std::vector<Eigen::VectorXd> theta_history;
  if (cfg.n_burnin > 0) theta_history.reserve(cfg.n_burnin);

  long rich_proposed = 0, rich_accepted = 0, poor_accepted = 0, poor_steps = 0;
  Eigen::Index kept = 0;
  for (int t = 0; t < cfg.n_iter; ++t) {
    const RichStepStats rs = data_rich_step(state, model, cell_streams, rich_scale);
    const PoorStepResult ps = data_poor_step(state, block, proposal, rng);
    if (!state.all_finite())
      throw SamplerError("non-finite state at iteration " + std::to_string(t) + " of chain " + std::to_string(chain));
    out.poor_failures += ps.numerical_failure;

    if (t < cfg.n_burnin) {
      const double gain = adapt_gain(t);
      if (rs.proposed > 0) {
        const double rate = static_cast<double>(rs.accepted) / rs.proposed;
        rich_scale = std::clamp(rich_scale * std::exp(gain * (rate - cfg.target_accept_rich)), kMinRichScale,
                                kMaxRichScale);
      }
      proposal.step *= std::exp(gain * ((ps.accepted ? 1.0 : 0.0) - cfg.target_accept_poor));
      theta_history.push_back(log_hyperparameters(state));
      // Periodically replace the random-walk shape by the empirical covariance
      // of the second half of the history so far.
      if ((t + 1) % adapt_interval == 0 && t + 1 >= 2 * adapt_interval) {
        const std::size_t from = theta_history.size() / 2;
        const auto n = static_cast<double>(theta_history.size() - from);
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
        for (std::size_t i = from; i < theta_history.size(); ++i) mean += theta_history[i];
        mean /= n;
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
        for (std::size_t i = from; i < theta_history.size(); ++i) {
          const Eigen::VectorXd dv = theta_history[i] - mean;
          cov += dv * dv.transpose();
        }
        cov = cov / (n - 1.0) + 1e-6 * Eigen::MatrixXd::Identity(d, d);
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() == Eigen::Success) {
          const bool first = proposal.chol.isIdentity();
          proposal.chol = llt.matrixL();
          if (first) proposal.step = 2.38 / std::sqrt(static_cast<double>(d));
        }
      }
    } else {
      rich_proposed += rs.proposed;
      rich_accepted += rs.accepted;
      poor_accepted += ps.accepted;
      ++poor_steps;
      if ((t - cfg.n_burnin + 1) % cfg.thin == 0 && kept < out.draws.rows())
        out.draws.row(kept++) = layout.flatten(state).transpose();
    }
  }
  out.accept_rich = rich_proposed > 0 ? static_cast<double>(rich_accepted) / rich_proposed : 1.0;
  out.accept_poor = poor_steps > 0 ? static_cast<double>(poor_accepted) / poor_steps : 0.0;
  out.final_step_hyper = proposal.step;
  out.final_scale_rich = rich_scale;
  return out;
}

PosteriorSamples run_sampler(const Model& model, const SamplerConfig& cfg) {
  cfg.validate();
  PosteriorSamples samples;
  samples.layout = ParameterLayout(model.design.n_rivers, model.n_months(), model.n_coefficients());
  samples.master_seed = cfg.seed;
  std::vector<std::future<ChainSamples>> futures;
  for (int c = 0; c < cfg.n_chains; ++c)
    futures.push_back(std::async(std::launch::async, [&model, &cfg, c] { return run_chain(model, cfg, c); }));
  for (auto& f : futures) samples.chains.push_back(f.get());
  return samples;
}

}  // namespace floodmax
