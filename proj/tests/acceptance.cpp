// Acceptance checks, one line per criterion:
//   floodmax_acceptance        run all
//   floodmax_acceptance N ...  run the listed criteria
// Exit status is nonzero when any selected criterion fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "floodmax/design.hpp"
#include "floodmax/diagnostics.hpp"
#include "floodmax/gumbel.hpp"
#include "floodmax/io.hpp"
#include "floodmax/predict.hpp"
#include "floodmax/priors.hpp"
#include "floodmax/run.hpp"
#include "floodmax/sampler.hpp"
#include "floodmax/synthetic.hpp"
#include "oracles.hpp"

using namespace floodmax;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

void progress(const std::string& s) { std::cerr << "  .. " << s << std::endl; }

double ks_uniform(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) d = std::max({d, (i + 1) / n - p[i], p[i] - i / n});
  return d;
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Outcome o;
  const auto q = seasonal_precision(1.0, 12);
  const Eigen::MatrixXd inv = q.Q.inverse();
  const double diag_err = (inv.diagonal().array() - 1.0).abs().maxCoeff();
  const double lag1 = inv(0, 1);
  o.detail << "s=" << q.s << " lag1=" << lag1 << " max|diag(Q^-1)-1|=" << diag_err;
  o.require(std::abs(q.s - 0.268) <= 0.001, "s");
  o.require(std::abs(lag1 - 0.67) <= 0.005, "lag-1 correlation");
  o.require(diag_err <= 1e-10, "unit diagonal");
  return o;
}

Outcome criterion2() {
  Outcome o;
  struct Figure {
    const char* name;
    double ours;
    double reference;
  };
  const auto slope = elicit_normal_from_interval(0.0, 1.0, 0.05);
  const auto psi0 = elicit_exponential_from_quantile(0.95, 2.35);
  const auto psi1 = elicit_exponential_from_quantile(0.99, 0.32);
  const auto sig = elicit_exponential_from_quantile(0.99, 10.0);
  const Figure figs[] = {
      {"slope sd", slope.sd, 0.304},       {"psi0 rate", psi0.rate, 1.275},     {"psi0 mean", 1.0 / psi0.rate, 0.784},
      {"psi1 rate", psi1.rate, 14.4},      {"psi1 mean", 1.0 / psi1.rate, 0.07}, {"sigma rate", sig.rate, 0.46},
      {"sigma mean", 1.0 / sig.rate, 2.17},
  };
  for (const auto& f : figs) {
    const double rel = std::abs(f.ours / f.reference - 1.0);
    o.detail << ' ' << f.name << '=' << f.ours << " (" << rel * 100 << "%)";
    o.require(rel <= 0.005, std::string(f.name) + " off the reference figure by more than 0.5%");
  }
  return o;
}

// Maximiser of the Gumbel log-likelihood by repeated grid refinement over
// (mu, log sigma).
std::pair<double, double> grid_search_ml(const std::vector<double>& y) {
  double lo_m = *std::min_element(y.begin(), y.end()), hi_m = *std::max_element(y.begin(), y.end());
  double spread = hi_m - lo_m;
  double lo_s = std::log(spread / 100), hi_s = std::log(spread * 3);
  lo_m -= spread;
  hi_m += spread;
  double bm = 0, bs = 0;
  const int G = 60;
  for (int round = 0; round < 12; ++round) {
    double best = -INFINITY;
    for (int i = 0; i <= G; ++i)
      for (int j = 0; j <= G; ++j) {
        const double m = lo_m + (hi_m - lo_m) * i / G, ls = lo_s + (hi_s - lo_s) * j / G;
        const double ll = oracle::gumbel_loglik(m, std::exp(ls), y);
        if (ll > best) {
          best = ll;
          bm = m;
          bs = ls;
        }
      }
    const double wm = (hi_m - lo_m) / G * 3, ws = (hi_s - lo_s) / G * 3;
    lo_m = bm - wm;
    hi_m = bm + wm;
    lo_s = bs - ws;
    hi_s = bs + ws;
  }
  return {bm, std::exp(bs)};
}

Outcome criterion3() {
  Outcome o;
  // Round trips.
  double worst_p = 0, worst_y = 0;
  for (double mu : {-50.0, 0.0, 3.7, 1000.0})
    for (double sigma : {0.01, 1.0, 25.0}) {
      const gumbel::GumbelParams g{mu, sigma};
      for (int i = 1; i < 2000; ++i) {
        const double p = i / 2000.0;
        worst_p = std::max(worst_p, std::abs(gumbel::cdf(g, gumbel::quantile(g, p)) - p));
      }
      for (int i = -400; i <= 1600; ++i) {
        const double y = mu + sigma * i / 100.0;
        const double back = gumbel::quantile(g, gumbel::cdf(g, y));
        worst_y = std::max(worst_y, std::abs(back - y) / (std::abs(y) + sigma));
      }
    }
  o.detail << "roundtrip p=" << worst_p << " y(rel)=" << worst_y;
  o.require(worst_p <= 1e-10 && worst_y <= 1e-10, "cdf/quantile round trip");

  // ML against grid search.
  RandomStream rng(2024);
  int ml_ok = 0;
  double worst_ll = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 5 + static_cast<int>(rng.uniform() * 16);
    const gumbel::GumbelParams truth{rng.normal(20, 10), std::exp(rng.normal(1, 1))};
    const auto y = gumbel::sample(truth, n, rng);
    const auto fit = gumbel::ml_fit(y).params;
    const auto [gm, gs] = grid_search_ml(y);
    const double ll_fit = oracle::gumbel_loglik(fit.mu, fit.sigma, y), ll_grid = oracle::gumbel_loglik(gm, gs, y);
    worst_ll = std::max(worst_ll, ll_grid - ll_fit);
    const bool close = std::abs(fit.mu - gm) <= 1e-4 * (std::abs(gm) + gs) && std::abs(fit.sigma / gs - 1) <= 1e-4;
    ml_ok += close && ll_fit >= ll_grid - 1e-9;
  }
  o.detail << " ml_matches=" << ml_ok << "/50 (grid ll excess " << worst_ll << ")";
  o.require(ml_ok == 50, "ML fit vs grid search");

  // Anderson-Darling under the null.
  std::vector<double> pv;
  for (int rep = 0; rep < 200; ++rep) {
    RandomStream r = RandomStream::derive(77, {static_cast<std::uint64_t>(StreamTag::bootstrap),
                                               static_cast<std::uint64_t>(rep)});
    const auto y = gumbel::sample({10.0, 3.0}, 50, r);
    pv.push_back(gumbel::anderson_darling(y, 500, r).p_value);
  }
  const double ks = ks_uniform(pv);
  o.detail << " ad_ks=" << ks;
  o.require(ks < 0.1, "AD null p-values not uniform");
  return o;
}

Outcome criterion4() {
  Outcome o;
  // Data-poor Gaussian conditional against dense joint conditioning in extended precision.
  using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const auto t = fixture::make_tiny(2, 5, 1, 10, 17);
  const Model model = fixture::tiny_model(t);
  const DataPoorBlock block(model);
  const Eigen::MatrixXd A = fixture::dense_A(model);
  RandomStream rng(4);
  double worst = 0;
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::VectorXd resp(10);
    for (int i = 0; i < 10; ++i) resp[i] = 3.0 + 0.5 * rng.normal();
    const Eigen::VectorXd sd = Eigen::Vector2d(std::exp(rng.normal(-0.5, 0.5)), std::exp(rng.normal(-2, 0.5)));
    const double sigma = std::exp(rng.normal(-1, 0.3));
    for (bool location : {true, false}) {
      Eigen::VectorXd m0;
      Eigen::MatrixXd S0;
      fixture::dense_prior(model, sd, location, m0, S0);
      const MatL Al = A.cast<long double>(), S0l = S0.cast<long double>();
      const MatL Srr = Al * S0l * Al.transpose() + (long double)(sigma * sigma) * MatL::Identity(10, 10);
      const MatL K = S0l * Al.transpose() * Srr.inverse();
      const Eigen::VectorXd mean =
          (m0.cast<long double>() + K * (resp.cast<long double>() - Al * m0.cast<long double>())).cast<double>();
      const Eigen::MatrixXd cov = (S0l - K * Al * S0l).cast<double>();
      const auto g = block.conditional(resp, sd, sigma, location ? Subsystem::location : Subsystem::scale);
      worst = std::max({worst, (g.mean - mean).cwiseAbs().maxCoeff(), (g.covariance() - cov).cwiseAbs().maxCoeff()});
    }
  }
  o.detail << "conditional max abs err=" << worst;
  o.require(worst <= 1e-8, "Gaussian conditional vs dense oracle");

  // Frozen-target MH against quadrature.
  RandomStream data_rng(9);
  const auto y = gumbel::sample({20.0, 5.0}, 50, data_rng);
  const double em = 3.0, se = 0.3, tm = 1.6, st = 0.3;
  auto log_target = [&](double e, double tau) {
    return oracle::gumbel_loglik(std::exp(e), std::exp(tau), y) - 0.5 * std::pow((e - em) / se, 2) -
           0.5 * std::pow((tau - tm) / st, 2);
  };
  // Locate the bulk with a coarse pass, then integrate on a fine grid.
  double me = 0, mt = 0, ve = 0, vt = 0;
  {
    const int G = 400;
    const double e_lo = 1.5, e_hi = 4.5, t_lo = -0.5, t_hi = 3.5;
    std::vector<double> w(G * G);
    double mx = -INFINITY;
    for (int i = 0; i < G; ++i)
      for (int j = 0; j < G; ++j) {
        w[i * G + j] = log_target(e_lo + (i + 0.5) * (e_hi - e_lo) / G, t_lo + (j + 0.5) * (t_hi - t_lo) / G);
        mx = std::max(mx, w[i * G + j]);
      }
    double Z = 0;
    for (auto& v : w) Z += (v = std::exp(v - mx));
    for (int i = 0; i < G; ++i)
      for (int j = 0; j < G; ++j) {
        const double e = e_lo + (i + 0.5) * (e_hi - e_lo) / G, tau = t_lo + (j + 0.5) * (t_hi - t_lo) / G;
        const double p = w[i * G + j] / Z;
        me += p * e;
        mt += p * tau;
        ve += p * e * e;
        vt += p * tau * tau;
      }
    ve -= me * me;
    vt -= mt * mt;
  }
  const int G = 300, B = 10;
  const double e_lo = me - 6 * std::sqrt(ve), e_hi = me + 6 * std::sqrt(ve);
  const double t_lo = mt - 6 * std::sqrt(vt), t_hi = mt + 6 * std::sqrt(vt);
  std::vector<double> w(G * G), exact(B * B, 0.0);
  double mx = -INFINITY, Z = 0;
  for (int i = 0; i < G; ++i)
    for (int j = 0; j < G; ++j) {
      w[i * G + j] = log_target(e_lo + (i + 0.5) * (e_hi - e_lo) / G, t_lo + (j + 0.5) * (t_hi - t_lo) / G);
      mx = std::max(mx, w[i * G + j]);
    }
  for (auto& v : w) Z += (v = std::exp(v - mx));
  for (int i = 0; i < G; ++i)
    for (int j = 0; j < G; ++j) exact[(i * B / G) * B + j * B / G] += w[i * G + j] / Z;

  const CellTarget target(y, em, se, tm, st);
  RandomStream mh(10);
  double eta = em, tau = tm;
  const int n = 100000;
  std::vector<double> hist(B * B, 0.0);
  double outside = 0;
  for (int it = 0; it < n; ++it) {
    cell_mh_update(target, eta, tau, 1.0, mh);
    const int i = static_cast<int>(std::floor((eta - e_lo) / (e_hi - e_lo) * B));
    const int j = static_cast<int>(std::floor((tau - t_lo) / (t_hi - t_lo) * B));
    if (i < 0 || j < 0 || i >= B || j >= B) outside += 1.0 / n;
    else hist[i * B + j] += 1.0 / n;
  }
  double tv = outside;
  for (int b = 0; b < B * B; ++b) tv += std::abs(hist[b] - exact[b]);
  tv *= 0.5;
  o.detail << " mh_tv=" << tv;
  o.require(tv < 0.02, "MH vs quadrature total variation");
  return o;
}

CellData cells_of(const SyntheticData& d) {
  return group_cells(d.observations, d.covariates.stations, d.covariates.n_months);
}

SamplerConfig scaled_config(std::uint64_t seed) {
  SamplerConfig c;
  c.n_iter = 5000;
  c.n_burnin = 2000;
  c.n_chains = 4;
  c.seed = seed;
  return c;
}

Outcome criterion5() {
  Outcome o;
  const int reps = 20;
  int covered = 0, rhat_ok = 0;
  double max_rhat = 0;
  SynthSettings st;
  for (int r = 0; r < reps; ++r) {
    RandomStream data_rng = RandomStream::derive(5000, {static_cast<std::uint64_t>(StreamTag::synthetic),
                                                        static_cast<std::uint64_t>(r)});
    const auto d = generate_synthetic(st, data_rng);
    const Model model = make_model(d.centered, cells_of(d), st.kappa, {});
    const auto samples = run_sampler(model, scaled_config(100 + r));
    const auto& L = samples.layout;
    double rep_max = 0;
    for (int k = 0; k < model.n_coefficients(); ++k)
      for (int col : {L.beta(k), L.alpha(k)}) {
        ChainSeries cs;
        for (const auto& c : samples.chains) cs.push_back(c.draws.col(col));
        rep_max = std::max(rep_max, split_rhat(cs));
      }
    max_rhat = std::max(max_rhat, rep_max);
    rhat_ok += rep_max < 1.1;
    Eigen::VectorXd b1 = samples.pooled_column(L.beta(1));
    std::sort(b1.data(), b1.data() + b1.size());
    const auto q = [&](double p) {
      const double h = (b1.size() - 1) * p;
      const auto lo = static_cast<Eigen::Index>(std::floor(h));
      const auto hi = std::min<Eigen::Index>(lo + 1, b1.size() - 1);
      return b1[lo] + (h - lo) * (b1[hi] - b1[lo]);
    };
    const bool in = st.beta[1] >= q(0.05) && st.beta[1] <= q(0.95);
    covered += in;
    progress("replicate " + std::to_string(r + 1) + ": beta_1 90% CI [" + std::to_string(q(0.05)) + ", " +
             std::to_string(q(0.95)) + "] " + (in ? "covers" : "misses") + ", max R-hat " + std::to_string(rep_max));
  }
  o.detail << "coverage=" << covered << "/" << reps << " rhat_ok=" << rhat_ok << "/" << reps
           << " max_rhat=" << max_rhat;
  o.require(rhat_ok == reps, "split R-hat >= 1.1 for some beta/alpha component");
  o.require(covered >= 14 && covered <= 20, "beta_1 coverage outside 14-20");
  return o;
}

Outcome criterion6() {
  Outcome o;
  SynthSettings st;
  RandomStream data_rng = RandomStream::derive(6000, {static_cast<std::uint64_t>(StreamTag::synthetic)});
  const auto d = generate_synthetic(st, data_rng);
  const CellData cells = cells_of(d);
  const auto res = cross_validate(cells, d.covariates, {}, st.kappa, scaled_config(61), {},
                                  [](const CvFold& f) {
                                    progress("fold " + f.station + (f.ok ? "" : " FAILED: " + f.error) +
                                             " rank correlation " + std::to_string(f.rank_correlation));
                                  });
  int complete = 0, excluded = 0, good = 0;
  for (const auto& f : res.folds) {
    complete += f.ok;
    // Rebuild the training set independently and compare fingerprints and counts.
    std::vector<int> others;
    for (int j = 0; j < cells.n_rivers; ++j)
      if (j != f.river) others.push_back(j);
    const auto expected = training_checksum(d.covariates.select_rivers(others), select_rivers(cells, others));
    std::size_t held_obs = 0;
    for (int m = 0; m < cells.n_months; ++m) held_obs += cells.y[f.river * cells.n_months + m].size();
    excluded += f.excludes_held_out && f.training_checksum == expected && f.training_rivers == cells.n_rivers - 1 &&
                f.training_observations == cells.n_observations() - held_obs;
    good += f.ok && f.rank_correlation > 0.7;
    o.detail << ' ' << f.station << '=' << f.rank_correlation;
  }
  o.detail << " complete=" << complete << "/8 excluded=" << excluded << "/8 rho>0.7=" << good << "/8";
  o.require(res.folds.size() == 8 && complete == 8, "not all folds completed");
  o.require(excluded == 8, "training set exclusion");
  o.require(good >= 6, "fewer than 6 rivers with rank correlation > 0.7");
  return o;
}

Outcome criterion7() {
  Outcome o;
  const auto data = oracle::temp_dir("accept_data");
  RunConfig cfg;
  cfg.paths.output = data;
  cfg.quiet = true;
  std::ostringstream err;
  if (run(Mode::synth, cfg, nullptr, err) != kExitOk) {
    o.require(false, "synth: " + err.str());
    return o;
  }
  cfg.paths.observations = data / "observations.csv";
  cfg.paths.covariates = data / "covariates.csv";
  cfg.sampler.n_iter = 1500;
  cfg.sampler.n_burnin = 500;
  cfg.sampler.seed = 7;
  cfg.report.cell_fits = false;
  std::vector<fs::path> outs;
  for (int r = 0; r < 2; ++r) {
    cfg.paths.output = oracle::temp_dir("accept_fit");
    if (run(Mode::fit, cfg, nullptr, err) != kExitOk) {
      o.require(false, "fit: " + err.str());
      return o;
    }
    outs.push_back(cfg.paths.output);
  }
  int identical = 0;
  for (int c = 0; c < cfg.sampler.n_chains; ++c) {
    const std::string a = oracle::read_file(samples_path(outs[0], c)), b = oracle::read_file(samples_path(outs[1], c));
    identical += !a.empty() && a == b;
  }
  o.detail << "identical sample files=" << identical << "/" << cfg.sampler.n_chains;
  o.require(identical == cfg.sampler.n_chains, "sample files differ");
  return o;
}

const char* kTitles[] = {
    "",
    "seasonal precision constants",
    "prior elicitation figures",
    "Gumbel kernel oracle suite",
    "sampler exactness on tiny instances",
    "posterior recovery and calibration",
    "leave-one-river-out cross-validation",
    "determinism of posterior sample files",
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty()) which = {1, 2, 3, 4, 5, 6, 7};
  Outcome (*const fns[])() = {nullptr,     criterion1, criterion2, criterion3,
                              criterion4, criterion5, criterion6, criterion7};
  bool all = true;
  for (int n : which) {
    if (n < 1 || n > 7) {
      std::cerr << "unknown criterion " << n << "\n";
      return 2;
    }
    Outcome o;
    try {
      o = fns[n]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << kTitles[n] << "): " << o.detail.str()
              << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
