#include "floodmax/run.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>

#include "floodmax/csv.hpp"
#include "floodmax/diagnostics.hpp"
#include "floodmax/io.hpp"
#include "floodmax/predict.hpp"
#include "floodmax/prelim.hpp"
#include "floodmax/stats.hpp"
#include "floodmax/synthetic.hpp"

namespace floodmax {

namespace fs = std::filesystem;

OutputLock::OutputLock(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RunError(kExitData, "io", "cannot create output directory " + dir.string() + ": " + ec.message());
  file_ = dir / ".floodmax.lock";
  std::FILE* f = std::fopen(file_.c_str(), "wx");
  if (!f) {
    file_.clear();
    throw RunError(kExitBusy, "lock",
                   "output directory " + dir.string() + " is in use by another run (remove .floodmax.lock if stale)");
  }
  std::fclose(f);
}

OutputLock::~OutputLock() {
  if (file_.empty()) return;
  std::error_code ec;
  fs::remove(file_, ec);
}

namespace {

struct Logger {
  std::ostream* out;
  template <typename... Ts>
  void operator()(const Ts&... parts) const {
    if (!out) return;
    ((*out) << ... << parts) << '\n';
    out->flush();
  }
};

const fs::path& require_file(const fs::path& p, const char* key, Mode mode) {
  if (p.empty())
    throw RunError(kExitUsage, "config", std::string(key) + " is required for " + mode_name(mode));
  if (!fs::exists(p)) throw RunError(kExitData, "io", std::string(key) + ": file not found: " + p.string());
  return p;
}

std::uint64_t file_hash(const fs::path& p, std::uint64_t h) {
  std::ifstream in(p, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a(bytes.data(), bytes.size(), h);
}

std::uint64_t run_hash(const RunConfig& cfg, std::initializer_list<fs::path> inputs) {
  const std::string c = cfg.canonical();
  std::uint64_t h = fnv1a(c.data(), c.size());
  for (const auto& p : inputs)
    if (!p.empty()) h = file_hash(p, h);
  return h;
}

std::string provenance(std::uint64_t seed, std::uint64_t hash) {
  return "seed=" + std::to_string(seed) + " config_hash=" + hex(hash);
}

struct Inputs {
  ObservationTable observations;
  RawCovariateTable covariates;
  CellData cells;
};

Inputs load_inputs(const RunConfig& cfg, Mode mode, bool need_covariates) {
  Inputs in;
  in.observations = load_observations(require_file(cfg.paths.observations, "paths.observations", mode));
  if (need_covariates || !cfg.paths.covariates.empty()) {
    in.covariates = load_covariates(require_file(cfg.paths.covariates, "paths.covariates", mode));
    in.cells = group_cells(in.observations, in.covariates.stations, in.covariates.n_months);
  } else {
    in.cells = group_cells(in.observations, in.observations.stations());
  }
  return in;
}

std::string month_file(const std::string& prefix, const std::string& station, int month0) {
  return prefix + station + "_" + std::to_string(month0 + 1) + ".csv";
}

void write_prediction_files(const fs::path& dir, const PredictiveSummary& s, std::uint64_t seed, std::uint64_t hash) {
  for (int j = 0; j < static_cast<int>(s.stations.size()); ++j) {
    csv::Writer w(dir / ("predict_" + s.stations[j] + ".csv"));
    w.comment(provenance(seed, hash));
    w.row({"month", "level", "median", "lower", "upper", "mean"});
    for (int m = 0; m < s.n_months; ++m)
      for (std::size_t l = 0; l < s.levels.size(); ++l) {
        const auto& v = s.at(j, m, static_cast<int>(l));
        w.values(m + 1, s.levels[l], v.median, v.lower, v.upper, v.mean);
      }
  }
}

// In-sample and new-site predictions share one residual stream so that they
// agree exactly when given the same covariates.
PredictiveSummary predict_from(const PosteriorSamples& samples, const CovariateTable& target, const RunConfig& cfg) {
  RandomStream rng = RandomStream::derive(samples.master_seed, {tag(StreamTag::predict)});
  return predictive_quantiles(samples, target, cfg.predict.quantiles, rng,
                              PredictOptions{cfg.predict.residuals, cfg.predict.interval});
}

void write_summary(const fs::path& path, const PosteriorSamples& samples, std::uint64_t seed, std::uint64_t hash) {
  csv::Writer w(path);
  w.comment(provenance(seed, hash));
  w.row({"parameter", "mean", "sd", "q025", "q10", "median", "q90", "q975"});
  const auto& names = samples.layout.names();
  for (int i = 0; i < samples.layout.size(); ++i) {
    const Eigen::VectorXd c = samples.pooled_column(i);
    std::vector<double> v(c.data(), c.data() + c.size());
    std::sort(v.begin(), v.end());
    const double mean = c.mean();
    const double sd = v.size() > 1 ? std::sqrt((c.array() - mean).square().sum() / (c.size() - 1.0)) : 0.0;
    w.values(names[i], mean, sd, stats::quantile_sorted(v, 0.025), stats::quantile_sorted(v, 0.1),
             stats::quantile_sorted(v, 0.5), stats::quantile_sorted(v, 0.9), stats::quantile_sorted(v, 0.975));
  }
}

void write_diagnostics(const fs::path& dir, const PosteriorSamples& samples, std::uint64_t seed, std::uint64_t hash) {
  const DiagnosticsReport rep = diagnostics(samples);
  {
    csv::Writer w(dir / "diagnostics.csv");
    w.comment(provenance(seed, hash));
    w.row({"parameter", "mean", "sd", "rhat", "ess"});
    for (const auto& p : rep.parameters) w.values(p.name, p.mean, p.sd, p.rhat, p.ess);
  }
  csv::Writer w(dir / "acceptance.csv");
  w.comment(provenance(seed, hash));
  w.row({"chain", "chain_seed", "accept_rich", "accept_poor", "poor_failures", "final_step_hyper",
         "final_scale_rich"});
  for (const auto& c : rep.chains)
    w.values(c.chain, static_cast<unsigned long long>(c.seed), c.accept_rich, c.accept_poor, c.poor_failures,
             c.final_step_hyper, c.final_scale_rich);
}

void write_densities(const fs::path& dir, const PosteriorSamples& samples, const PriorSet& priors, int grid,
                     std::uint64_t seed, std::uint64_t hash) {
  const ParameterLayout& L = samples.layout;
  auto emit = [&](int index, const std::function<double(double)>& prior) {
    const Eigen::VectorXd c = samples.pooled_column(index);
    if (c.size() < 2) return;
    const auto g = stats::kde(std::span<const double>(c.data(), static_cast<std::size_t>(c.size())), grid);
    csv::Writer w(dir / ("prior_post_density_" + L.names()[index] + ".csv"));
    w.comment(provenance(seed, hash));
    w.row({"x", "posterior", "prior"});
    for (std::size_t i = 0; i < g.x.size(); ++i) w.values(g.x[i], g.density[i], prior(g.x[i]));
  };
  for (int k = 0; k < L.n_coefficients(); ++k) {
    emit(L.beta(k), [&](double x) { return std::exp(priors.beta[k].log_density(x)); });
    emit(L.alpha(k), [&](double x) { return std::exp(priors.alpha[k].log_density(x)); });
    emit(L.psi(k), [&](double x) { return x < 0.0 ? 0.0 : std::exp(priors.psi[k].log_density(x)); });
    emit(L.phi(k), [&](double x) { return x < 0.0 ? 0.0 : std::exp(priors.phi[k].log_density(x)); });
  }
  emit(L.sigma_eta(), [&](double x) { return x < 0.0 ? 0.0 : std::exp(priors.sigma_eta.log_density(x)); });
  emit(L.sigma_tau(), [&](double x) { return x < 0.0 ? 0.0 : std::exp(priors.sigma_tau.log_density(x)); });
}

void write_cell_reports(const fs::path& dir, const PosteriorSamples& samples, const CellData& cells,
                        const std::vector<std::string>& stations, const RunConfig& cfg, std::uint64_t seed,
                        std::uint64_t hash) {
  for (int j = 0; j < cells.n_rivers; ++j)
    for (int m = 0; m < cells.n_months; ++m) {
      if (static_cast<int>(cells.cell(j, m).size()) < cfg.report.min_cell_obs) continue;
      const CellFitReport r = cell_fit_report(samples, cells, j, m, cfg.report.cdf_band, cfg.report.min_cell_obs);
      {
        csv::Writer w(dir / month_file("ppplot_", stations[j], m));
        w.comment(provenance(seed, hash));
        w.row({"flow", "empirical", "model_mean", "model_lower", "model_upper"});
        for (std::size_t i = 0; i < r.y.size(); ++i)
          w.values(r.y[i], r.empirical[i], r.model_mean[i], r.model_lower[i], r.model_upper[i]);
      }
      csv::Writer w(dir / month_file("cdf_", stations[j], m));
      w.comment(provenance(seed, hash));
      w.row({"flow", "cdf_mean", "cdf_lower", "cdf_upper"});
      for (std::size_t i = 0; i < r.grid.size(); ++i) w.values(r.grid[i], r.grid_mean[i], r.grid_lower[i], r.grid_upper[i]);
    }
}

void run_fit(const RunConfig& cfg, const Logger& log) {
  const Mode mode = Mode::fit;
  const Inputs in = load_inputs(cfg, mode, true);
  const std::uint64_t hash = run_hash(cfg, {cfg.paths.observations, cfg.paths.covariates});
  const std::uint64_t seed = cfg.sampler.seed;
  const CovariateTable centered = center_log_covariates(in.covariates);
  const Model model = make_model(centered, in.cells, cfg.kappa, cfg.priors);
  log("fit: ", model.design.n_rivers, " rivers, ", in.cells.n_observations(), " observations, ", cfg.sampler.n_chains,
      " chains x ", cfg.sampler.n_iter, " iterations (burn-in ", cfg.sampler.n_burnin, ")");
  const PosteriorSamples samples = run_sampler(model, cfg.sampler);

  const fs::path& out = cfg.paths.output;
  write_samples(out, samples, hash);
  write_centering(out / "centering.csv", centered.centering);
  write_stations(out / "stations.csv", in.covariates.stations);
  write_diagnostics(out, samples, seed, hash);
  write_summary(out / "summary.csv", samples, seed, hash);
  write_densities(out, samples, model.priors, cfg.report.density_grid, seed, hash);
  {
    std::ofstream f(out / "config_used.txt");
    f << "# " << provenance(seed, hash) << "\n" << cfg.canonical();
  }
  const PredictiveSummary pred = predict_from(samples, centered, cfg);
  write_prediction_files(out, pred, samples.master_seed, hash);
  if (cfg.report.cell_fits) write_cell_reports(out, samples, in.cells, in.covariates.stations, cfg, seed, hash);

  for (const auto& c : samples.chains)
    log("chain ", c.chain, ": acceptance rich ", c.accept_rich, ", poor ", c.accept_poor);
  log("fit: wrote ", out.string());
}

void run_predict(const RunConfig& cfg, const Logger& log) {
  const Mode mode = Mode::predict;
  if (cfg.paths.samples.empty())
    throw RunError(kExitUsage, "config", "paths.samples (directory of a previous fit) is required for predict");
  const fs::path cov_path = cfg.paths.predict_covariates.empty() ? cfg.paths.covariates : cfg.paths.predict_covariates;
  require_file(cov_path, "paths.predict_covariates", mode);
  const PosteriorSamples samples = read_samples(cfg.paths.samples);
  const CovariateCentering centering = read_centering(cfg.paths.samples / "centering.csv");
  const RawCovariateTable raw = load_covariates(cov_path);
  const CovariateTable target = center_log_covariates(raw, centering);
  const PredictiveSummary pred = predict_from(samples, target, cfg);
  for (const auto& w : pred.warnings) log("warning: ", w);
  // Tagged with the fit's provenance: the posterior is what the numbers depend on.
  write_prediction_files(cfg.paths.output, pred, samples.master_seed, samples.config_hash);
  log("predict: ", target.n_rivers(), " stations from ", samples.total_draws(), " draws, wrote ",
      cfg.paths.output.string());
}

std::string level_label(double q) { return "p" + csv::format_double(std::round(q * 1000.0) / 10.0); }

void run_cv(const RunConfig& cfg, const Logger& log) {
  const Inputs in = load_inputs(cfg, Mode::cv, true);
  const std::uint64_t hash = run_hash(cfg, {cfg.paths.observations, cfg.paths.covariates});
  const std::uint64_t seed = cfg.sampler.seed;
  const fs::path& out = cfg.paths.output;
  const CvOptions opt{cfg.cv.data_quantile, cfg.cv.allow_high_quantile,
                      PredictOptions{cfg.predict.residuals, cfg.predict.interval}};
  const std::string hi = level_label(cfg.cv.data_quantile);
  log("cv: ", in.cells.n_rivers, " folds");
  const CvResult res = cross_validate(
      in.cells, in.covariates, cfg.priors, cfg.kappa, cfg.sampler, opt, [&](const CvFold& f) {
        if (!f.ok) {
          log("fold ", f.station, ": FAILED: ", f.error);
          return;
        }
        for (const auto& w : f.warnings) log("warning: ", w);
        log("fold ", f.station, ": rank correlation ", f.rank_correlation);
        {
          csv::Writer w(out / ("cv_" + f.station + ".csv"));
          w.comment(provenance(seed, hash) + " fold_seed=" + std::to_string(f.fold_seed));
          w.row({"month", "pred_median", "pred_" + hi, "data_median", "data_" + hi, "n_points", "pred_median_lower",
                 "pred_median_upper", "pred_" + hi + "_lower", "pred_" + hi + "_upper"});
          for (std::size_t m = 0; m < f.pred_median.size(); ++m)
            w.values(static_cast<int>(m + 1), f.pred_median[m].median, f.pred_high[m].median, f.data_median[m],
                     f.data_high[m], f.n_points[m], f.pred_median[m].lower, f.pred_median[m].upper,
                     f.pred_high[m].lower, f.pred_high[m].upper);
        }
        csv::Writer w(out / ("cv_points_" + f.station + ".csv"));
        w.comment(provenance(seed, hash));
        w.row({"month", "flow"});
        for (std::size_t m = 0; m < f.points.size(); ++m)
          for (double y : f.points[m]) w.values(static_cast<int>(m + 1), y);
      });
  csv::Writer w(out / "cv_summary.csv");
  w.comment(provenance(seed, hash));
  w.row({"station", "ok", "rank_correlation", "training_rivers", "training_cells", "training_observations",
         "training_checksum", "excludes_held_out", "fold_seed", "error"});
  int ok = 0;
  for (const auto& f : res.folds) {
    ok += f.ok;
    std::string err = f.error;
    std::replace(err.begin(), err.end(), ',', ';');
    w.values(f.station, f.ok ? "true" : "false", f.rank_correlation, f.training_rivers, f.training_cells,
             static_cast<unsigned long long>(f.training_observations), hex(f.training_checksum),
             f.excludes_held_out ? "true" : "false", static_cast<unsigned long long>(f.fold_seed), err);
  }
  log("cv: ", ok, " of ", res.folds.size(), " folds succeeded, wrote ", out.string());
  if (ok == 0) throw RunError(kExitSampler, "cv", "every cross-validation fold failed");
}

void write_gof(const fs::path& cells_path, const fs::path& hist_path, const GofReport& g,
               const std::vector<std::string>& stations, std::uint64_t seed, std::uint64_t hash) {
  {
    csv::Writer w(cells_path);
    w.comment(provenance(seed, hash));
    w.row({"station", "month", "n", "ok", "mu", "sigma", "ad_statistic", "p_value", "note"});
    for (const auto& c : g.cells) {
      std::string note = c.note;
      std::replace(note.begin(), note.end(), ',', ';');
      if (c.ok)
        w.values(stations[c.river], c.month + 1, c.n, "true", c.fit.mu, c.fit.sigma, c.ad_statistic, c.ad_p_value, note);
      else
        w.values(stations[c.river], c.month + 1, c.n, "false", "NA", "NA", "NA", "NA", note);
    }
  }
  csv::Writer w(hist_path);
  w.comment(provenance(seed, hash) + " ks_uniform=" + csv::format_double(g.ks_uniform));
  w.row({"bin_lower", "bin_upper", "count"});
  for (std::size_t b = 0; b < g.bin_counts.size(); ++b) w.values(g.bin_edges[b], g.bin_edges[b + 1], g.bin_counts[b]);
}

void run_gof(const RunConfig& cfg, const Logger& log) {
  const Inputs in = load_inputs(cfg, Mode::gof, false);
  const auto stations = cfg.paths.covariates.empty() ? in.observations.stations() : in.covariates.stations;
  const std::uint64_t hash = run_hash(cfg, {cfg.paths.observations, cfg.paths.covariates});
  const GofReport g = goodness_of_fit(in.cells, cfg.gof_n_boot, cfg.sampler.seed, cfg.report.min_cell_obs);
  write_gof(cfg.paths.output / "gof.csv", cfg.paths.output / "gof_histogram.csv", g, stations, cfg.sampler.seed, hash);
  log("gof: ", g.cells.size(), " cells, KS distance of p-values from uniform ", g.ks_uniform);
}

std::string terms_label(const std::vector<int>& terms, const std::vector<std::string>& names) {
  std::string s = "intercept";
  for (int t : terms) s += "+log_" + names[t];
  return s;
}

void run_prelim(const RunConfig& cfg, const Logger& log) {
  const Inputs in = load_inputs(cfg, Mode::prelim, true);
  const std::uint64_t hash = run_hash(cfg, {cfg.paths.observations, cfg.paths.covariates});
  const std::uint64_t seed = cfg.sampler.seed;
  const fs::path& out = cfg.paths.output;
  const PrelimReport r =
      preliminary_analysis(in.cells, in.covariates, cfg.gof_n_boot, seed, cfg.report.min_cell_obs);
  write_gof(out / "prelim_cells.csv", out / "prelim_pvalue_histogram.csv", r.gof, r.stations, seed, hash);
  const char* responses[2] = {"log_mu", "log_sigma"};
  {
    csv::Writer w(out / "prelim_subsets.csv");
    w.comment(provenance(seed, hash));
    w.row({"response", "model", "n", "rss", "aic", "coefficients"});
    for (int which = 0; which < 2; ++which)
      for (const auto& f : r.subsets[which]) {
        std::string coef;
        for (Eigen::Index i = 0; i < f.coef.size(); ++i) coef += (i ? " " : "") + csv::format_double(f.coef[i]);
        w.values(responses[which], terms_label(f.terms, r.covariate_names), f.n, f.rss, f.aic, coef);
      }
  }
  {
    csv::Writer w(out / "prelim_stepwise.csv");
    w.comment(provenance(seed, hash));
    w.row({"response", "step", "action", "term", "aic", "model"});
    for (int which = 0; which < 2; ++which)
      for (std::size_t i = 0; i < r.stepwise[which].trace.size(); ++i) {
        const auto& s = r.stepwise[which].trace[i];
        w.values(responses[which], static_cast<int>(i), s.action,
                 s.term < 0 ? std::string("-") : "log_" + r.covariate_names[s.term], s.aic,
                 terms_label(s.model, r.covariate_names));
      }
  }
  {
    csv::Writer w(out / "prelim_selected.csv");
    w.comment(provenance(seed, hash));
    w.row({"response", "term", "coefficient"});
    for (int which = 0; which < 2; ++which) {
      const auto& f = r.stepwise[which].selected;
      if (f.coef.size() == 0) continue;
      w.values(responses[which], "intercept", f.coef[0]);
      for (std::size_t t = 0; t < f.terms.size(); ++t)
        w.values(responses[which], "log_" + r.covariate_names[f.terms[t]], f.coef[static_cast<Eigen::Index>(t + 1)]);
    }
  }
  csv::Writer w(out / "prelim_correlation.csv");
  w.comment(provenance(seed, hash));
  std::vector<std::string> header{"covariate"};
  for (const auto& n : r.covariate_names) header.push_back("log_" + n);
  w.row(header);
  for (Eigen::Index a = 0; a < r.correlation.rows(); ++a) {
    std::vector<std::string> row{"log_" + r.covariate_names[a]};
    for (Eigen::Index b = 0; b < r.correlation.cols(); ++b) row.push_back(csv::format_double(r.correlation(a, b)));
    w.row(row);
  }
  log("prelim: ", r.n_cells[0], " cells with usable fits, wrote ", out.string());
}

void run_synth(const RunConfig& cfg, const Logger& log) {
  RandomStream rng = RandomStream::derive(cfg.sampler.seed, {tag(StreamTag::synthetic)});
  const SyntheticData d = generate_synthetic(cfg.synth, rng);
  const fs::path& out = cfg.paths.output;
  write_observations(out / "observations.csv", d.observations);
  write_covariates(out / "covariates.csv", d.covariates);
  write_truth(out / "truth.csv", ParameterLayout(d.centered.n_rivers(), d.centered.n_months, d.centered.n_coefficients()),
              d.truth);
  write_centering(out / "truth_centering.csv", d.centered.centering);
  log("synth: ", d.centered.n_rivers(), " rivers, ", d.observations.records.size(), " observations (",
      d.redrawn_nonpositive, " nonpositive draws redrawn), wrote ", out.string());
}

}  // namespace

void execute(Mode mode, const RunConfig& cfg, std::ostream* log_stream) {
  cfg.validate();
  const Logger log{log_stream};
  const OutputLock lock(cfg.paths.output);
  switch (mode) {
    case Mode::fit: return run_fit(cfg, log);
    case Mode::predict: return run_predict(cfg, log);
    case Mode::cv: return run_cv(cfg, log);
    case Mode::gof: return run_gof(cfg, log);
    case Mode::prelim: return run_prelim(cfg, log);
    case Mode::synth: return run_synth(cfg, log);
  }
}

namespace {

std::string quoted(std::string s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

int run(Mode mode, const RunConfig& cfg, std::ostream* log, std::ostream& err) {
  auto report = [&](int code, const std::string& kind, const std::string& msg, const std::string& extra = {}) {
    err << "floodmax: error kind=" << kind << extra << " message=" << quoted(msg) << '\n';
    return code;
  };
  try {
    execute(mode, cfg, log);
    return kExitOk;
  } catch (const RunError& e) {
    return report(e.code, e.kind, e.what());
  } catch (const ConfigError& e) {
    return report(kExitUsage, "config", e.what(), e.key.empty() ? "" : " key=" + e.key);
  } catch (const csv::DataError& e) {
    return report(kExitData, "data", e.what(),
                  " source=" + quoted(e.source) + (e.line ? " line=" + std::to_string(e.line) : ""));
  } catch (const SamplerError& e) {
    return report(kExitSampler, "sampler", e.what());
  } catch (const std::invalid_argument& e) {
    return report(kExitData, "invalid", e.what());
  } catch (const std::exception& e) {
    return report(kExitFailure, "internal", e.what());
  }
}

}  // namespace floodmax
