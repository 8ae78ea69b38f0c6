#include "floodmax/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "floodmax/csv.hpp"
#include "floodmax/random.hpp"

namespace floodmax {

namespace fs = std::filesystem;

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::fit: return "fit";
    case Mode::predict: return "predict";
    case Mode::cv: return "cv";
    case Mode::gof: return "gof";
    case Mode::prelim: return "prelim";
    case Mode::synth: return "synth";
  }
  return "?";
}

std::optional<Mode> parse_mode(const std::string& s) {
  for (Mode m : {Mode::fit, Mode::predict, Mode::cv, Mode::gof, Mode::prelim, Mode::synth})
    if (s == mode_name(m)) return m;
  return std::nullopt;
}

ConfigError::ConfigError(const std::string& k, const std::string& message)
    : std::runtime_error(k.empty() ? message : k + ": " + message), key(k) {}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

int to_int32(const std::string& key, const std::string& v) {
  const long long x = to_int(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw ConfigError(key, "integer out of range");
  return static_cast<int>(x);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError(key, "expected a nonnegative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& f : csv::split(v, ',')) out.push_back(to_double(key, trim(f)));
  if (out.empty()) throw ConfigError(key, "expected a comma-separated list of numbers");
  return out;
}

std::string from_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + csv::format_double(v[i]);
  return s;
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

struct Entry {
  std::function<void(RunConfig&, const std::string&, const std::string&, const fs::path&)> set;
  std::function<std::string(const RunConfig&)> get;
  bool hashed = true;
};

#define FM_DOUBLE(field) \
  Entry { [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) { c.field = to_double(k, v); }, \
          [](const RunConfig& c) { return csv::format_double(c.field); } }
#define FM_INT(field) \
  Entry { [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) { c.field = to_int32(k, v); }, \
          [](const RunConfig& c) { return std::to_string(c.field); } }
#define FM_BOOL(field) \
  Entry { [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) { c.field = to_bool(k, v); }, \
          [](const RunConfig& c) { return from_bool(c.field); } }
#define FM_LIST(field) \
  Entry { [](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) { c.field = to_list(k, v); }, \
          [](const RunConfig& c) { return from_list(c.field); } }
#define FM_PATH(field, is_hashed)                                                                    \
  Entry {                                                                                           \
    [](RunConfig& c, const std::string&, const std::string& v, const fs::path& base) {              \
      fs::path p(v);                                                                                \
      c.field = (p.is_relative() && !base.empty()) ? base / p : p;                                  \
    },                                                                                              \
        [](const RunConfig& c) { return c.field.generic_string(); }, is_hashed                      \
  }

const std::map<std::string, Entry>& table() {
  static const std::map<std::string, Entry> t = {
      // Input paths are not hashed: the run hashes the file contents instead.
      {"paths.observations", FM_PATH(paths.observations, false)},
      {"paths.covariates", FM_PATH(paths.covariates, false)},
      {"paths.output", FM_PATH(paths.output, false)},
      {"paths.samples", FM_PATH(paths.samples, false)},
      {"paths.predict_covariates", FM_PATH(paths.predict_covariates, false)},

      {"sampler.n_iter", FM_INT(sampler.n_iter)},
      {"sampler.n_burnin", FM_INT(sampler.n_burnin)},
      {"sampler.thin", FM_INT(sampler.thin)},
      {"sampler.n_chains", FM_INT(sampler.n_chains)},
      {"sampler.seed",
       Entry{[](RunConfig& c, const std::string& k, const std::string& v, const fs::path&) { c.sampler.seed = to_u64(k, v); },
             [](const RunConfig& c) { return std::to_string(c.sampler.seed); }}},
      {"sampler.rw_step_hyper", FM_DOUBLE(sampler.rw_step_hyper)},
      {"sampler.target_accept_rich", FM_DOUBLE(sampler.target_accept_rich)},
      {"sampler.target_accept_poor", FM_DOUBLE(sampler.target_accept_poor)},
      {"sampler.init_jitter", FM_DOUBLE(sampler.init_jitter)},

      {"model.kappa", FM_DOUBLE(kappa)},

      {"prior.beta.intercept.mean", FM_DOUBLE(priors.intercept.mean)},
      {"prior.beta.intercept.sd", FM_DOUBLE(priors.intercept.sd)},
      {"prior.beta.slope.mean", FM_DOUBLE(priors.slope.mean)},
      {"prior.beta.slope.sd", FM_DOUBLE(priors.slope.sd)},
      {"prior.psi0.rate", FM_DOUBLE(priors.psi0_rate)},
      {"prior.psi_slope.rate", FM_DOUBLE(priors.psi_slope_rate)},
      {"prior.sigma.rate", FM_DOUBLE(priors.sigma_rate)},

      {"gof.n_boot", FM_INT(gof_n_boot)},

      {"predict.residuals", FM_BOOL(predict.residuals)},
      {"predict.quantiles", FM_LIST(predict.quantiles)},
      {"predict.interval", FM_DOUBLE(predict.interval)},

      {"cv.data_quantile", FM_DOUBLE(cv.data_quantile)},
      {"cv.allow_high_quantile", FM_BOOL(cv.allow_high_quantile)},

      {"report.cell_fits", FM_BOOL(report.cell_fits)},
      {"report.cdf_band", FM_DOUBLE(report.cdf_band)},
      {"report.density_grid", FM_INT(report.density_grid)},
      {"report.min_cell_obs", FM_INT(report.min_cell_obs)},

      {"synth.n_rivers", FM_INT(synth.n_rivers)},
      {"synth.n_years", FM_INT(synth.n_years)},
      {"synth.first_year", FM_INT(synth.first_year)},
      {"synth.kappa", FM_DOUBLE(synth.kappa)},
      {"synth.beta", FM_LIST(synth.beta)},
      {"synth.alpha", FM_LIST(synth.alpha)},
      {"synth.psi", FM_LIST(synth.psi)},
      {"synth.phi", FM_LIST(synth.phi)},
      {"synth.sigma_eta", FM_DOUBLE(synth.sigma_eta)},
      {"synth.sigma_tau", FM_DOUBLE(synth.sigma_tau)},
      {"synth.coefficients_from_prior", FM_BOOL(synth.coefficients_from_prior)},
      {"synth.precip_level_mm", FM_DOUBLE(synth.precip_level_mm)},
      {"synth.precip_seasonal_amplitude", FM_DOUBLE(synth.precip_seasonal_amplitude)},
      {"synth.precip_peak_month", FM_INT(synth.precip_peak_month)},
      {"synth.precip_river_sd", FM_DOUBLE(synth.precip_river_sd)},
      {"synth.precip_noise_sd", FM_DOUBLE(synth.precip_noise_sd)},
      {"synth.missing_prob", FM_DOUBLE(synth.missing_prob)},
  };
  return t;
}

#undef FM_DOUBLE
#undef FM_INT
#undef FM_BOOL
#undef FM_LIST
#undef FM_PATH

}  // namespace

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value, const fs::path& base_dir) {
  const auto& t = table();
  const auto it = t.find(key);
  if (it == t.end()) throw ConfigError(key, "unknown configuration key");
  it->second.set(cfg, key, value, base_dir);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, e] : table()) keys.push_back(k);
  return keys;
}

RunConfig parse_config(const std::string& text, const fs::path& base_dir) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(line_no) + ": empty key");
    if (auto [it, fresh] = seen.emplace(key, line_no); !fresh)
      throw ConfigError(key, "set twice (lines " + std::to_string(it->second) + " and " + std::to_string(line_no) + ")");
    set_config_value(cfg, key, value, base_dir);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

void RunConfig::validate() const {
  try {
    sampler.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("sampler", e.what());
  }
  if (!(kappa > 0.0)) throw ConfigError("model.kappa", "must be > 0");
  if (!(priors.intercept.sd > 0.0)) throw ConfigError("prior.beta.intercept.sd", "must be > 0");
  if (!(priors.slope.sd > 0.0)) throw ConfigError("prior.beta.slope.sd", "must be > 0");
  if (!(priors.psi0_rate > 0.0)) throw ConfigError("prior.psi0.rate", "must be > 0");
  if (!(priors.psi_slope_rate > 0.0)) throw ConfigError("prior.psi_slope.rate", "must be > 0");
  if (!(priors.sigma_rate > 0.0)) throw ConfigError("prior.sigma.rate", "must be > 0");
  if (gof_n_boot < 99) throw ConfigError("gof.n_boot", "must be >= 99");
  for (double q : predict.quantiles)
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("predict.quantiles", "levels must lie in (0, 1)");
  if (!(predict.interval > 0.0 && predict.interval < 1.0)) throw ConfigError("predict.interval", "must lie in (0, 1)");
  if (!(cv.data_quantile > 0.5 && cv.data_quantile < 1.0)) throw ConfigError("cv.data_quantile", "must lie in (0.5, 1)");
  if (cv.data_quantile > 0.9 && !cv.allow_high_quantile)
    throw ConfigError("cv.data_quantile",
                      "sample quantiles above 0.9 are too noisy with ~50 points per cell; set cv.allow_high_quantile = true to override");
  if (!(report.cdf_band > 0.0 && report.cdf_band < 1.0)) throw ConfigError("report.cdf_band", "must lie in (0, 1)");
  if (report.density_grid < 16) throw ConfigError("report.density_grid", "must be >= 16");
  if (report.min_cell_obs < 5) throw ConfigError("report.min_cell_obs", "must be >= 5");
  try {
    synth.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("synth", e.what());
  }
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, e] : table())
    if (e.hashed) out += k + "=" + e.get(*this) + "\n";
  return out;
}

std::uint64_t RunConfig::hash() const {
  const std::string c = canonical();
  return fnv1a(c.data(), c.size());
}

}  // namespace floodmax
