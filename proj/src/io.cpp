#include "floodmax/io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

namespace floodmax {

std::string hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
  return s;
}

std::vector<std::string> ObservationTable::stations() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : records)
    if (seen.insert(r.station).second) out.push_back(r.station);
  return out;
}

void ObservationTable::canonicalize() {
  std::sort(records.begin(), records.end(), [](const Observation& a, const Observation& b) {
    return std::tie(a.station, a.year, a.month) < std::tie(b.station, b.year, b.month);
  });
}

namespace {

void require_fields(const std::vector<std::string>& f, std::size_t n, const csv::Reader& r) {
  if (f.size() != n)
    throw DataError(r.source(), r.line(),
                    "expected " + std::to_string(n) + " fields, found " + std::to_string(f.size()));
}

}  // namespace

ObservationTable load_observations(const std::filesystem::path& path) {
  csv::Reader r(path);
  r.expect_header({"station_id", "year", "month", "flow"});
  ObservationTable t;
  std::set<std::tuple<std::string, int, int>> seen;
  std::vector<std::string> f;
  while (r.next(f)) {
    require_fields(f, 4, r);
    Observation o;
    o.station = f[0];
    if (o.station.empty()) throw DataError(r.source(), r.line(), "empty station_id");
    o.year = static_cast<int>(csv::parse_int(f[1], r.source(), r.line(), "year"));
    o.month = static_cast<int>(csv::parse_int(f[2], r.source(), r.line(), "month"));
    o.flow = csv::parse_double(f[3], r.source(), r.line(), "flow");
    if (o.month < 1 || o.month > 12)
      throw DataError(r.source(), r.line(), "month " + std::to_string(o.month) + " outside 1-12");
    if (!(o.flow > 0.0) || !std::isfinite(o.flow))
      throw DataError(r.source(), r.line(), "flow must be positive and finite, got " + f[3]);
    if (!seen.emplace(o.station, o.year, o.month).second)
      throw DataError(r.source(), r.line(),
                      "duplicate record for (" + o.station + ", " + f[1] + ", " + f[2] + ")");
    t.records.push_back(std::move(o));
  }
  if (t.records.empty()) throw DataError(r.source(), 0, "no observations");
  return t;
}

void write_observations(const std::filesystem::path& path, ObservationTable table) {
  table.canonicalize();
  csv::Writer w(path);
  w.row({"station_id", "year", "month", "flow"});
  for (const auto& o : table.records) w.values(o.station, o.year, o.month, o.flow);
}

RawCovariateTable load_covariates(const std::filesystem::path& path) {
  csv::Reader r(path);
  r.expect_header({"station_id", "month", "area_km2", "max_daily_precip"});
  std::vector<std::string> order;
  std::map<std::string, std::map<int, std::pair<double, double>>> rows;
  std::vector<std::string> f;
  while (r.next(f)) {
    require_fields(f, 4, r);
    const std::string& station = f[0];
    if (station.empty()) throw DataError(r.source(), r.line(), "empty station_id");
    const int month = static_cast<int>(csv::parse_int(f[1], r.source(), r.line(), "month"));
    if (month < 1 || month > 12)
      throw DataError(r.source(), r.line(), "month " + std::to_string(month) + " outside 1-12");
    const double area = csv::parse_double(f[2], r.source(), r.line(), "area_km2");
    const double precip = csv::parse_double(f[3], r.source(), r.line(), "max_daily_precip");
    if (!(area > 0.0) || !(precip > 0.0) || !std::isfinite(area) || !std::isfinite(precip))
      throw DataError(r.source(), r.line(), "covariate values must be positive");
    if (!rows.count(station)) order.push_back(station);
    if (!rows[station].emplace(month, std::make_pair(area, precip)).second)
      throw DataError(r.source(), r.line(), "duplicate covariate row for (" + station + ", " + f[1] + ")");
  }
  if (order.empty()) throw DataError(r.source(), 0, "no covariate rows");

  RawCovariateTable t;
  t.stations = order;
  t.n_months = 12;
  t.names = {"area_km2", "max_daily_precip"};
  t.values.resize(static_cast<Eigen::Index>(order.size()) * 12, 2);
  for (std::size_t j = 0; j < order.size(); ++j) {
    const auto& months = rows[order[j]];
    if (months.size() != 12)
      throw DataError(r.source(), 0, "station " + order[j] + " has " + std::to_string(months.size()) +
                                         " covariate months, expected 12");
    for (const auto& [m, v] : months) {
      const Eigen::Index row = static_cast<Eigen::Index>(j) * 12 + (m - 1);
      t.values(row, 0) = v.first;
      t.values(row, 1) = v.second;
    }
  }
  return t;
}

void write_covariates(const std::filesystem::path& path, const RawCovariateTable& t) {
  if (t.names != std::vector<std::string>{"area_km2", "max_daily_precip"})
    throw std::invalid_argument("write_covariates: only area_km2 and max_daily_precip are serialisable");
  csv::Writer w(path);
  w.row({"station_id", "month", "area_km2", "max_daily_precip"});
  for (int j = 0; j < t.n_rivers(); ++j)
    for (int m = 0; m < t.n_months; ++m) {
      const Eigen::Index row = static_cast<Eigen::Index>(j) * t.n_months + m;
      w.values(t.stations[j], m + 1, t.values(row, 0), t.values(row, 1));
    }
}

CellData group_cells(const ObservationTable& obs, const std::vector<std::string>& stations, int n_months) {
  std::map<std::string, int> index;
  for (std::size_t j = 0; j < stations.size(); ++j) index[stations[j]] = static_cast<int>(j);
  CellData d;
  d.n_rivers = static_cast<int>(stations.size());
  d.n_months = n_months;
  d.y.assign(static_cast<std::size_t>(d.n_cells()), {});
  // Observations in (year) order within each cell.
  ObservationTable sorted = obs;
  sorted.canonicalize();
  for (const auto& o : sorted.records) {
    const auto it = index.find(o.station);
    if (it == index.end()) throw DataError("observations", 0, "station " + o.station + " has no covariates");
    if (o.month < 1 || o.month > n_months) throw DataError("observations", 0, "month outside model range");
    d.y[static_cast<std::size_t>(it->second * n_months + o.month - 1)].push_back(o.flow);
  }
  return d;
}

void write_centering(const std::filesystem::path& path, const CovariateCentering& c) {
  csv::Writer w(path);
  w.row({"covariate", "log_mean", "centered_min", "centered_max"});
  for (std::size_t k = 0; k < c.names.size(); ++k) w.values(c.names[k], c.means[k], c.min[k], c.max[k]);
}

CovariateCentering read_centering(const std::filesystem::path& path) {
  csv::Reader r(path);
  r.expect_header({"covariate", "log_mean", "centered_min", "centered_max"});
  CovariateCentering c;
  std::vector<std::string> f;
  while (r.next(f)) {
    require_fields(f, 4, r);
    c.names.push_back(f[0]);
    c.means.push_back(csv::parse_double(f[1], r.source(), r.line(), "log_mean"));
    c.min.push_back(csv::parse_double(f[2], r.source(), r.line(), "centered_min"));
    c.max.push_back(csv::parse_double(f[3], r.source(), r.line(), "centered_max"));
  }
  return c;
}

void write_stations(const std::filesystem::path& path, const std::vector<std::string>& stations) {
  csv::Writer w(path);
  w.row({"river_index", "station_id"});
  for (std::size_t j = 0; j < stations.size(); ++j) w.values(static_cast<int>(j + 1), stations[j]);
}

std::vector<std::string> read_stations(const std::filesystem::path& path) {
  csv::Reader r(path);
  r.expect_header({"river_index", "station_id"});
  std::vector<std::string> out;
  std::vector<std::string> f;
  while (r.next(f)) {
    require_fields(f, 2, r);
    out.push_back(f[1]);
  }
  return out;
}

std::filesystem::path samples_path(const std::filesystem::path& dir, int chain) {
  return dir / ("samples_chain" + std::to_string(chain) + ".csv");
}

void write_samples(const std::filesystem::path& dir, const PosteriorSamples& samples, std::uint64_t config_hash) {
  for (const auto& c : samples.chains) {
    csv::Writer w(samples_path(dir, c.chain));
    w.comment("seed=" + std::to_string(samples.master_seed) + " chain=" + std::to_string(c.chain) +
              " chain_seed=" + std::to_string(c.seed) + " config_hash=" + hex(config_hash));
    w.row(samples.layout.names());
    std::vector<std::string> fields(samples.layout.size());
    for (Eigen::Index i = 0; i < c.draws.rows(); ++i) {
      for (Eigen::Index k = 0; k < c.draws.cols(); ++k) fields[k] = csv::format_double(c.draws(i, k));
      w.row(fields);
    }
  }
}

PosteriorSamples read_samples(const std::filesystem::path& dir) {
  PosteriorSamples out;
  for (int chain = 0;; ++chain) {
    const auto path = samples_path(dir, chain);
    if (!std::filesystem::exists(path)) break;
    std::ifstream probe(path);
    std::string first;
    std::getline(probe, first);
    ChainSamples cs;
    cs.chain = chain;
    if (first.rfind("# ", 0) == 0) {
      for (const auto& tok : csv::split(first.substr(2), ' ')) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "seed") out.master_seed = std::stoull(val);
        if (key == "chain_seed") cs.seed = std::stoull(val);
        if (key == "config_hash") out.config_hash = std::stoull(val, nullptr, 16);
      }
    }
    csv::Reader r(path);
    const auto header = r.read_header();
    if (chain == 0) out.layout = ParameterLayout::from_names(header);
    else if (header != out.layout.names())
      throw DataError(r.source(), r.line(), "sample columns differ from chain 0");
    std::vector<std::vector<double>> rows;
    std::vector<std::string> f;
    while (r.next(f)) {
      require_fields(f, header.size(), r);
      std::vector<double> row(f.size());
      for (std::size_t k = 0; k < f.size(); ++k) row[k] = csv::parse_double(f[k], r.source(), r.line(), header[k]);
      rows.push_back(std::move(row));
    }
    cs.draws.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < header.size(); ++k) cs.draws(i, k) = rows[i][k];
    out.chains.push_back(std::move(cs));
  }
  if (out.chains.empty()) throw DataError((dir / "samples_chain0.csv").string(), 0, "no posterior sample files");
  return out;
}

void write_truth(const std::filesystem::path& path, const ParameterLayout& layout, const LatentState& truth) {
  csv::Writer w(path);
  w.row({"parameter", "value"});
  const Eigen::VectorXd v = layout.flatten(truth);
  for (int i = 0; i < layout.size(); ++i) w.values(layout.names()[i], v[i]);
}

}  // namespace floodmax
