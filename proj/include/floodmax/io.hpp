#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "floodmax/csv.hpp"
#include "floodmax/design.hpp"
#include "floodmax/sampler.hpp"

namespace floodmax {

using csv::DataError;

struct Observation {
  std::string station;
  int year = 0;
  int month = 0;  // 1..12
  double flow = 0.0;
};

struct ObservationTable {
  std::vector<Observation> records;

  // Distinct stations in order of first appearance.
  std::vector<std::string> stations() const;
  // Sorts records by (station, year, month).
  void canonicalize();
};

// station_id,year,month,flow. Flow must be > 0, month in 1..12, no duplicate
// (station, year, month). Errors name the offending line.
ObservationTable load_observations(const std::filesystem::path& path);
void write_observations(const std::filesystem::path& path, ObservationTable table);

// station_id,month,area_km2,max_daily_precip. One row per (station, month),
// every station needs all 12 months. Station order follows first appearance.
RawCovariateTable load_covariates(const std::filesystem::path& path);
void write_covariates(const std::filesystem::path& path, const RawCovariateTable& table);

// Groups flows by the given station order. Throws if an observation refers to
// a station missing from `stations`.
CellData group_cells(const ObservationTable& obs, const std::vector<std::string>& stations,
                     int n_months = kDefaultMonths);

void write_centering(const std::filesystem::path& path, const CovariateCentering& c);
CovariateCentering read_centering(const std::filesystem::path& path);

void write_stations(const std::filesystem::path& path, const std::vector<std::string>& stations);
std::vector<std::string> read_stations(const std::filesystem::path& path);

// One file per chain: samples_chain<c>.csv, first line
// "# seed=<master> chain=<c> chain_seed=<s> config_hash=<hex>".
std::filesystem::path samples_path(const std::filesystem::path& dir, int chain);
void write_samples(const std::filesystem::path& dir, const PosteriorSamples& samples, std::uint64_t config_hash);
PosteriorSamples read_samples(const std::filesystem::path& dir);

// parameter,value using the sample column names.
void write_truth(const std::filesystem::path& path, const ParameterLayout& layout, const LatentState& truth);

std::string hex(std::uint64_t v);

}  // namespace floodmax
