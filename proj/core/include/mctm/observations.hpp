#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace mctm {

/// Covariate point: calendar year and day of year on the 365-day grid.
struct Covariates {
  int year = 0;
  double day = 1.0;
};

struct Observation {
  int year = 0;
  int day = 1;
  std::vector<int> counts;

  Covariates covariates() const { return {year, static_cast<double>(day)}; }
  bool operator==(const Observation&) const = default;
};

/// A row that may still carry missing counts (before complete-case filtering).
struct RawObservation {
  int year = 0;
  int day = 1;
  std::vector<std::optional<int>> counts;
};

struct Provenance {
  std::string source;
  std::size_t rows_read = 0;
  std::size_t dropped_missing = 0;
  std::size_t dropped_leap_day = 0;

  std::size_t rows_dropped() const { return dropped_missing + dropped_leap_day; }
};

/// Complete-case count table: N rows of J species counts plus (year, day).
class ObservationTable {
 public:
  ObservationTable() = default;
  ObservationTable(std::vector<std::string> species, std::vector<Observation> rows,
                   Provenance provenance = {});

  const std::vector<std::string>& species() const noexcept { return species_; }
  const std::vector<Observation>& rows() const noexcept { return rows_; }
  const Provenance& provenance() const noexcept { return provenance_; }
  Provenance& provenance() noexcept { return provenance_; }

  std::size_t size() const noexcept { return rows_.size(); }
  int n_species() const noexcept { return static_cast<int>(species_.size()); }

  int species_index(const std::string& name) const;
  std::vector<int> years() const;  // sorted, unique
  int max_count(int species) const;
  int min_count(int species) const;
  std::vector<Covariates> covariates() const;

  /// Columns reordered so that new column a is old column order[a].
  ObservationTable permuted(const std::vector<int>& order) const;

  /// Equality of species, covariates and counts; provenance is ignored.
  bool same_data(const ObservationTable& other) const;

 private:
  std::vector<std::string> species_;
  std::vector<Observation> rows_;
  Provenance provenance_;
};

ObservationTable complete_cases(const std::vector<std::string>& species,
                                const std::vector<RawObservation>& raw, Provenance provenance = {});

}  // namespace mctm
