#include "mctm/observations.hpp"

#include <algorithm>
#include <set>

#include "mctm/errors.hpp"
#include "mctm/harmonic.hpp"

namespace mctm {

ObservationTable::ObservationTable(std::vector<std::string> species, std::vector<Observation> rows,
                                   Provenance provenance)
    : species_(std::move(species)), rows_(std::move(rows)), provenance_(std::move(provenance)) {
  if (species_.empty()) throw InputError("observation table needs at least one species");
  std::set<std::string> seen;
  for (const auto& s : species_) {
    if (!seen.insert(s).second) throw InputError("duplicate species name '" + s + "'");
  }
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    if (r.counts.size() != species_.size()) {
      throw InputError("row " + std::to_string(i) + " has " + std::to_string(r.counts.size()) +
                       " counts, expected " + std::to_string(species_.size()));
    }
    if (r.day < 1 || r.day > kDaysPerYear) {
      throw InputError("row " + std::to_string(i) + ": day must lie in 1..365");
    }
    for (int c : r.counts) {
      if (c < 0) throw InputError("row " + std::to_string(i) + ": negative count");
    }
  }
}

int ObservationTable::species_index(const std::string& name) const {
  const auto it = std::find(species_.begin(), species_.end(), name);
  if (it == species_.end()) throw InputError("unknown species '" + name + "'");
  return static_cast<int>(it - species_.begin());
}

std::vector<int> ObservationTable::years() const {
  std::set<int> ys;
  for (const auto& r : rows_) ys.insert(r.year);
  return {ys.begin(), ys.end()};
}

int ObservationTable::max_count(int species) const {
  int m = 0;
  for (const auto& r : rows_) m = std::max(m, r.counts.at(species));
  return m;
}

int ObservationTable::min_count(int species) const {
  if (rows_.empty()) return 0;
  int m = rows_.front().counts.at(species);
  for (const auto& r : rows_) m = std::min(m, r.counts.at(species));
  return m;
}

std::vector<Covariates> ObservationTable::covariates() const {
  std::vector<Covariates> out;
  out.reserve(rows_.size());
  for (const auto& r : rows_) out.push_back(r.covariates());
  return out;
}

ObservationTable ObservationTable::permuted(const std::vector<int>& order) const {
  if (order.size() != species_.size()) throw InputError("permutation size mismatch");
  std::vector<int> check = order;
  std::sort(check.begin(), check.end());
  for (std::size_t i = 0; i < check.size(); ++i) {
    if (check[i] != static_cast<int>(i)) throw InputError("not a permutation of species indices");
  }
  std::vector<std::string> names;
  for (int o : order) names.push_back(species_[o]);
  std::vector<Observation> rows = rows_;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t a = 0; a < order.size(); ++a) rows[i].counts[a] = rows_[i].counts[order[a]];
  }
  return ObservationTable(std::move(names), std::move(rows), provenance_);
}

bool ObservationTable::same_data(const ObservationTable& other) const {
  return species_ == other.species_ && rows_ == other.rows_;
}

ObservationTable complete_cases(const std::vector<std::string>& species,
                                const std::vector<RawObservation>& raw, Provenance provenance) {
  std::vector<Observation> rows;
  rows.reserve(raw.size());
  std::size_t missing = 0;
  for (const auto& r : raw) {
    const bool complete = std::all_of(r.counts.begin(), r.counts.end(),
                                      [](const auto& c) { return c.has_value(); });
    if (!complete) {
      ++missing;
      continue;
    }
    Observation o{r.year, r.day, {}};
    for (const auto& c : r.counts) o.counts.push_back(*c);
    rows.push_back(std::move(o));
  }
  provenance.dropped_missing += missing;
  if (provenance.rows_read == 0) provenance.rows_read = raw.size();
  return ObservationTable(species, std::move(rows), std::move(provenance));
}

}  // namespace mctm
