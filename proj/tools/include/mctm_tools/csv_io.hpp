#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mctm/observations.hpp"

namespace mctm::tools {

struct IngestOptions {
  /// Species columns to read, in model order. Empty: every column other
  /// than date / year / day, in file order.
  std::vector<std::string> species;
};

/// Reads a count table. Covariates come from either an ISO-8601 `date`
/// column or `year` and `day` columns. Empty or non-integer count cells are
/// missing and drop the row; February 29 rows are dropped and counted
/// separately. Throws InputError with the offending line number.
ObservationTable ingest_csv(const std::filesystem::path& path, const IngestOptions& options = {});
ObservationTable parse_csv(std::istream& in, const std::string& source, const IngestOptions& options = {});

/// Day of year on the 365-day grid (days after February 29 shift down by
/// one in leap years). Empty for February 29 itself; throws on invalid dates.
std::optional<int> day_of_year_365(int year, unsigned month, unsigned day);

/// Covariate rows only (date or year/day columns); other columns ignored.
/// February 29 rows are skipped.
std::vector<Covariates> read_covariates(const std::filesystem::path& path);

/// Shortest decimal that reads back to the same double; "NA" if not finite.
std::string format_double(double v);

/// year,day,<species...>; missing cells are written empty.
void write_csv(std::ostream& out, const std::vector<std::string>& species, const std::vector<RawObservation>& rows);
void write_csv(std::ostream& out, const ObservationTable& table);

/// Writes `content` to path via a temporary sibling and a rename, so a
/// failed run never leaves a complete-looking file behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Splits one CSV record; double quotes group fields and "" escapes a quote.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace mctm::tools
