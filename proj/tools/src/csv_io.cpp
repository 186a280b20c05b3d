#include "mctm_tools/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mctm/errors.hpp"
#include "mctm/harmonic.hpp"

namespace mctm::tools {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<long long> parse_integer(const std::string& token) {
  if (token.empty()) return std::nullopt;
  long long v = 0;
  const char* first = token.data();
  const char* last = first + token.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  return v;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
  throw InputError(source + ":" + std::to_string(line) + ": " + what);
}

struct CovariateColumns {
  int date = -1;
  int year = -1;
  int day = -1;
};

CovariateColumns covariate_columns(const std::vector<std::string>& header, const std::string& source) {
  CovariateColumns c;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "date") c.date = static_cast<int>(i);
    if (header[i] == "year") c.year = static_cast<int>(i);
    if (header[i] == "day") c.day = static_cast<int>(i);
  }
  if (c.date < 0 && (c.year < 0 || c.day < 0)) {
    fail(source, 1, "header needs a 'date' column or both 'year' and 'day' columns");
  }
  return c;
}

// (year, day on the 365 grid); empty for February 29.
std::optional<std::pair<int, int>> parse_when(const std::vector<std::string>& cells, const CovariateColumns& cols,
                                              const std::string& source, std::size_t line_no) {
  if (cols.date >= 0) {
    const std::string& d = cells[cols.date];
    const bool shape = d.size() == 10 && d[4] == '-' && d[7] == '-';
    const auto py = shape ? parse_integer(d.substr(0, 4)) : std::nullopt;
    const auto pm = shape ? parse_integer(d.substr(5, 2)) : std::nullopt;
    const auto pd = shape ? parse_integer(d.substr(8, 2)) : std::nullopt;
    if (!py || !pm || !pd) fail(source, line_no, "malformed date '" + d + "' (expected YYYY-MM-DD)");
    std::optional<int> doy;
    try {
      doy = day_of_year_365(static_cast<int>(*py), static_cast<unsigned>(*pm), static_cast<unsigned>(*pd));
    } catch (const InputError&) {
      fail(source, line_no, "malformed date '" + d + "'");
    }
    if (!doy) return std::nullopt;
    return std::pair{static_cast<int>(*py), *doy};
  }
  const auto y = parse_integer(cells[cols.year]);
  const auto d = parse_integer(cells[cols.day]);
  if (!y) fail(source, line_no, "malformed year '" + cells[cols.year] + "'");
  if (!d || *d < 1 || *d > kDaysPerYear) {
    fail(source, line_no, "day must be an integer in [1, 365], got '" + cells[cols.day] + "'");
  }
  return std::pair{static_cast<int>(*y), static_cast<int>(*d)};
}

}  // namespace

std::string format_double(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, ptr) : std::string("NA");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::optional<int> day_of_year_365(int year, unsigned month, unsigned day) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) throw InputError("invalid calendar date");
  if (month == 2 && day == 29) return std::nullopt;
  const auto start = sys_days{std::chrono::year{year} / January / 1};
  int doy = static_cast<int>((sys_days{ymd} - start).count()) + 1;
  if (ymd.year().is_leap() && month > 2) --doy;
  return doy;
}

ObservationTable parse_csv(std::istream& in, const std::string& source, const IngestOptions& options) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw InputError(source + ": empty file (a header row is required)");
  ++line_no;
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const std::vector<std::string> header = split_csv_line(line);

  auto column = [&](const std::string& name) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const CovariateColumns cols = covariate_columns(header, source);

  std::vector<std::string> species = options.species;
  if (species.empty()) {
    for (const auto& h : header) {
      if (h != "date" && h != "year" && h != "day" && !h.empty()) species.push_back(h);
    }
  }
  if (species.empty()) fail(source, 1, "no species columns found");
  std::vector<int> species_col;
  for (const auto& s : species) {
    const int c = column(s);
    if (c < 0) fail(source, 1, "unknown species column '" + s + "'");
    species_col.push_back(c);
  }

  Provenance prov;
  prov.source = source;
  std::vector<RawObservation> raw;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++prov.rows_read;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      fail(source, line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                std::to_string(cells.size()));
    }
    const auto when = parse_when(cells, cols, source, line_no);
    if (!when) {
      ++prov.dropped_leap_day;
      continue;
    }
    RawObservation r{when->first, when->second, {}};
    for (std::size_t s = 0; s < species.size(); ++s) {
      const auto v = parse_integer(cells[species_col[s]]);
      if (v && *v < 0) fail(source, line_no, "negative count " + std::to_string(*v) + " for '" + species[s] + "'");
      if (v && *v > std::numeric_limits<int>::max()) fail(source, line_no, "count out of range for '" + species[s] + "'");
      r.counts.push_back(v ? std::optional<int>(static_cast<int>(*v)) : std::nullopt);
    }
    raw.push_back(std::move(r));
  }
  return complete_cases(species, raw, prov);
}

std::vector<Covariates> read_covariates(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open input file '" + path.string() + "'");
  const std::string source = path.string();
  std::string line;
  if (!std::getline(in, line)) throw InputError(source + ": empty file (a header row is required)");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const std::vector<std::string> header = split_csv_line(line);
  const CovariateColumns cols = covariate_columns(header, source);
  std::vector<Covariates> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      fail(source, line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                std::to_string(cells.size()));
    }
    if (const auto when = parse_when(cells, cols, source, line_no)) {
      out.push_back({when->first, static_cast<double>(when->second)});
    }
  }
  return out;
}

ObservationTable ingest_csv(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open input file '" + path.string() + "'");
  return parse_csv(in, path.string(), options);
}

void write_csv(std::ostream& out, const std::vector<std::string>& species, const std::vector<RawObservation>& rows) {
  out << "year,day";
  for (const auto& s : species) out << ',' << s;
  out << '\n';
  for (const auto& r : rows) {
    out << r.year << ',' << r.day;
    for (const auto& c : r.counts) {
      out << ',';
      if (c) out << *c;
    }
    out << '\n';
  }
}

void write_csv(std::ostream& out, const ObservationTable& table) {
  std::vector<RawObservation> rows;
  rows.reserve(table.size());
  for (const auto& o : table.rows()) {
    RawObservation r{o.year, o.day, {}};
    for (int c : o.counts) r.counts.emplace_back(c);
    rows.push_back(std::move(r));
  }
  write_csv(out, table.species(), rows);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw InputError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw InputError("cannot move '" + tmp.string() + "' into place: " + ec.message());
  }
}

}  // namespace mctm::tools
