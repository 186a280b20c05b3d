#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mctm/errors.hpp"
#include "mctm/simulate.hpp"
#include "mctm_tools/commands.hpp"
#include "mctm_tools/csv_io.hpp"
#include "mctm_tools/result_document.hpp"
#include "mctm_tools/run_config.hpp"

using namespace mctm;
using namespace mctm::tools;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("mctm_cli_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "mctm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return rc;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

// Small, quick configuration for end-to-end runs.
const char* kSmallConfig = R"({"bernstein_coefs": 5, "harmonics": 1, "propagation_draws": 500, "trajectory_step": 60})";

}  // namespace

TEST_CASE("complete-case filtering keeps 4955 of 5311 rows") {
  std::ostringstream csv;
  csv << "year,day,a,b,c\n";
  int written = 0, incomplete = 0;
  for (int y = 2002; written < 5311; ++y) {
    for (int d = 1; d <= 365 && written < 5311; ++d, ++written) {
      const bool drop = written % 14 == 7 && incomplete < 356;
      const int blank = written % 3;
      csv << y << ',' << d;
      for (int j = 0; j < 3; ++j) {
        csv << ',';
        if (!(drop && j == blank)) csv << (written * (j + 3)) % 11;
      }
      csv << '\n';
      incomplete += drop;
    }
  }
  std::istringstream in(csv.str());
  const ObservationTable t = parse_csv(in, "memory");
  CHECK(t.provenance().rows_read == 5311);
  CHECK(t.provenance().dropped_missing == 356);
  CHECK(t.size() == 4955);
  CHECK(t.species() == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("dates, leap days and the 365-day grid") {
  CHECK(day_of_year_365(2003, 1, 1) == 1);
  CHECK(day_of_year_365(2003, 12, 31) == 365);
  CHECK(day_of_year_365(2004, 3, 1) == 60);
  CHECK(day_of_year_365(2003, 3, 1) == 60);
  CHECK(day_of_year_365(2004, 12, 31) == 365);
  CHECK_FALSE(day_of_year_365(2004, 2, 29).has_value());
  CHECK_THROWS_AS(day_of_year_365(2003, 2, 29), InputError);

  std::istringstream in("date,x,y\n2004-02-28,1,2\n2004-02-29,3,4\n2004-03-01,5,6\n");
  const ObservationTable t = parse_csv(in, "leap.csv");
  CHECK(t.size() == 2);
  CHECK(t.provenance().dropped_leap_day == 1);
  CHECK(t.rows()[1].day == 60);
  CHECK(t.rows()[1].counts == std::vector<int>{5, 6});
}

TEST_CASE("ingest errors name the line") {
  auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_csv(in, "bad.csv");
    } catch (const InputError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("year,day,a\n2002,1,3\n2002,2,-1\n").find("bad.csv:3") != std::string::npos);
  CHECK(message("year,day,a\n2002,400,3\n").find("bad.csv:2") != std::string::npos);
  CHECK(message("a,b\n1,2\n").find("bad.csv") != std::string::npos);
  CHECK_FALSE(message("year,day,a\n2002,1,3\n").size());

  // Non-integer cells are missing, not fatal.
  std::istringstream in("year,day,a,b\n2002,1,3,x\n2002,2,2.5,1\n2002,3,4,5\n");
  CHECK(parse_csv(in, "soft.csv").size() == 1);

  std::istringstream pick("year,day,a,b,c\n2002,1,3,4,5\n");
  const ObservationTable t = parse_csv(pick, "pick.csv", {{"c", "a"}});
  CHECK(t.species() == std::vector<std::string>{"c", "a"});
  CHECK(t.rows()[0].counts == std::vector<int>{5, 3});
}

TEST_CASE("csv helpers") {
  CHECK(split_csv_line(R"(a,"b,c","d""e",)") == std::vector<std::string>{"a", "b,c", "d\"e", ""});
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1e-300) == "1e-300");
  CHECK(format_double(std::nan("")) == "NA");
  CHECK(std::stod(format_double(0.1 + 0.2)) == 0.1 + 0.2);
}

TEST_CASE("simulated tables survive a write and read") {
  const auto raw = synth_birds_raw(5, 1, 0.1);
  std::ostringstream out;
  write_csv(out, kSynthSpecies, raw);
  std::istringstream in(out.str());
  const ObservationTable t = parse_csv(in, "roundtrip");
  CHECK(t.same_data(synth_birds(5, 1, 0.1)));
}

TEST_CASE("run configuration") {
  const RunConfig c = run_config_from_json(nlohmann::json::parse(kSmallConfig));
  CHECK(c.bernstein_coefs == 5);
  CHECK(c.seed == RunConfig{}.seed);
  CHECK(run_config_from_json(to_json(c)).propagation_draws == 500);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json::parse(R"({"bernstein": 5})")), InputError);
  RunConfig bad;
  bad.ci_level = 1.5;
  CHECK_THROWS_AS(validate(bad), InputError);
}

TEST_CASE("result documents") {
  nlohmann::json doc = new_document("fit");
  CHECK_NOTHROW(check_schema(doc));
  doc["schema"]["version"] = "2.0";
  CHECK_THROWS_AS(check_schema(doc), InputError);
  doc["schema"]["version"] = "1.7";
  CHECK_NOTHROW(check_schema(doc));
  doc["schema"]["name"] = "other";
  CHECK_THROWS_AS(check_schema(doc), InputError);

  const ObservationTable data = synth_birds(3, 1, 0.0);
  const ModelSpec spec = make_spec(data, 5, 1, LambdaMode::CovariateDependent);
  const FitResult f = fit(data, spec, LikelihoodKind::DiscreteApprox);
  const FitResult back = fit_from_json(nlohmann::json::parse(render(to_json(f))));
  CHECK(back.theta_hat == f.theta_hat);
  CHECK(back.vcov == f.vcov);
  CHECK(back.loglik == f.loglik);
  CHECK(back.spec.design == f.spec.design);
  CHECK(back.spec.species == f.spec.species);
  CHECK(back.spec.lambda_mode == f.spec.lambda_mode);
  CHECK(render(to_json(back)) == render(to_json(f)));
}

TEST_CASE("end to end: simulate, fit, predict, bootstrap") {
  TempDir dir("e2e");
  write_text(dir.path / "config.json", kSmallConfig);
  const std::string cfg = (dir.path / "config.json").string();
  const std::string out = dir.path.string();

  REQUIRE(cli({"simulate", "--years", "2", "--seed", "11", "--out-dir", out}) == 0);
  const std::string input = (dir.path / "simulated.csv").string();
  CHECK(count_lines(slurp(input)) == 2 * 365 + 1);

  std::string text;
  REQUIRE(cli({"fit", "--input", input, "--config", cfg, "--lambda", "both", "--out-dir", out}, &text) == 0);
  CHECK(text.find("LR test") != std::string::npos);
  const std::string first = slurp(dir.path / "result.json");
  const nlohmann::json doc = nlohmann::json::parse(first);
  CHECK_NOTHROW(check_schema(doc));
  CHECK(doc["fits"].size() == 2);
  CHECK(doc["lr_test"]["df"] == 6);  // 3 pairs x 2 harmonic columns with one harmonic
  CHECK(doc["data"]["rows_used"].get<std::size_t>() + doc["data"]["rows_dropped"].get<std::size_t>() == 730);
  CHECK(fs::exists(dir.path / "trajectories.csv"));
  CHECK(fs::exists(dir.path / "marginal_quantiles_constant.csv"));
  CHECK(fs::exists(dir.path / "marginal_quantiles_covariate.csv"));

  // A rerun writes the same bytes.
  REQUIRE(cli({"fit", "--input", input, "--config", cfg, "--lambda", "both", "--out-dir", out}) == 0);
  CHECK(slurp(dir.path / "result.json") == first);

  const std::string model = (dir.path / "result.json").string();
  REQUIRE(cli({"predict", "--model", model, "--config", cfg, "--out-dir", out}) == 0);
  CHECK(count_lines(slurp(dir.path / "predictions.csv")) == 1 + 2 * 365 * 3);

  REQUIRE(cli({"bootstrap", "--input", input, "--config", cfg, "--replicates", "3", "--out-dir", out}) == 0);
  const nlohmann::json boot = nlohmann::json::parse(slurp(dir.path / "bootstrap.json"));
  CHECK(boot["bootstrap"]["replicates"] == 3);
  CHECK(count_lines(slurp(dir.path / "bootstrap_spearman.csv")) == 1 + 3 * 3);
}

TEST_CASE("usage and input errors") {
  std::string err;
  CHECK(cli({"fit"}, nullptr, &err) == 1);
  CHECK(err.find("--input") != std::string::npos);
  CHECK(cli({"fit", "--lambda", "sometimes"}) == 2);
  CHECK(cli({"nonsense"}) == 2);
  CHECK(cli({"fit", "--input", "/nonexistent/file.csv"}, nullptr, &err) == 1);
  CHECK(cli({"predict"}, nullptr, &err) == 1);
  CHECK(err.find("--model") != std::string::npos);
}
