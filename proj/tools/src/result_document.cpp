#include "mctm_tools/result_document.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "mctm/errors.hpp"
#include "mctm_tools/csv_io.hpp"

namespace mctm::tools {

using nlohmann::json;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

json new_document(const std::string& command) {
  json doc;
  doc["schema"] = {
      {"name", kSchemaName},
      {"version", std::to_string(kSchemaMajor) + "." + std::to_string(kSchemaMinor)},
      {"fields",
       {{"command", "subcommand that produced the document"},
        {"config", "run configuration (see RunConfig)"},
        {"data", "input provenance: source, rows read, rows dropped"},
        {"fits", "fitted models: spec, packed theta_hat with names, vcov (null = unavailable), loglik, convergence"},
        {"dependence", "per fit: Lambda, Sigma, correlations and Spearman correlations with propagated intervals"},
        {"lr_test", "likelihood-ratio test of constant against covariate-dependent Lambda"},
        {"outputs", "plot-data CSV files written next to this document"}}}};
  doc["command"] = command;
  return doc;
}

void check_schema(const json& doc) {
  if (!doc.is_object() || !doc.contains("schema") || !doc["schema"].is_object()) {
    throw InputError("not a result document (missing schema section)");
  }
  const json& s = doc["schema"];
  if (s.value("name", "") != kSchemaName) {
    throw InputError("unexpected document schema '" + s.value("name", "") + "'");
  }
  const std::string version = s.value("version", "");
  const auto dot = version.find('.');
  int major = -1;
  try {
    major = std::stoi(version.substr(0, dot));
  } catch (const std::exception&) {
    throw InputError("malformed schema version '" + version + "'");
  }
  if (major != kSchemaMajor) {
    throw InputError("unsupported result schema major version " + std::to_string(major) + " (this build reads " +
                     std::to_string(kSchemaMajor) + ".x)");
  }
}

std::string render(const json& doc) { return doc.dump(2) + "\n"; }

void write_document(const std::filesystem::path& path, const json& doc) { write_file_atomic(path, render(doc)); }

json read_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open result document '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("result document '" + path.string() + "' is not valid JSON: " + e.what());
  }
  check_schema(doc);
  return doc;
}

json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

json to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(to_json(Eigen::VectorXd(m.row(r).transpose())));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw InputError("expected a numeric array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = number_from(j[i]);
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw InputError("expected an array of rows");
  if (j.empty()) return {};
  Eigen::MatrixXd m(j.size(), j[0].size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != static_cast<std::size_t>(m.cols())) throw InputError("ragged matrix in document");
    m.row(r) = vector_from_json(j[r]).transpose();
  }
  return m;
}

json to_json(const ModelSpec& spec) {
  return json{{"species", spec.species},
              {"bernstein_coefs", spec.bernstein_coefs},
              {"support_hi", spec.support_hi},
              {"harmonics", spec.design.harmonics()},
              {"years", spec.design.years()},
              {"lambda_mode", to_string(spec.lambda_mode)},
              {"link", to_string(spec.link)}};
}

ModelSpec spec_from_json(const json& j) {
  try {
    ModelSpec spec;
    spec.species = j.at("species").get<std::vector<std::string>>();
    spec.bernstein_coefs = j.at("bernstein_coefs").get<std::vector<int>>();
    spec.support_hi = j.at("support_hi").get<std::vector<double>>();
    spec.design = HarmonicDesign(j.at("harmonics").get<int>(), j.at("years").get<std::vector<int>>());
    spec.lambda_mode = lambda_mode_from_string(j.at("lambda_mode").get<std::string>());
    spec.link = link_from_string(j.at("link").get<std::string>());
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed model spec: ") + e.what());
  }
}

json to_json(const FitResult& fit) {
  const ParameterLayout layout(fit.spec);
  return json{{"spec", to_json(fit.spec)},
              {"likelihood", to_string(fit.kind)},
              {"n_obs", fit.n_obs},
              {"n_params", fit.n_params()},
              {"loglik", number(fit.loglik)},
              {"loglik_start", number(fit.loglik_start)},
              {"converged", fit.converged},
              {"gradient_norm", number(fit.gradient_norm)},
              {"iterations", fit.iterations},
              {"message", fit.message},
              {"floored_cells", fit.floored_cells},
              {"hessian_pd", fit.hessian_pd},
              {"parameter_names", layout.names(fit.spec)},
              {"theta_hat", to_json(fit.theta_hat)},
              {"vcov", to_json(fit.vcov)}};
}

FitResult fit_from_json(const json& j) {
  try {
    FitResult f;
    f.spec = spec_from_json(j.at("spec"));
    f.kind = likelihood_kind_from_string(j.at("likelihood").get<std::string>());
    f.n_obs = j.at("n_obs").get<std::size_t>();
    f.loglik = number_from(j.at("loglik"));
    f.loglik_start = number_from(j.at("loglik_start"));
    f.converged = j.at("converged").get<bool>();
    f.gradient_norm = number_from(j.at("gradient_norm"));
    f.iterations = j.at("iterations").get<int>();
    f.message = j.at("message").get<std::string>();
    f.floored_cells = j.at("floored_cells").get<std::size_t>();
    f.hessian_pd = j.at("hessian_pd").get<bool>();
    f.theta_hat = vector_from_json(j.at("theta_hat"));
    f.vcov = matrix_from_json(j.at("vcov"));
    const int n = ParameterLayout(f.spec).size();
    if (f.theta_hat.size() != n || f.vcov.rows() != n || f.vcov.cols() != n) {
      throw InputError("fit parameters do not match the stored model spec");
    }
    f.model();  // validates monotonicity
    return f;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed fit entry: ") + e.what());
  }
}

json to_json(const Provenance& p) {
  return json{{"source", p.source},
              {"rows_read", p.rows_read},
              {"dropped_missing", p.dropped_missing},
              {"dropped_leap_day", p.dropped_leap_day},
              {"rows_dropped", p.rows_dropped()}};
}

json to_json(const DependenceSummary& s, const ModelSpec& spec) {
  json pairs = json::array();
  for (const auto& p : s.pairs) {
    pairs.push_back({{"species", {spec.species.at(p.row), spec.species.at(p.col)}},
                     {"lambda", number(p.lambda)},
                     {"lambda_ci", {number(p.lambda_lo), number(p.lambda_hi)}},
                     {"corr", number(p.corr)},
                     {"corr_ci", {number(p.corr_lo), number(p.corr_hi)}},
                     {"spearman", number(p.spearman)},
                     {"spearman_ci", {number(p.spearman_lo), number(p.spearman_hi)}}});
  }
  json out{{"ci_level", s.ci_level},
           {"day", s.evaluated_at ? json(*s.evaluated_at) : json(nullptr)},
           {"lambda", to_json(s.lambda)},
           {"sigma", to_json(s.sigma)},
           {"corr", to_json(s.corr)},
           {"spearman", to_json(s.spearman)},
           {"pairs", pairs}};
  return out;
}

json to_json(const LrTestResult& lr) {
  json out{{"statistic", number(lr.statistic)}, {"df", lr.df}, {"p_value", number(lr.p_value)}};
  if (!lr.warning.empty()) out["warning"] = lr.warning;
  return out;
}

}  // namespace mctm::tools
