#include "mctm_tools/commands.hpp"

#include <filesystem>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "mctm/dependence.hpp"
#include "mctm/errors.hpp"
#include "mctm/simulate.hpp"
#include "mctm_tools/csv_io.hpp"
#include "mctm_tools/plot_data.hpp"
#include "mctm_tools/result_document.hpp"

namespace mctm::tools {

using nlohmann::json;
namespace fs = std::filesystem;

RunConfig resolve_config(const CommandLine& cl) {
  RunConfig cfg = cl.config.empty() ? RunConfig{} : load_run_config(cl.config);
  if (cl.likelihood) cfg.likelihood = *cl.likelihood;
  if (cl.lambda) cfg.lambda = *cl.lambda;
  if (cl.seed) cfg.seed = *cl.seed;
  if (cl.replicates) cfg.replicates = *cl.replicates;
  if (cl.samples) cfg.approx_samples = *cl.samples;
  if (cl.years) cfg.n_years = *cl.years;
  if (cl.missing_rate) cfg.missing_rate = *cl.missing_rate;
  validate(cfg);
  return cfg;
}

namespace {

FitOptions fit_options(const RunConfig& cfg) {
  FitOptions o;
  o.optimizer = cfg.optimizer;
  o.hessian_step = cfg.hessian_step;
  return o;
}

PropagationConfig propagation(const RunConfig& cfg) {
  PropagationConfig p;
  p.level = cfg.ci_level;
  p.draws = cfg.propagation_draws;
  p.seed = cfg.seed;
  return p;
}

LikelihoodKind kind_of(const RunConfig& cfg) {
  return cfg.likelihood == "continuous" ? LikelihoodKind::ContinuousApprox : LikelihoodKind::DiscreteApprox;
}

LambdaMode single_mode(const RunConfig& cfg, const std::string& command) {
  if (cfg.lambda == "both") throw InputError(command + " needs a single lambda mode (constant or covariate)");
  return lambda_mode_from_string(cfg.lambda);
}

ObservationTable load_table(const CommandLine& cl, const RunConfig& cfg) {
  if (cl.input.empty()) throw InputError(cl.command + " requires --input <csv>");
  return ingest_csv(cl.input, {cfg.species});
}

json data_json(const ObservationTable& t) {
  json d = to_json(t.provenance());
  d["rows_used"] = t.size();
  d["species"] = t.species();
  return d;
}

json base_document(const CommandLine& cl, const RunConfig& cfg) {
  json doc = new_document(cl.command);
  doc["config"] = to_json(cfg);
  return doc;
}

void write_output(const fs::path& dir, const std::string& name, const std::string& content, json& outputs) {
  write_file_atomic(dir / name, content);
  outputs.push_back(name);
}

/// Fits for the configured lambda mode(s). With "both", the covariate fit
/// starts from the embedded constant fit so the nested likelihoods compare.
std::vector<FitResult> fit_models(const ObservationTable& table, const RunConfig& cfg) {
  const FitOptions opts = fit_options(cfg);
  const LikelihoodKind kind = kind_of(cfg);
  std::vector<FitResult> fits;
  if (cfg.lambda == "both") {
    const ModelSpec cspec = make_spec(table, cfg.bernstein_coefs, cfg.harmonics, LambdaMode::Constant);
    fits.push_back(fit(table, cspec, kind, opts));
    FitOptions o2 = opts;
    o2.start = embed_constant_lambda(cspec, fits[0].theta_hat);
    fits.push_back(fit(table, cspec.with_lambda_mode(LambdaMode::CovariateDependent), kind, o2));
  } else {
    const ModelSpec spec = make_spec(table, cfg.bernstein_coefs, cfg.harmonics, lambda_mode_from_string(cfg.lambda));
    fits.push_back(fit(table, spec, kind, opts));
  }
  return fits;
}

const FitResult& pick_fit(const std::vector<FitResult>& fits, const CommandLine& cl) {
  if (fits.empty()) throw InputError("result document holds no fits");
  if (!cl.lambda) return fits.back();
  const LambdaMode mode = lambda_mode_from_string(*cl.lambda);
  for (const auto& f : fits) {
    if (f.spec.lambda_mode == mode) return f;
  }
  throw InputError("result document has no " + *cl.lambda + " fit");
}

std::vector<FitResult> load_fits(const fs::path& path) {
  const json doc = read_document(path);
  if (!doc.contains("fits") || !doc["fits"].is_array()) {
    throw InputError("result document '" + path.string() + "' has no fits section");
  }
  std::vector<FitResult> fits;
  for (const auto& f : doc["fits"]) fits.push_back(fit_from_json(f));
  return fits;
}

std::optional<double> summary_day(const FitResult& f) {
  return f.spec.lambda_mode == LambdaMode::CovariateDependent ? std::optional<double>(1.0) : std::nullopt;
}

void warn_unconverged(const FitResult& f, std::ostream& err) {
  if (!f.converged) {
    err << "warning: " << to_string(f.spec.lambda_mode) << " fit did not converge (gradient max-norm "
        << f.gradient_norm << "; " << f.message << ")\n";
  }
  if (!f.hessian_pd) err << "warning: Hessian of the " << to_string(f.spec.lambda_mode) << " fit is not positive definite\n";
}

int cmd_fit(const CommandLine& cl, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const ObservationTable table = load_table(cl, cfg);
  const std::vector<FitResult> fits = fit_models(table, cfg);
  json doc = base_document(cl, cfg);
  doc["data"] = data_json(table);
  json outputs = json::array();
  json fits_json = json::array(), dep_json = json::array();
  std::vector<LabelledTrajectory> trajectories;
  const std::vector<double> days = trajectory_days(cfg);
  std::vector<double> all_days;
  for (int d = 1; d <= kDaysPerYear; ++d) all_days.push_back(d);
  const int plot_year = cfg.plot_year != 0 ? cfg.plot_year : table.years().front();

  for (const auto& f : fits) {
    warn_unconverged(f, err);
    const std::string mode = to_string(f.spec.lambda_mode);
    fits_json.push_back(to_json(f));
    const DependenceSummary s = summarize_dependence(f, summary_day(f), propagation(cfg));
    json d = to_json(s, f.spec);
    d["lambda_mode"] = mode;
    dep_json.push_back(d);
    for (int p = 0; p < f.spec.n_pairs(); ++p) {
      const auto sp = pair_at(p);
      trajectories.push_back({mode, f.spec.species[sp.row], f.spec.species[sp.col],
                              trajectory(f, sp, days, propagation(cfg))});
    }
    write_output(cl.out_dir, "marginal_quantiles_" + mode + ".csv",
                 marginal_quantiles_csv(f.model(), plot_year, all_days, cfg.quantile_levels), outputs);
    out << mode << " fit: loglik " << f.loglik << ", " << f.n_params() << " parameters, "
        << (f.converged ? "converged" : "NOT converged") << "\n";
    for (const auto& p : s.pairs) {
      out << "  " << f.spec.species[p.row] << " ~ " << f.spec.species[p.col] << ": lambda " << p.lambda
          << ", spearman " << p.spearman << " [" << p.spearman_lo << ", " << p.spearman_hi << "]"
          << (s.evaluated_at ? " at day 1" : "") << "\n";
    }
  }
  doc["fits"] = fits_json;
  doc["dependence"] = dep_json;
  if (fits.size() == 2) {
    const LrTestResult lr = lr_test(fits[0], fits[1]);
    doc["lr_test"] = to_json(lr);
    out << "LR test constant vs covariate lambda: statistic " << lr.statistic << ", df " << lr.df << ", p "
        << lr.p_value << "\n";
    if (!lr.warning.empty()) err << "warning: " << lr.warning << "\n";
  }
  write_output(cl.out_dir, "trajectories.csv", trajectories_csv(trajectories), outputs);
  doc["outputs"] = outputs;
  write_document(cl.out_dir / "result.json", doc);
  return 0;
}

int cmd_predict(const CommandLine& cl, const RunConfig& cfg, std::ostream& out, std::ostream&) {
  if (cl.model.empty()) throw InputError("predict requires --model <result.json>");
  const std::vector<FitResult> fits = load_fits(cl.model);
  const FitResult& f = pick_fit(fits, cl);
  const JointModel m = f.model();
  std::vector<Covariates> rows;
  if (!cl.input.empty()) {
    rows = read_covariates(cl.input);
  } else {
    for (int y : f.spec.design.years()) {
      for (int d = 1; d <= kDaysPerYear; ++d) rows.push_back({y, static_cast<double>(d)});
    }
  }
  std::ostringstream pred, dep;
  pred << "year,day,species,prob_zero";
  for (double p : cfg.quantile_levels) pred << ",q" << format_double(p);
  pred << '\n';
  dep << "year,day,species_a,species_b,spearman\n";
  const bool covariate = f.spec.lambda_mode == LambdaMode::CovariateDependent;
  for (const auto& x : rows) {
    for (int j = 0; j < m.n_species(); ++j) {
      pred << x.year << ',' << format_double(x.day) << ',' << f.spec.species[j] << ','
           << format_double(m.marginal_pmf(j, 0, x));
      for (double p : cfg.quantile_levels) pred << ',' << m.marginal_quantile(j, p, x);
      pred << '\n';
    }
    const Eigen::MatrixXd s = spearman_from_corr(
        corr_from_sigma(sigma_from_lambda(m.lambda_matrix(covariate ? std::optional<double>(x.day) : std::nullopt))));
    for (int p = 0; p < f.spec.n_pairs(); ++p) {
      const auto sp = pair_at(p);
      dep << x.year << ',' << format_double(x.day) << ',' << f.spec.species[sp.row] << ','
          << f.spec.species[sp.col] << ',' << format_double(s(sp.row, sp.col)) << '\n';
    }
  }
  json doc = base_document(cl, cfg);
  doc["model"] = {{"source", cl.model.string()}, {"lambda_mode", to_string(f.spec.lambda_mode)}};
  doc["rows"] = rows.size();
  json outputs = json::array();
  write_output(cl.out_dir, "predictions.csv", pred.str(), outputs);
  write_output(cl.out_dir, "predicted_spearman.csv", dep.str(), outputs);
  doc["outputs"] = outputs;
  write_document(cl.out_dir / "predict.json", doc);
  out << "predicted " << rows.size() << " covariate rows\n";
  return 0;
}

int cmd_bootstrap(const CommandLine& cl, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const ObservationTable table = load_table(cl, cfg);
  FitResult f;
  if (!cl.model.empty()) {
    const std::vector<FitResult> fits = load_fits(cl.model);
    f = pick_fit(fits, cl);
    if (f.n_obs != table.size()) throw InputError("--model was fitted on a table of a different size than --input");
  } else {
    single_mode(cfg, "bootstrap");
    f = fit_models(table, cfg).front();
  }
  warn_unconverged(f, err);

  SimulationConfig sim;
  sim.n_replicates = cfg.replicates;
  sim.seed = cfg.seed;
  sim.covariate_schedule = table.covariates();
  BootstrapOptions bo;
  bo.fit = fit_options(cfg);
  bo.propagation = propagation(cfg);
  bo.trajectory_days = trajectory_days(cfg);
  const BootstrapReport report = parametric_bootstrap(f, sim, bo);

  json doc = base_document(cl, cfg);
  doc["data"] = data_json(table);
  doc["fits"] = json::array({to_json(f)});
  json pairs = json::array();
  for (const auto& q : report.pairs) {
    pairs.push_back({{"species", {f.spec.species[q.row], f.spec.species[q.col]}},
                     {"truth", q.truth},
                     {"mean", q.mean},
                     {"quantiles", {{"0.025", q.q025}, {"0.25", q.q25}, {"0.5", q.median}, {"0.75", q.q75},
                                    {"0.975", q.q975}}},
                     {"interval_coverage", q.coverage}});
  }
  std::size_t truncations = 0, unconverged = 0;
  json failures = json::array();
  for (const auto& r : report.replicates) {
    truncations += r.truncations;
    if (r.ok && !r.converged) ++unconverged;
    if (!r.ok) failures.push_back({{"replicate", r.index}, {"error", r.error}});
  }
  doc["bootstrap"] = {{"replicates", cfg.replicates},
                      {"failed", report.failures},
                      {"unconverged", unconverged},
                      {"truncated_draws", truncations},
                      {"summary_day", f.spec.lambda_mode == LambdaMode::CovariateDependent
                                          ? json(report.trajectory_days.front())
                                          : json(nullptr)},
                      {"pairs", pairs},
                      {"failures", failures}};
  json outputs = json::array();
  write_output(cl.out_dir, "bootstrap_spearman.csv", bootstrap_spearman_csv(report, f.spec), outputs);
  if (f.spec.lambda_mode == LambdaMode::CovariateDependent) {
    write_output(cl.out_dir, "bootstrap_trajectories.csv", bootstrap_trajectories_csv(report, f.spec), outputs);
  }
  doc["outputs"] = outputs;
  write_document(cl.out_dir / "bootstrap.json", doc);
  out << "bootstrap: " << cfg.replicates << " replicates, " << report.failures << " failed\n";
  for (const auto& q : report.pairs) {
    out << "  " << f.spec.species[q.row] << " ~ " << f.spec.species[q.col] << ": fitted " << q.truth << ", median "
        << q.median << " [" << q.q025 << ", " << q.q975 << "]\n";
  }
  return 0;
}

int cmd_compare_approx(const CommandLine& cl, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const ObservationTable table = load_table(cl, cfg);
  const ModelSpec spec = make_spec(table, cfg.bernstein_coefs, cfg.harmonics, single_mode(cfg, "compare-approx"));
  const FitResult fc = fit(table, spec, LikelihoodKind::ContinuousApprox, fit_options(cfg));
  const FitResult fd = fit(table, spec, LikelihoodKind::DiscreteApprox, fit_options(cfg));
  warn_unconverged(fc, err);
  warn_unconverged(fd, err);
  const ApproxComparison cmp = compare_approximations(fc, fd, table.covariates(), cfg.approx_samples, cfg.seed);

  json doc = base_document(cl, cfg);
  doc["data"] = data_json(table);
  doc["fits"] = json::array({to_json(fc), to_json(fd)});
  std::size_t failed = 0;
  for (const auto& r : cmp.rows) failed += r.ok ? 0 : 1;
  doc["comparison"] = {{"samples_per_kind", cfg.approx_samples},
                       {"failed_rows", failed},
                       {"rank_statistic", cmp.rank_statistic},
                       {"p_value_discrete_closer", cmp.p_value}};
  json outputs = json::array();
  write_output(cl.out_dir, "approx_scatter.csv", approx_scatter_csv(cmp), outputs);
  doc["outputs"] = outputs;
  write_document(cl.out_dir / "compare_approx.json", doc);
  out << "compare-approx: " << cmp.rows.size() << " rows, one-sided rank test p = " << cmp.p_value << "\n";
  return 0;
}

int cmd_permute_check(const CommandLine& cl, const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const ObservationTable table = load_table(cl, cfg);
  const ModelSpec spec = make_spec(table, cfg.bernstein_coefs, cfg.harmonics, single_mode(cfg, "permute-check"));
  PermutationOptions po;
  po.threshold = cfg.permutation_threshold;
  po.days = trajectory_days(cfg);
  const PermutationReport report = permutation_sensitivity(table, spec, kind_of(cfg), fit_options(cfg), po);

  json doc = base_document(cl, cfg);
  doc["data"] = data_json(table);
  json fits = json::array();
  for (const auto& f : report.fits) {
    std::vector<std::string> order;
    for (int k : f.order) order.push_back(table.species()[k]);
    json e{{"order", order}, {"ok", f.ok}, {"converged", f.converged}};
    if (f.ok) e["loglik"] = f.loglik;
    if (!f.ok) e["error"] = f.error;
    fits.push_back(e);
  }
  doc["permutation"] = {{"orderings", fits},
                        {"max_spearman_discrepancy", report.max_discrepancy},
                        {"threshold", report.threshold},
                        {"order_sensitive", report.order_sensitive},
                        {"best_ordering", report.best}};
  json outputs = json::array();
  write_output(cl.out_dir, "permutation_spearman.csv", permutation_csv(report, table.species()), outputs);
  doc["outputs"] = outputs;
  write_document(cl.out_dir / "permutation.json", doc);
  out << "permute-check: " << report.fits.size() << " orderings, max Spearman discrepancy " << report.max_discrepancy
      << (report.order_sensitive ? " (ORDER SENSITIVE)" : "") << "\n";
  return 0;
}

int cmd_simulate(const CommandLine& cl, const RunConfig& cfg, std::ostream& out, std::ostream&) {
  json doc = base_document(cl, cfg);
  std::ostringstream csv;
  std::size_t truncations = 0, rows = 0, incomplete = 0;
  if (!cl.model.empty()) {
    const std::vector<FitResult> fits = load_fits(cl.model);
    const FitResult& f = pick_fit(fits, cl);
    std::vector<Covariates> schedule;
    if (!cl.input.empty()) {
      schedule = read_covariates(cl.input);
    } else {
      for (int y : f.spec.design.years()) {
        for (int d = 1; d <= kDaysPerYear; ++d) schedule.push_back({y, static_cast<double>(d)});
      }
    }
    const ObservationTable t = simulate_table(f.model(), schedule, cfg.seed, 0, &truncations);
    write_csv(csv, t);
    rows = t.size();
    doc["source"] = {{"model", cl.model.string()}, {"lambda_mode", to_string(f.spec.lambda_mode)}};
  } else {
    const auto raw = synth_birds_raw(cfg.seed, cfg.n_years, cfg.missing_rate, &truncations);
    write_csv(csv, kSynthSpecies, raw);
    rows = raw.size();
    for (const auto& r : raw) {
      for (const auto& c : r.counts) {
        if (!c) {
          ++incomplete;
          break;
        }
      }
    }
    doc["source"] = {{"generator", "synth_birds"}, {"n_years", cfg.n_years}, {"missing_rate", cfg.missing_rate}};
  }
  doc["simulation"] = {{"rows", rows}, {"rows_with_missing", incomplete}, {"truncated_draws", truncations}};
  json outputs = json::array();
  write_output(cl.out_dir, "simulated.csv", csv.str(), outputs);
  doc["outputs"] = outputs;
  write_document(cl.out_dir / "simulate.json", doc);
  out << "simulated " << rows << " rows (" << incomplete << " with a missing cell, " << truncations
      << " truncated draws)\n";
  return 0;
}

}  // namespace

int run_command(const CommandLine& cl, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = resolve_config(cl);
    std::error_code ec;
    fs::create_directories(cl.out_dir, ec);
    if (ec) throw InputError("cannot create output directory '" + cl.out_dir.string() + "': " + ec.message());
    if (cl.command == "fit") return cmd_fit(cl, cfg, out, err);
    if (cl.command == "predict") return cmd_predict(cl, cfg, out, err);
    if (cl.command == "bootstrap") return cmd_bootstrap(cl, cfg, out, err);
    if (cl.command == "compare-approx") return cmd_compare_approx(cl, cfg, out, err);
    if (cl.command == "permute-check") return cmd_permute_check(cl, cfg, out, err);
    if (cl.command == "simulate") return cmd_simulate(cl, cfg, out, err);
    throw InputError("unknown command '" + cl.command + "'");
  } catch (const std::exception& e) {
    err << "mctm " << cl.command << ": error: " << e.what() << "\n";
    return 1;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-species count transformation models"};
  app.require_subcommand(1);
  CommandLine cl;
  std::string input, config, out_dir = ".", model;
  std::string likelihood, lambda;
  std::uint64_t seed = 0;
  int replicates = 0, samples = 0, years = 0;
  double missing_rate = 0.0;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"fit", "Fit the joint model (and the LR test with --lambda both)"},
      {"predict", "Marginal quantiles and Spearman correlations from a fitted model"},
      {"bootstrap", "Parametric bootstrap of the dependence estimates"},
      {"compare-approx", "Approximate vs exact log-likelihood on bootstrap samples"},
      {"permute-check", "Refit under every species ordering and compare Spearman correlations"},
      {"simulate", "Simulate counts from a fitted model or the synthetic bird generator"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--input", input, "Input CSV (date or year/day columns plus species counts)");
    sub->add_option("--config", config, "Run configuration (JSON)");
    sub->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
    sub->add_option("--model", model, "Result document of an earlier fit");
    sub->add_option("--likelihood", likelihood, "Approximate likelihood")
        ->check(CLI::IsMember({"continuous", "discrete"}));
    sub->add_option("--lambda", lambda, "Dependence structure")->check(CLI::IsMember({"constant", "covariate", "both"}));
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--replicates", replicates, "Bootstrap replicates")->check(CLI::PositiveNumber);
    sub->add_option("--samples", samples, "Samples per approximation (compare-approx)")->check(CLI::PositiveNumber);
    sub->add_option("--years", years, "Years of synthetic data (simulate)")->check(CLI::PositiveNumber);
    sub->add_option("--missing-rate", missing_rate, "Share of synthetic rows with a missing cell")
        ->check(CLI::Range(0.0, 1.0));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, r;
    const int code = app.exit(e, o, r);
    out << o.str();
    err << r.str();
    return code == 0 ? 0 : 2;
  }
  for (const CLI::App* sub : app.get_subcommands()) cl.command = sub->get_name();
  const CLI::App* sub = app.get_subcommand(cl.command);
  cl.input = input;
  cl.config = config;
  cl.out_dir = out_dir;
  cl.model = model;
  if (sub->count("--likelihood")) cl.likelihood = likelihood;
  if (sub->count("--lambda")) cl.lambda = lambda;
  if (sub->count("--seed")) cl.seed = seed;
  if (sub->count("--replicates")) cl.replicates = replicates;
  if (sub->count("--samples")) cl.samples = samples;
  if (sub->count("--years")) cl.years = years;
  if (sub->count("--missing-rate")) cl.missing_rate = missing_rate;
  return run_command(cl, out, err);
}

}  // namespace mctm::tools
