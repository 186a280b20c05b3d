#include "mctm_tools/plot_data.hpp"

#include <cmath>
#include <sstream>

#include "mctm_tools/csv_io.hpp"

namespace mctm::tools {

std::string marginal_quantiles_csv(const JointModel& model, int year, const std::vector<double>& days,
                                   const std::vector<double>& levels) {
  std::ostringstream out;
  out << "species,year,day,level,count,log_count_plus_one\n";
  for (int j = 0; j < model.n_species(); ++j) {
    for (double day : days) {
      const Covariates x{year, day};
      for (double p : levels) {
        const int q = model.marginal_quantile(j, p, x);
        out << model.spec().species[j] << ',' << year << ',' << format_double(day) << ',' << format_double(p)
            << ',' << q << ',' << format_double(std::log1p(static_cast<double>(q))) << '\n';
      }
    }
  }
  return out.str();
}

std::string trajectories_csv(const std::vector<LabelledTrajectory>& trajectories) {
  std::ostringstream out;
  out << "model,species_a,species_b,day,spearman,lower,upper\n";
  for (const auto& t : trajectories) {
    for (const auto& p : t.points) {
      out << t.model << ',' << t.species_a << ',' << t.species_b << ',' << format_double(p.day) << ','
          << format_double(p.spearman) << ',' << format_double(p.lo) << ',' << format_double(p.hi) << '\n';
    }
  }
  return out.str();
}

std::string bootstrap_spearman_csv(const BootstrapReport& report, const ModelSpec& spec) {
  std::ostringstream out;
  out << "replicate,species_a,species_b,spearman,lower,upper,truth,ok,converged\n";
  for (const auto& rep : report.replicates) {
    for (int p = 0; p < spec.n_pairs(); ++p) {
      const auto sp = pair_at(p);
      out << rep.index << ',' << spec.species[sp.row] << ',' << spec.species[sp.col] << ',';
      if (rep.ok) {
        out << format_double(rep.spearman(p)) << ',' << format_double(rep.spearman_lo(p)) << ','
            << format_double(rep.spearman_hi(p));
      } else {
        out << "NA,NA,NA";
      }
      out << ',' << format_double(report.pairs[p].truth) << ',' << (rep.ok ? 1 : 0) << ',' << (rep.converged ? 1 : 0)
          << '\n';
    }
  }
  return out.str();
}

std::string bootstrap_trajectories_csv(const BootstrapReport& report, const ModelSpec& spec) {
  std::ostringstream out;
  out << "replicate,species_a,species_b,day,spearman\n";
  const auto& days = report.trajectory_days;
  auto emit = [&](const std::string& label, const Eigen::MatrixXd& m) {
    for (int p = 0; p < spec.n_pairs(); ++p) {
      const auto sp = pair_at(p);
      for (std::size_t d = 0; d < days.size(); ++d) {
        out << label << ',' << spec.species[sp.row] << ',' << spec.species[sp.col] << ',' << format_double(days[d])
            << ',' << format_double(m(p, static_cast<Eigen::Index>(d))) << '\n';
      }
    }
  };
  emit("truth", report.truth_trajectories);
  for (const auto& rep : report.replicates) {
    if (rep.ok) emit(std::to_string(rep.index), rep.trajectories);
  }
  return out.str();
}

std::string approx_scatter_csv(const ApproxComparison& comparison) {
  std::ostringstream out;
  out << "sample,likelihood,approx_loglik,exact_loglik,ok,error\n";
  for (const auto& r : comparison.rows) {
    std::string error = r.error;
    for (char& c : error) {
      if (c == ',' || c == '\n' || c == '"') c = ' ';
    }
    out << r.sample << ',' << to_string(r.kind) << ',' << format_double(r.approx_loglik) << ','
        << format_double(r.exact_loglik) << ',' << (r.ok ? 1 : 0) << ',' << error << '\n';
  }
  return out.str();
}

std::string permutation_csv(const PermutationReport& report, const std::vector<std::string>& species) {
  std::ostringstream out;
  out << "ordering,day,species_a,species_b,spearman\n";
  for (const auto& f : report.fits) {
    if (!f.ok) continue;
    std::string order;
    for (std::size_t k = 0; k < f.order.size(); ++k) order += (k ? "|" : "") + species[f.order[k]];
    for (std::size_t d = 0; d < f.spearman.size(); ++d) {
      const std::string day = report.days.empty() ? std::string("NA") : format_double(report.days[d]);
      const Eigen::MatrixXd& m = f.spearman[d];
      for (Eigen::Index r = 1; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < r; ++c) {
          out << order << ',' << day << ',' << species[r] << ',' << species[c] << ',' << format_double(m(r, c))
              << '\n';
        }
      }
    }
  }
  return out.str();
}

}  // namespace mctm::tools
