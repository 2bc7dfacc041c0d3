#pragma once

// Command-line front end: `run`, `sweep` and `spec` subcommands.
// Exit codes: 0 success, 1 configuration error, 2 numerical error.

#include "h2sls/harness.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace h2sls {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumerical = 2;

inline int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::NonFinite:
    case ErrorKind::SingularGram:
    case ErrorKind::SingularBlock:
    case ErrorKind::EmptySupport:
      return kExitNumerical;
    default:
      return kExitConfig;
  }
}

namespace detail {

struct TuningFlags {
  std::optional<double> stage1_factor, stage2_factor, lambda1, lambda2, tol;
  std::optional<int> max_iters;
  bool no_standardize = false;

  void add_to(CLI::App* app) {
    app->add_option("--stage1-factor", stage1_factor, "first-stage penalty factor (default per design)");
    app->add_option("--stage2-factor", stage2_factor, "second-stage penalty factor (default per design)");
    app->add_option("--lambda1", lambda1, "fixed first-stage penalty, overrides the rule");
    app->add_option("--lambda2", lambda2, "fixed second-stage penalty, overrides the rule");
    app->add_option("--tol", tol, "coordinate descent tolerance");
    app->add_option("--max-iters", max_iters, "coordinate descent sweep limit");
    app->add_flag("--no-standardize", no_standardize, "penalise raw coefficients instead of unit-RMS columns");
  }

  TuningRule apply(const ExperimentDesign& d) const {
    TuningRule t = default_tuning(d);
    if (stage1_factor) t.stage1_factor = *stage1_factor;
    if (stage2_factor) t.stage2_factor = *stage2_factor;
    t.override_lambda1 = lambda1;
    t.override_lambda2 = lambda2;
    if (tol) t.tol = *tol;
    if (max_iters) t.max_iters = *max_iters;
    t.standardize = !no_standardize;
    return t;
  }
};

/// Expands `--config <path>` into flags. The file holds `key = value` lines
/// using the long flag names; TOML-style quotes, `[section]` headers and `#`
/// comments are accepted. Flags given on the command line win.
inline std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) {
      path = args[k + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(k), args.begin() + static_cast<std::ptrdiff_t>(k) + 2);
      break;
    }
    if (args[k].rfind("--config=", 0) == 0) {
      path = args[k].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(k));
      break;
    }
  }
  if (path.empty()) return args;

  std::istringstream in(read_text(path));
  std::vector<std::string> injected;
  for (std::string line; std::getline(in, line);) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::InvalidArgument, "config line without '=': " + line);
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
      value = value.substr(1, value.size() - 2);
    const std::string flag = "--" + key;
    bool given = false;
    for (const auto& a : args) given = given || a == flag || a.rfind(flag + "=", 0) == 0;
    if (given) continue;
    if (value == "true") {
      injected.push_back(flag);
    } else if (value != "false") {
      injected.push_back(flag);
      injected.push_back(value);
    }
  }
  // Insert right after the subcommand name so the flags bind to it.
  const auto at = args.size() > 1 ? args.begin() + 2 : args.end();
  args.insert(at, injected.begin(), injected.end());
  return args;
}

inline int parse_experiment_id(const std::string& s) {
  int id = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
  if (ec != std::errc() || ptr != s.data() + s.size() || id < 1 || id > kNumExperiments)
    throw Error(ErrorKind::UnknownExperiment,
                "unknown experiment '" + s + "'; valid ids are 1.." + std::to_string(kNumExperiments) + " or custom");
  return id;
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"High-dimensional two-stage Lasso: estimators, diagnostics and Monte Carlo experiments", "h2sls"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // run
  CLI::App* run = app.add_subcommand("run", "run one experiment and write a report");
  std::string config_note;
  run->add_option("--config", config_note, "file of `key = value` lines using the flag names");
  std::string run_exp = "1";
  std::string model_path;
  std::string stage1_name, stage2_name;
  Index run_n = 47;
  int run_reps = 1000;
  std::uint64_t run_seed = 0;
  double run_rho = kDefaultRho;
  std::string run_out;
  std::string run_format = "csv";
  int run_threads = 1;
  bool run_diag = false;
  int diag_rep = 1;
  detail::TuningFlags run_tuning;
  run->add_option("--experiment", run_exp, "design id 1..14, or custom (needs --model)");
  run->add_option("--model", model_path, "ModelSpec file (key = value lines) for --experiment custom");
  run->add_option("--stage1", stage1_name, "custom first stage: lasso|ols|oracle_ols|none");
  run->add_option("--stage2", stage2_name, "custom second stage: lasso|ols|oracle_ols");
  run->add_option("--n", run_n, "sample size")->check(CLI::PositiveNumber);
  run->add_option("--reps", run_reps, "replications")->check(CLI::PositiveNumber);
  run->add_option("--seed", run_seed, "master seed");
  run->add_option("--rho", run_rho, "error correlation for preset designs (needs p*rho^2 < 1)");
  run->add_option("--out", run_out, "report path")->required();
  run->add_option("--format", run_format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--threads", run_threads, "worker threads")->envname("HD2SLS_THREADS")->check(CLI::PositiveNumber);
  run->add_flag("--diagnostics", run_diag, "attach RE/MI/PDW/bound diagnostics for one replication");
  run->add_option("--diagnostics-rep", diag_rep, "replication used for diagnostics (one-based)");
  run_tuning.add_to(run);

  // sweep
  CLI::App* sweep = app.add_subcommand("sweep", "run several designs and print a comparison table");
  sweep->add_option("--config", config_note, "file of `key = value` lines using the flag names");
  std::vector<int> sweep_ids;
  Index sweep_n = 47;
  int sweep_reps = 1000;
  std::uint64_t sweep_seed = 0;
  double sweep_rho = kDefaultRho;
  int sweep_threads = 1;
  std::string sweep_out, sweep_aggregate;
  sweep->add_option("--experiments", sweep_ids, "comma-separated design ids")->delimiter(',')->required();
  sweep->add_option("--n", sweep_n, "sample size")->check(CLI::PositiveNumber);
  sweep->add_option("--reps", sweep_reps, "replications per design")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", sweep_seed, "master seed");
  sweep->add_option("--rho", sweep_rho, "error correlation");
  sweep->add_option("--threads", sweep_threads, "worker threads")->envname("HD2SLS_THREADS")->check(CLI::PositiveNumber);
  sweep->add_option("--out", sweep_out, "comparison table path (default: stdout)");
  sweep->add_option("--aggregate-out", sweep_aggregate, "aggregate CSV with one row per design");

  // spec
  CLI::App* spec = app.add_subcommand("spec", "print the resolved model of a design");
  std::string spec_exp;
  double spec_rho = kDefaultRho;
  bool spec_full = false;
  spec->add_option("--experiment", spec_exp, "design id 1..14")->required();
  spec->add_option("--rho", spec_rho, "error correlation");
  spec->add_flag("--full", spec_full, "also print beta* and pi* as a ModelSpec file");

  std::vector<std::string> args(argv, argv + argc);
  try {
    args = detail::expand_config(std::move(args));
  } catch (const Error& e) {
    err << "h2sls: " << e.what() << '\n';
    return kExitConfig;
  }
  std::vector<const char*> cargs;
  for (const auto& a : args) cargs.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*spec) {
      const ExperimentDesign d = experiment_spec(detail::parse_experiment_id(spec_exp), spec_rho);
      out << describe_design(d);
      if (spec_full) out << to_config_string(d.spec);
      return kExitOk;
    }

    if (*run) {
      ExperimentConfig cfg;
      if (run_exp == "custom") {
        if (model_path.empty()) throw Error(ErrorKind::InvalidArgument, "--experiment custom needs --model");
        ExperimentDesign d;
        d.spec = parse_model_spec(read_text(model_path));
        if (stage1_name == "none")
          d.stage1.reset();
        else
          d.stage1 = stage1_name.empty() ? StageMethod::Lasso : parse_stage_method(stage1_name);
        d.stage2 = stage2_name.empty() ? StageMethod::Lasso : parse_stage_method(stage2_name);
        cfg.custom = d;
      } else {
        cfg.experiment_id = detail::parse_experiment_id(run_exp);
        if (!model_path.empty() || !stage1_name.empty() || !stage2_name.empty())
          throw Error(ErrorKind::InvalidArgument, "--model/--stage1/--stage2 apply only to --experiment custom");
      }
      cfg.n = run_n;
      cfg.replications = run_reps;
      cfg.master_seed = run_seed;
      cfg.rho = run_rho;
      cfg.parallelism = run_threads;
      cfg.diagnostics = run_diag;
      cfg.diagnostics_rep = diag_rep;
      cfg.tuning = run_tuning.apply(cfg.design());
      cfg.validate();

      const ExperimentReport report = run_experiment(cfg);
      emit_report(report, parse_report_format(run_format), run_out);
      const AggregateMetrics& a = report.stage2_aggregate;
      out << "experiment " << report.experiment << " n=" << report.n << " reps=" << report.replications
          << " mean_l2=" << fmt6(a.mean_l2) << " smse=" << fmt6(a.smse) << " select_pct=" << fmt6(a.mean_select_pct);
      if (report.stage1_aggregate) out << " stage1_l2=" << fmt6(report.stage1_aggregate->mean_l2);
      out << " converged=" << a.converged_count << '/' << a.count << '\n';
      if (report.diagnostics) {
        const DiagnosticsReport& d = *report.diagnostics;
        out << "diagnostics re=" << fmt6(d.re_estimate) << " mi=" << fmt6(d.mi_quantity)
            << " mi_population=" << fmt6(d.mi_population) << " pdw=" << (d.pdw_success ? "ok" : "fail")
            << " mu_max=" << fmt6(d.pdw_mu_max) << " phi1=" << fmt6(d.phi1) << " phi2=" << fmt6(d.phi2)
            << " b1=" << fmt6(d.b1) << " beta_min_margin=" << fmt6(d.beta_min_margin) << '\n';
      }
      return kExitOk;
    }

    if (*sweep) {
      for (int id : sweep_ids) detail::parse_experiment_id(std::to_string(id));
      const auto reports = run_sensitivity(sweep_ids, sweep_n, sweep_reps, sweep_seed, sweep_rho, sweep_threads);
      const std::string table = sensitivity_table(reports);
      if (sweep_out.empty())
        out << table;
      else
        write_text(sweep_out, table);
      if (!sweep_aggregate.empty()) write_text(sweep_aggregate, aggregate_csv(reports));
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "h2sls: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "h2sls: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace h2sls
