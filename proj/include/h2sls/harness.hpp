#pragma once

// Monte Carlo driver: seeded replications of a design, aggregation, and
// CSV/JSON reports.

#include "h2sls/common.hpp"
#include "h2sls/datagen.hpp"
#include "h2sls/diagnostics.hpp"
#include "h2sls/estimators.hpp"
#include "h2sls/rng.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace h2sls {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
  /// Preset design 1..14; ignored when `custom` is set.
  int experiment_id = 1;
  std::optional<ExperimentDesign> custom;
  Index n = 47;
  int replications = 1000;
  std::uint64_t master_seed = 0;
  double rho = kDefaultRho;
  /// Defaults to the design's own factors when empty.
  std::optional<TuningRule> tuning;
  int parallelism = 1;
  bool diagnostics = false;
  int diagnostics_rep = 1;  // one-based

  ExperimentDesign design() const { return custom ? *custom : experiment_spec(experiment_id, rho); }

  TuningRule resolved_tuning(const ExperimentDesign& d) const { return tuning ? *tuning : default_tuning(d); }

  std::string label() const { return custom ? "custom" : std::to_string(experiment_id); }

  void validate() const {
    if (replications < 1) throw Error(ErrorKind::InvalidArgument, "replications must be >= 1");
    if (parallelism < 1) throw Error(ErrorKind::InvalidArgument, "parallelism must be >= 1");
    if (n < 2) throw Error(ErrorKind::InvalidArgument, "n must be >= 2");
    if (diagnostics && (diagnostics_rep < 1 || diagnostics_rep > replications))
      throw Error(ErrorKind::InvalidArgument, "diagnostics replication must be within 1..replications");
    const ExperimentDesign d = design();
    d.spec.validate();
    if (d.stage1 == StageMethod::Ols && d.spec.d > n)
      throw Error(ErrorKind::InvalidArgument, "an OLS first stage needs n >= d (d = " + std::to_string(d.spec.d) +
                                                  ", n = " + std::to_string(n) + ")");
    if (!d.one_step() && d.stage2 == StageMethod::Ols && d.spec.p > n)
      throw Error(ErrorKind::InvalidArgument, "an OLS second stage needs n >= p (p = " + std::to_string(d.spec.p) +
                                                  ", n = " + std::to_string(n) + ")");
  }
};

struct ExperimentReport {
  // config echo
  std::string experiment;  // id or "custom"
  Index n = 0;
  int replications = 0;
  std::uint64_t master_seed = 0;
  double rho = 0.0;
  int parallelism = 1;
  std::string stage1;  // "none" for the one-step Lasso
  std::string stage2;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  TuningRule tuning;
  std::string rng;
  std::string version;

  std::vector<ReplicationMetrics> records;
  std::vector<Vector> beta_hats;
  AggregateMetrics stage2_aggregate;
  std::optional<Stage1Aggregate> stage1_aggregate;

  double wall_seconds = 0.0;
  double stage1_seconds = 0.0;  // summed over replications
  double stage2_seconds = 0.0;
  std::optional<DiagnosticsReport> diagnostics;
};

/// Seed of the diagnostics' own random draws, separate from data streams.
inline SeedPolicy diagnostics_seed(std::uint64_t master, int rep) {
  return {splitmix64(master ^ 0xd1a6'0057'1c5e'edULL), static_cast<std::uint64_t>(rep)};
}

/// Replication `rep` (one-based) uses the stream (master_seed, rep).
inline Dataset replication_data(const ExperimentDesign& design, Index n, std::uint64_t master, int rep) {
  GenerateOptions opts;
  opts.keep_instruments = !design.one_step();
  return generate(design.spec, n, {master, static_cast<std::uint64_t>(rep)}, opts);
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  cfg.validate();
  const ExperimentDesign design = cfg.design();
  const TuningRule rules = cfg.resolved_tuning(design);
  const auto reps = static_cast<std::size_t>(cfg.replications);

  ExperimentReport rep;
  rep.experiment = cfg.label();
  rep.n = cfg.n;
  rep.replications = cfg.replications;
  rep.master_seed = cfg.master_seed;
  rep.rho = design.spec.rho;
  rep.parallelism = cfg.parallelism;
  rep.stage1 = design.one_step() ? "none" : to_string(*design.stage1);
  rep.stage2 = to_string(design.stage2);
  rep.tuning = rules;
  rep.rng = rng_identity();
  rep.version = kVersion;

  rep.records.resize(reps);
  rep.beta_hats.resize(reps);
  std::vector<Matrix> pi_hats(design.one_step() ? 0 : reps);
  std::vector<double> t1(reps, 0.0), t2(reps, 0.0);
  std::vector<std::exception_ptr> errors(reps);
  double lambda1 = 0.0, lambda2 = 0.0;

  auto run_one = [&](std::size_t t) {
    const int r = static_cast<int>(t) + 1;
    try {
      const Dataset data = replication_data(design, cfg.n, cfg.master_seed, r);
      FitResult fit = fit_design(data, design, rules);
      rep.records[t] = replication_metrics(fit, design.spec);
      rep.beta_hats[t] = fit.beta_hat;
      if (fit.pi_hat) pi_hats[t] = std::move(*fit.pi_hat);
      t1[t] = fit.stage1_seconds;
      t2[t] = fit.stage2_seconds;
      if (t == 0) {
        lambda1 = fit.lambda1;
        lambda2 = fit.lambda2;
      }
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };

  const int workers = std::min<int>(cfg.parallelism, cfg.replications);
  if (workers == 1) {
    for (std::size_t t = 0; t < reps; ++t) run_one(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t t = next.fetch_add(1); t < reps; t = next.fetch_add(1)) run_one(t);
      });
  }

  // Report the lowest-numbered failure so errors do not depend on scheduling.
  for (std::size_t t = 0; t < reps; ++t) {
    if (!errors[t]) continue;
    const std::string where = "experiment " + rep.experiment + ", rep " + std::to_string(t + 1) + ": ";
    try {
      std::rethrow_exception(errors[t]);
    } catch (const Error& e) {
      throw Error(e.kind(), where + e.what());
    }
  }

  rep.lambda1 = lambda1;
  rep.lambda2 = lambda2;
  rep.stage2_aggregate =
      aggregate(rep.records, rep.beta_hats, design.spec.beta_star, default_tracked_coordinates(design.spec.beta_star));
  if (!design.one_step()) rep.stage1_aggregate = aggregate_stage1(rep.records, pi_hats, design.spec.pi_star);
  rep.stage1_seconds = compensated_sum(t1);
  rep.stage2_seconds = compensated_sum(t2);

  if (cfg.diagnostics) {
    const Dataset data = replication_data(design, cfg.n, cfg.master_seed, cfg.diagnostics_rep);
    const FitResult fit = fit_design(data, design, rules);
    rep.diagnostics = diagnose(data, fit, design.spec, rules, diagnostics_seed(cfg.master_seed, cfg.diagnostics_rep));
  }
  rep.wall_seconds = detail::seconds_since(t_start);
  return rep;
}

inline std::vector<ExperimentReport> run_sensitivity(const std::vector<int>& ids, Index n, int reps,
                                                     std::uint64_t seed, double rho = kDefaultRho,
                                                     int parallelism = 1) {
  std::vector<ExperimentReport> out;
  for (int id : ids) {
    ExperimentConfig cfg;
    cfg.experiment_id = id;
    cfg.n = n;
    cfg.replications = reps;
    cfg.master_seed = seed;
    cfg.rho = rho;
    cfg.parallelism = parallelism;
    out.push_back(run_experiment(cfg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Formatting

/// Six significant digits, as used throughout the CSV output.
inline std::string fmt6(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string join_ints(const std::vector<int>& v, char sep) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? std::string(1, sep) : "") + std::to_string(v[k]);
  return s;
}

inline std::string per_replication_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "experiment,rep,n,l2_error,l2_error_adj,select_pct,stage1_l2_avg,stage1_select_pct,converged\n";
  for (std::size_t t = 0; t < r.records.size(); ++t) {
    const ReplicationMetrics& m = r.records[t];
    out << r.experiment << ',' << t + 1 << ',' << r.n << ',' << fmt6(m.l2_error) << ',' << fmt6(m.l2_error_adj) << ','
        << fmt6(m.select_pct) << ',' << (m.has_stage1 ? fmt6(m.stage1_l2_avg) : "") << ','
        << (m.has_stage1 ? fmt6(m.stage1_select_pct_avg) : "") << ',' << (m.converged ? 1 : 0) << '\n';
  }
  return out.str();
}

namespace detail {
inline std::string coord_name(Index j) { return "beta" + std::to_string(j + 1); }
}  // namespace detail

/// One header line plus one row per report (experiment, n).
inline std::string aggregate_csv(const std::vector<ExperimentReport>& reports) {
  std::ostringstream out;
  out << "experiment,n,replications,stage1,stage2,mean_l2,mean_l2_adj,smse,squared_bias,mean_select_pct";
  // Tracked columns follow the first report; preset designs all track beta5/beta6.
  if (!reports.empty())
    for (const auto& c : reports.front().stage2_aggregate.tracked)
      for (const char* q : {"_p5", "_p50", "_p95"}) out << ',' << detail::coord_name(c.coordinate) << q;
  out << ",zero_counts,stage1_mean_l2,stage1_smse,stage1_squared_bias,stage1_select_pct\n";
  for (const auto& r : reports) {
    const AggregateMetrics& a = r.stage2_aggregate;
    out << r.experiment << ',' << r.n << ',' << r.replications << ',' << r.stage1 << ',' << r.stage2 << ','
        << fmt6(a.mean_l2) << ',' << fmt6(a.mean_l2_adj) << ',' << fmt6(a.smse) << ',' << fmt6(a.squared_bias) << ','
        << fmt6(a.mean_select_pct);
    for (const auto& c : a.tracked) out << ',' << fmt6(c.p5) << ',' << fmt6(c.p50) << ',' << fmt6(c.p95);
    out << ',' << join_ints(a.zero_counts, ';');
    if (r.stage1_aggregate) {
      const Stage1Aggregate& s = *r.stage1_aggregate;
      out << ',' << fmt6(s.mean_l2) << ',' << fmt6(s.smse) << ',' << fmt6(s.squared_bias) << ','
          << fmt6(s.mean_select_pct);
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
  return out.str();
}

/// Stage-1 and stage-2 rows keyed by experiment id, one column per design.
inline std::string sensitivity_table(const std::vector<ExperimentReport>& reports) {
  std::ostringstream out;
  out << "metric";
  for (const auto& r : reports) out << ",exp" << r.experiment;
  out << '\n';
  auto row = [&](const char* name, auto get) {
    out << name;
    for (const auto& r : reports) out << ',' << get(r);
    out << '\n';
  };
  row("stage2_l2", [](const ExperimentReport& r) { return fmt6(r.stage2_aggregate.mean_l2); });
  row("stage2_smse", [](const ExperimentReport& r) { return fmt6(r.stage2_aggregate.smse); });
  row("stage2_bias2", [](const ExperimentReport& r) { return fmt6(r.stage2_aggregate.squared_bias); });
  row("stage2_select_pct", [](const ExperimentReport& r) { return fmt6(r.stage2_aggregate.mean_select_pct); });
  auto s1 = [](auto field) {
    return [field](const ExperimentReport& r) { return r.stage1_aggregate ? fmt6((*r.stage1_aggregate).*field) : ""; };
  };
  row("stage1_l2", s1(&Stage1Aggregate::mean_l2));
  row("stage1_smse", s1(&Stage1Aggregate::smse));
  row("stage1_bias2", s1(&Stage1Aggregate::squared_bias));
  row("stage1_select_pct", s1(&Stage1Aggregate::mean_select_pct));
  return out.str();
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

using nlohmann::json;

// NaN has no JSON literal; it is written as null.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
inline double num(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

inline json to_json(const AggregateMetrics& a) {
  json tracked = json::array();
  for (const auto& c : a.tracked)
    tracked.push_back({{"coordinate", coord_name(c.coordinate)}, {"index", c.coordinate}, {"mean", num(c.mean)},
                       {"p5", num(c.p5)}, {"p50", num(c.p50)}, {"p95", num(c.p95)}});
  return {{"count", a.count},
          {"converged_count", a.converged_count},
          {"mean_l2", num(a.mean_l2)},
          {"mean_l2_adj", num(a.mean_l2_adj)},
          {"smse", num(a.smse)},
          {"squared_bias", num(a.squared_bias)},
          {"mean_select_pct", num(a.mean_select_pct)},
          {"tracked", tracked},
          {"zero_counts", a.zero_counts}};
}

inline AggregateMetrics aggregate_from_json(const json& j) {
  AggregateMetrics a;
  a.count = j.at("count").get<std::size_t>();
  a.converged_count = j.at("converged_count").get<std::size_t>();
  a.mean_l2 = num(j.at("mean_l2"));
  a.mean_l2_adj = num(j.at("mean_l2_adj"));
  a.smse = num(j.at("smse"));
  a.squared_bias = num(j.at("squared_bias"));
  a.mean_select_pct = num(j.at("mean_select_pct"));
  for (const auto& t : j.at("tracked"))
    a.tracked.push_back({t.at("index").get<Index>(), num(t.at("mean")), num(t.at("p5")), num(t.at("p50")),
                         num(t.at("p95"))});
  a.zero_counts = j.at("zero_counts").get<std::vector<int>>();
  return a;
}

inline json to_json(const Stage1Aggregate& s) {
  return {{"mean_l2", num(s.mean_l2)},
          {"smse", num(s.smse)},
          {"squared_bias", num(s.squared_bias)},
          {"mean_select_pct", num(s.mean_select_pct)}};
}

inline Stage1Aggregate stage1_from_json(const json& j) {
  return {num(j.at("mean_l2")), num(j.at("smse")), num(j.at("squared_bias")), num(j.at("mean_select_pct"))};
}

inline json to_json(const DiagnosticsReport& d) {
  return {{"re_estimate", num(d.re_estimate)}, {"mi_quantity", num(d.mi_quantity)},
          {"mi_population", num(d.mi_population)}, {"pdw_success", d.pdw_success},
          {"pdw_mu_max", num(d.pdw_mu_max)},   {"phi1", num(d.phi1)},
          {"phi2", num(d.phi2)},               {"b1", num(d.b1)},
          {"b2", num(d.b2)},                   {"beta_min_margin", num(d.beta_min_margin)}};
}

inline DiagnosticsReport diagnostics_from_json(const json& j) {
  DiagnosticsReport d;
  d.re_estimate = num(j.at("re_estimate"));
  d.mi_quantity = num(j.at("mi_quantity"));
  d.mi_population = num(j.at("mi_population"));
  d.pdw_success = j.at("pdw_success").get<bool>();
  d.pdw_mu_max = num(j.at("pdw_mu_max"));
  d.phi1 = num(j.at("phi1"));
  d.phi2 = num(j.at("phi2"));
  d.b1 = num(j.at("b1"));
  d.b2 = num(j.at("b2"));
  d.beta_min_margin = num(j.at("beta_min_margin"));
  return d;
}

}  // namespace detail

/// JSON keeps full double precision so that a parse reproduces every field.
inline nlohmann::json report_to_json(const ExperimentReport& r) {
  using detail::num;
  nlohmann::json recs = nlohmann::json::array();
  for (std::size_t t = 0; t < r.records.size(); ++t) {
    const ReplicationMetrics& m = r.records[t];
    nlohmann::json row = {{"rep", t + 1},
                          {"l2_error", num(m.l2_error)},
                          {"l2_error_adj", num(m.l2_error_adj)},
                          {"select_pct", num(m.select_pct)},
                          {"converged", m.converged},
                          {"zero_flags", m.zero_flags}};
    if (m.has_stage1) {
      row["stage1_l2_avg"] = num(m.stage1_l2_avg);
      row["stage1_l2_sq_avg"] = num(m.stage1_l2_sq_avg);
      row["stage1_select_pct"] = num(m.stage1_select_pct_avg);
    }
    recs.push_back(std::move(row));
  }
  nlohmann::json tuning = {{"stage1_factor", r.tuning.stage1_factor},
                           {"stage2_factor", r.tuning.stage2_factor},
                           {"standardize", r.tuning.standardize},
                           {"tol", r.tuning.tol},
                           {"max_iters", r.tuning.max_iters}};
  if (r.tuning.override_lambda1) tuning["lambda1"] = *r.tuning.override_lambda1;
  if (r.tuning.override_lambda2) tuning["lambda2"] = *r.tuning.override_lambda2;
  nlohmann::json j = {
      {"config",
       {{"experiment", r.experiment},
        {"n", r.n},
        {"replications", r.replications},
        {"master_seed", r.master_seed},
        {"rho", r.rho},
        {"parallelism", r.parallelism},
        {"stage1", r.stage1},
        {"stage2", r.stage2},
        {"lambda1", r.lambda1},
        {"lambda2", r.lambda2},
        {"tuning", tuning},
        {"rng", r.rng},
        {"version", r.version}}},
      {"records", recs},
      {"aggregate", detail::to_json(r.stage2_aggregate)},
      {"timing", {{"wall_seconds", r.wall_seconds}, {"stage1_seconds", r.stage1_seconds}, {"stage2_seconds", r.stage2_seconds}}}};
  j["stage1_aggregate"] = r.stage1_aggregate ? detail::to_json(*r.stage1_aggregate) : nlohmann::json(nullptr);
  j["diagnostics"] = r.diagnostics ? detail::to_json(*r.diagnostics) : nlohmann::json(nullptr);
  return j;
}

inline ExperimentReport report_from_json(const nlohmann::json& j) {
  using detail::num;
  ExperimentReport r;
  try {
    const auto& c = j.at("config");
    r.experiment = c.at("experiment").get<std::string>();
    r.n = c.at("n").get<Index>();
    r.replications = c.at("replications").get<int>();
    r.master_seed = c.at("master_seed").get<std::uint64_t>();
    r.rho = c.at("rho").get<double>();
    r.parallelism = c.at("parallelism").get<int>();
    r.stage1 = c.at("stage1").get<std::string>();
    r.stage2 = c.at("stage2").get<std::string>();
    r.lambda1 = c.at("lambda1").get<double>();
    r.lambda2 = c.at("lambda2").get<double>();
    const auto& t = c.at("tuning");
    r.tuning.stage1_factor = t.at("stage1_factor").get<double>();
    r.tuning.stage2_factor = t.at("stage2_factor").get<double>();
    r.tuning.standardize = t.at("standardize").get<bool>();
    r.tuning.tol = t.at("tol").get<double>();
    r.tuning.max_iters = t.at("max_iters").get<int>();
    if (t.contains("lambda1")) r.tuning.override_lambda1 = t.at("lambda1").get<double>();
    if (t.contains("lambda2")) r.tuning.override_lambda2 = t.at("lambda2").get<double>();
    r.rng = c.at("rng").get<std::string>();
    r.version = c.at("version").get<std::string>();
    for (const auto& row : j.at("records")) {
      ReplicationMetrics m;
      m.l2_error = num(row.at("l2_error"));
      m.l2_error_sq = m.l2_error * m.l2_error;
      m.l2_error_adj = num(row.at("l2_error_adj"));
      m.select_pct = num(row.at("select_pct"));
      m.converged = row.at("converged").get<bool>();
      m.zero_flags = row.at("zero_flags").get<std::vector<bool>>();
      if (row.contains("stage1_l2_avg")) {
        m.has_stage1 = true;
        m.stage1_l2_avg = num(row.at("stage1_l2_avg"));
        m.stage1_l2_sq_avg = num(row.at("stage1_l2_sq_avg"));
        m.stage1_select_pct_avg = num(row.at("stage1_select_pct"));
      }
      r.records.push_back(std::move(m));
    }
    r.stage2_aggregate = detail::aggregate_from_json(j.at("aggregate"));
    if (!j.at("stage1_aggregate").is_null()) r.stage1_aggregate = detail::stage1_from_json(j.at("stage1_aggregate"));
    if (!j.at("diagnostics").is_null()) r.diagnostics = detail::diagnostics_from_json(j.at("diagnostics"));
    const auto& tm = j.at("timing");
    r.wall_seconds = tm.at("wall_seconds").get<double>();
    r.stage1_seconds = tm.at("stage1_seconds").get<double>();
    r.stage2_seconds = tm.at("stage2_seconds").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, std::string("malformed report JSON: ") + e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Files

enum class ReportFormat { Csv, Json };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  throw Error(ErrorKind::InvalidArgument, "unknown format '" + s + "' (csv|json)");
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// `<dir>/<stem>_aggregate.csv` next to the per-replication file.
inline std::filesystem::path aggregate_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p.replace_filename(path.stem().string() + "_aggregate.csv");
  return p;
}

/// CSV writes the per-replication file at `path` and the aggregate row to
/// aggregate_path(path). JSON writes a single document.
inline void emit_report(const ExperimentReport& report, ReportFormat format, const std::filesystem::path& path) {
  if (format == ReportFormat::Json) {
    write_text(path, report_to_json(report).dump(2) + "\n");
    return;
  }
  write_text(path, per_replication_csv(report));
  write_text(aggregate_path(path), aggregate_csv({report}));
}

inline ExperimentReport read_report_json(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, "'" + path.string() + "': " + e.what());
  }
  return report_from_json(j);
}

/// Human-readable summary of a design, one key=value per field.
inline std::string describe_design(const ExperimentDesign& d) {
  const ModelSpec& s = d.spec;
  std::ostringstream out;
  out << "experiment=" << d.id << " d=" << s.d << " k1=" << s.k1 << " p=" << s.p << " k2=" << s.k2
      << " sigma_eps=" << fmt6(s.sigma_eps) << " sigma_eta=" << fmt6(s.sigma_eta) << " sigma_z=" << fmt6(s.sigma_z)
      << " row_corr=" << fmt6(s.row_corr) << " rho=" << fmt6(s.rho)
      << " stage1=" << (d.one_step() ? "none" : to_string(*d.stage1)) << " stage2=" << to_string(d.stage2)
      << " stage1_factor=" << fmt6(d.stage1_factor) << " stage2_factor=" << fmt6(d.stage2_factor) << '\n';
  return out.str();
}

}  // namespace h2sls
