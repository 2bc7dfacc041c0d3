#pragma once

// Replication metrics, Monte Carlo aggregation, and the theory-side checks:
// restricted eigenvalue (sampled), mutual incoherence, primal-dual witness,
// population bound factors and the beta-min margin.

#include "h2sls/common.hpp"
#include "h2sls/datagen.hpp"
#include "h2sls/estimators.hpp"
#include "h2sls/rng.hpp"
#include "h2sls/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace h2sls {

// ---------------------------------------------------------------------------
// Per-replication metrics

inline void require_same_length(const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw Error(ErrorKind::LengthMismatch,
                "vectors have lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
}

inline double l2_error(const Vector& beta_hat, const Vector& beta_star) {
  require_same_length(beta_hat, beta_star);
  return (beta_hat - beta_star).norm();
}

/// l2 error with each relevant coordinate's squared error divided by beta*_j^2.
inline double l2_error_adjusted(const Vector& beta_hat, const Vector& beta_star) {
  require_same_length(beta_hat, beta_star);
  CompensatedSum s;
  for (Index j = 0; j < beta_star.size(); ++j) {
    const double e = beta_hat(j) - beta_star(j);
    s.add(beta_star(j) != 0.0 ? e * e / (beta_star(j) * beta_star(j)) : e * e);
  }
  return std::sqrt(s.value());
}

/// Percentage of coordinates whose sign (with sign(0) = 0) matches.
inline double selection_pct(const Vector& beta_hat, const Vector& beta_star) {
  require_same_length(beta_hat, beta_star);
  if (beta_star.size() == 0) throw Error(ErrorKind::EmptyInput, "selection_pct of empty vectors");
  Index agree = 0;
  for (Index j = 0; j < beta_star.size(); ++j) agree += sign(beta_hat(j)) == sign(beta_star(j));
  return 100.0 * static_cast<double>(agree) / static_cast<double>(beta_star.size());
}

struct ReplicationMetrics {
  double l2_error = 0.0;
  double l2_error_adj = 0.0;
  double l2_error_sq = 0.0;
  double select_pct = 0.0;
  bool has_stage1 = false;
  double stage1_l2_avg = 0.0;     // (1/p) sum_j |pi_hat_j - pi*_j|_2
  double stage1_l2_sq_avg = 0.0;  // (1/p) sum_j |pi_hat_j - pi*_j|_2^2
  double stage1_select_pct_avg = 0.0;
  std::vector<bool> zero_flags;  // over J(beta*), true if estimated exactly 0
  bool converged = true;
};

inline ReplicationMetrics replication_metrics(const FitResult& fit, const ModelSpec& spec) {
  ReplicationMetrics m;
  m.l2_error = l2_error(fit.beta_hat, spec.beta_star);
  m.l2_error_sq = m.l2_error * m.l2_error;
  m.l2_error_adj = l2_error_adjusted(fit.beta_hat, spec.beta_star);
  m.select_pct = selection_pct(fit.beta_hat, spec.beta_star);
  for (Index j : spec.beta_support()) m.zero_flags.push_back(fit.beta_hat(j) == 0.0);
  m.converged = fit.converged();
  if (fit.pi_hat) {
    m.has_stage1 = true;
    CompensatedSum l2, l2sq, sel;
    for (Index j = 0; j < spec.p; ++j) {
      const Vector hat = fit.pi_hat->row(j).transpose();
      const Vector star = spec.pi_star.row(j).transpose();
      const double e = l2_error(hat, star);
      l2.add(e);
      l2sq.add(e * e);
      sel.add(selection_pct(hat, star));
    }
    m.stage1_l2_avg = l2.value() / spec.p;
    m.stage1_l2_sq_avg = l2sq.value() / spec.p;
    m.stage1_select_pct_avg = sel.value() / spec.p;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Aggregation over replications

struct CoordinateSummary {
  Index coordinate = 0;  // zero-based
  double mean = 0.0;
  double p5 = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

struct AggregateMetrics {
  std::size_t count = 0;
  std::size_t converged_count = 0;
  double mean_l2 = 0.0;
  double mean_l2_adj = 0.0;
  double smse = 0.0;
  double squared_bias = 0.0;
  double mean_select_pct = 0.0;
  std::vector<CoordinateSummary> tracked;
  std::vector<int> zero_counts;  // over J(beta*)
};

struct Stage1Aggregate {
  double mean_l2 = 0.0;
  double smse = 0.0;
  double squared_bias = 0.0;
  double mean_select_pct = 0.0;
};

/// Nearest-rank percentile of an ascending-sorted sample.
inline double nearest_rank(const std::vector<double>& sorted, double pct) {
  if (sorted.empty()) throw Error(ErrorKind::EmptyInput, "percentile of an empty sample");
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

/// Coordinates reported with percentiles: the last relevant and the first
/// irrelevant coefficient (when they exist).
inline std::vector<Index> default_tracked_coordinates(const Vector& beta_star) {
  std::vector<Index> out;
  const IndexSet s = support_of(beta_star);
  if (!s.empty()) out.push_back(s.back());
  const IndexSet c = complement(s, beta_star.size());
  if (!c.empty()) out.push_back(c.front());
  return out;
}

inline AggregateMetrics aggregate(const std::vector<ReplicationMetrics>& records, const std::vector<Vector>& estimates,
                                  const Vector& beta_star, const std::vector<Index>& tracked) {
  if (records.empty()) throw Error(ErrorKind::EmptyInput, "aggregate needs at least one replication");
  if (estimates.size() != records.size())
    throw Error(ErrorKind::LengthMismatch, "one estimate per replication record is required");
  const double count = static_cast<double>(records.size());
  AggregateMetrics a;
  a.count = records.size();

  CompensatedSum l2, l2adj, sq, sel;
  for (const auto& r : records) {
    l2.add(r.l2_error);
    l2adj.add(r.l2_error_adj);
    sq.add(r.l2_error_sq);
    sel.add(r.select_pct);
    a.converged_count += r.converged;
  }
  a.mean_l2 = l2.value() / count;
  a.mean_l2_adj = l2adj.value() / count;
  a.smse = sq.value() / count;
  a.mean_select_pct = sel.value() / count;

  const Index p = beta_star.size();
  std::vector<CompensatedSum> coord(static_cast<std::size_t>(p));
  for (const Vector& b : estimates) {
    require_same_length(b, beta_star);
    for (Index j = 0; j < p; ++j) coord[static_cast<std::size_t>(j)].add(b(j));
  }
  CompensatedSum bias;
  for (Index j = 0; j < p; ++j) {
    const double diff = coord[static_cast<std::size_t>(j)].value() / count - beta_star(j);
    bias.add(diff * diff);
  }
  a.squared_bias = bias.value();

  for (Index j : tracked) {
    std::vector<double> vals;
    vals.reserve(estimates.size());
    for (const Vector& b : estimates) vals.push_back(b(j));
    std::sort(vals.begin(), vals.end());
    CoordinateSummary c;
    c.coordinate = j;
    c.mean = coord[static_cast<std::size_t>(j)].value() / count;
    c.p5 = nearest_rank(vals, 5);
    c.p50 = nearest_rank(vals, 50);
    c.p95 = nearest_rank(vals, 95);
    a.tracked.push_back(c);
  }

  a.zero_counts.assign(records.front().zero_flags.size(), 0);
  for (const auto& r : records) {
    if (r.zero_flags.size() != a.zero_counts.size())
      throw Error(ErrorKind::LengthMismatch, "zero_flags lengths differ across replications");
    for (std::size_t k = 0; k < r.zero_flags.size(); ++k) a.zero_counts[k] += r.zero_flags[k];
  }
  return a;
}

/// Stage-1 statistics averaged over the p first-stage equations.
inline Stage1Aggregate aggregate_stage1(const std::vector<ReplicationMetrics>& records,
                                        const std::vector<Matrix>& pi_hats, const Matrix& pi_star) {
  if (records.empty()) throw Error(ErrorKind::EmptyInput, "aggregate_stage1 needs at least one replication");
  if (pi_hats.size() != records.size())
    throw Error(ErrorKind::LengthMismatch, "one pi_hat per replication record is required");
  const double count = static_cast<double>(records.size());
  Stage1Aggregate a;
  CompensatedSum l2, sq, sel;
  for (const auto& r : records) {
    l2.add(r.stage1_l2_avg);
    sq.add(r.stage1_l2_sq_avg);
    sel.add(r.stage1_select_pct_avg);
  }
  a.mean_l2 = l2.value() / count;
  a.smse = sq.value() / count;
  a.mean_select_pct = sel.value() / count;

  CompensatedSum bias;
  for (Index j = 0; j < pi_star.rows(); ++j)
    for (Index l = 0; l < pi_star.cols(); ++l) {
      CompensatedSum s;
      for (const Matrix& m : pi_hats) s.add(m(j, l));
      const double diff = s.value() / count - pi_star(j, l);
      bias.add(diff * diff);
    }
  a.squared_bias = bias.value() / static_cast<double>(pi_star.rows());
  return a;
}

// ---------------------------------------------------------------------------
// Restricted eigenvalue and mutual incoherence

/// Sampled upper bound on min { v^T G v / |v|^2 : |v_{S^c}|_1 <= gamma |v_S|_1 }.
/// v_S is uniform on the unit sphere over S; v_{S^c} has a Gaussian direction
/// rescaled to l1 norm u * gamma * |v_S|_1 with u ~ U(0, 1).
inline double re_estimate(const Matrix& g, const IndexSet& s, double gamma, int samples, const SeedPolicy& seed) {
  if (g.rows() != g.cols()) throw Error(ErrorKind::InvalidArgument, "gram must be square");
  if (s.empty()) throw Error(ErrorKind::EmptySupport, "restricted eigenvalue needs a nonempty S");
  if (!(gamma >= 1.0)) throw Error(ErrorKind::InvalidArgument, "gamma must be >= 1");
  if (samples < 1) throw Error(ErrorKind::InvalidArgument, "samples must be >= 1");
  const Index m = g.rows();
  const IndexSet sc = complement(s, m);
  RandomStream rng(seed);
  Vector v(m);
  double best = std::numeric_limits<double>::infinity();
  for (int t = 0; t < samples; ++t) {
    v.setZero();
    double norm2 = 0.0;
    for (Index j : s) {
      v(j) = rng.normal();
      norm2 += v(j) * v(j);
    }
    if (norm2 == 0.0) continue;
    const double inv = 1.0 / std::sqrt(norm2);
    double l1_s = 0.0;
    for (Index j : s) {
      v(j) *= inv;
      l1_s += std::abs(v(j));
    }
    if (!sc.empty()) {
      const double target = rng.uniform() * gamma * l1_s;
      // every other draw uses a random sparse pattern on S^c: cone minimizers
      // often sit on faces where most of S^c is zero
      const bool sparse = t % 2 == 1;
      double l1_c = 0.0;
      for (Index j : sc) {
        v(j) = sparse && rng.uniform() < 0.5 ? 0.0 : rng.normal();
        l1_c += std::abs(v(j));
      }
      if (sparse && l1_c == 0.0) {
        const Index j = sc[static_cast<std::size_t>(rng.uniform() * static_cast<double>(sc.size())) % sc.size()];
        v(j) = rng.normal();
        l1_c = std::abs(v(j));
      }
      const double scale = l1_c > 0.0 ? target / l1_c : 0.0;
      for (Index j : sc) v(j) *= scale;
    }
    best = std::min(best, v.dot(g * v) / v.squaredNorm());
  }
  return best;
}

/// || G_{K^c K} G_{K K}^{-1} ||_inf (maximum absolute row sum).
inline double mi_quantity(const Matrix& g, const IndexSet& k) {
  if (g.rows() != g.cols()) throw Error(ErrorKind::InvalidArgument, "gram must be square");
  if (k.empty()) throw Error(ErrorKind::EmptySupport, "mutual incoherence needs a nonempty K");
  const IndexSet kc = complement(k, g.rows());
  const Matrix gkk = select_block(g, k, k);
  Eigen::LLT<Matrix> llt(gkk);
  if (llt.info() != Eigen::Success || !(llt.rcond() >= kSingularRcond))
    throw Error(ErrorKind::SingularBlock, "G_KK is singular to working precision");
  if (kc.empty()) return 0.0;
  const Matrix gkck = select_block(g, kc, k);
  const Matrix prod = llt.solve(gkck.transpose()).transpose();  // G_{K^cK} G_KK^{-1}
  return prod.cwiseAbs().rowwise().sum().maxCoeff();
}

// ---------------------------------------------------------------------------
// Primal-dual witness

struct PdwResult {
  bool success = false;
  double mu_max = 0.0;
  Vector beta_restricted;
  bool converged = false;
};

/// Solves the Lasso restricted to K and checks strict dual feasibility of
/// mu_{K^c} = X_{K^c}^T (y - X_K b_K) / (n lambda w_{K^c}), where w are the
/// penalty weights implied by `cfg`.
inline PdwResult pdw_check(const Matrix& x_in, const Vector& y_in, double lambda, const IndexSet& k, LassoConfig cfg) {
  if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "pdw_check needs lambda > 0");
  if (k.empty()) throw Error(ErrorKind::EmptySupport, "pdw_check needs a nonempty K");
  Matrix x = x_in;
  Vector y = y_in;
  if (cfg.center) {
    x.rowwise() -= x.colwise().mean();
    y.array() -= y.mean();
    cfg.center = false;
  }
  cfg.lambda = lambda;
  const double n = static_cast<double>(x.rows());
  const Matrix xk = select_columns(x, k);
  Eigen::LLT<Matrix> llt(gram(xk));
  if (llt.info() != Eigen::Success || !(llt.rcond() >= kSingularRcond))
    throw Error(ErrorKind::SingularBlock, "restricted Gram X_K^T X_K / n is singular");

  LassoSolution sol = lasso_fit_restricted(x, y, k, cfg);
  PdwResult r;
  r.converged = sol.converged;
  r.beta_restricted = sol.beta;
  const Vector resid = y - x * sol.beta;
  for (Index j : complement(k, x.cols())) {
    const double w = cfg.standardize ? std::sqrt(x.col(j).squaredNorm() / n) : 1.0;
    if (w == 0.0) continue;
    const double mu = x.col(j).dot(resid) / (n * lambda * w);
    r.mu_max = std::max(r.mu_max, std::abs(mu));
  }
  r.success = r.mu_max < 1.0;
  return r;
}

// ---------------------------------------------------------------------------
// Cone property of the Lasso error

/// |(1/n) X^T (y - X beta*)|_inf, the quantity lambda must dominate twice over
/// for the error to lie in the cone C(J(beta*); 3).
inline double noise_correlation_inf(const Matrix& x, const Vector& y, const Vector& beta_star) {
  return (x.transpose() * (y - x * beta_star)).cwiseAbs().maxCoeff() / static_cast<double>(x.rows());
}

/// |v_{S^c}|_1 - gamma |v_S|_1; nonpositive iff v lies in C(S; gamma).
inline double cone_excess(const Vector& v, const IndexSet& s, double gamma) {
  double on = 0.0, off = 0.0;
  std::vector<bool> in(static_cast<std::size_t>(v.size()), false);
  for (Index j : s) in[static_cast<std::size_t>(j)] = true;
  for (Index j = 0; j < v.size(); ++j) (in[static_cast<std::size_t>(j)] ? on : off) += std::abs(v(j));
  return off - gamma * on;
}

// ---------------------------------------------------------------------------
// Population quantities and bounds

/// Covariance of the instrument-explained regressors x*_ij = z_ij^T pi*_j.
inline Matrix population_xstar_cov(const ModelSpec& spec) {
  const Matrix b = instrument_block_cov(spec);
  Matrix s(spec.p, spec.p);
  for (Index j = 0; j < spec.p; ++j)
    for (Index k = 0; k < spec.p; ++k) s(j, k) = b(j, k) * spec.pi_star.row(j).dot(spec.pi_star.row(k));
  return s;
}

struct BoundFactors {
  double phi1 = 0.0;
  double phi2 = 0.0;
  double sigma_xstar = 0.0;      // sqrt(lambda_max(Sigma_X*)), sub-Gaussian proxy
  double lambda_min_z = 0.0;     // lambda_min(Sigma_Z)
  double curvature = 0.0;        // lambda_min(Sigma_X*) or C_min
  double max_cross_cov = 0.0;    // max_{j,j'} |cov(x*_j', z_j)|_inf
};

/// phi1 and phi2 from population covariances. With `support_block` the
/// curvature is C_min = lambda_min of Sigma_X* restricted to J(beta*)
/// (selection-consistency variant); otherwise lambda_min(Sigma_X*).
inline BoundFactors bound_factors(const ModelSpec& spec, bool support_block = false) {
  spec.validate();
  BoundFactors f;
  const Matrix b = instrument_block_cov(spec);
  // Sigma_Z = I_d (x) B shares its spectrum with B.
  f.lambda_min_z = Eigen::SelfAdjointEigenSolver<Matrix>(b, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  const Matrix sx = population_xstar_cov(spec);
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(sx, Eigen::EigenvaluesOnly).eigenvalues();
  f.sigma_xstar = std::sqrt(std::max(0.0, ev.maxCoeff()));
  if (support_block) {
    const IndexSet k = spec.beta_support();
    if (k.empty()) throw Error(ErrorKind::EmptySupport, "beta* has empty support");
    const Matrix skk = select_block(sx, k, k);
    f.curvature = Eigen::SelfAdjointEigenSolver<Matrix>(skk, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  } else {
    f.curvature = ev.minCoeff();
  }
  if (!(f.curvature > 0.0) || !(f.lambda_min_z > 0.0))
    throw Error(ErrorKind::NotPD, "population covariance of X* or Z is not positive definite");

  // cov(x*_j', z_jl) = pi*_j'l B(j', j)
  for (Index j = 0; j < spec.p; ++j)
    for (Index jp = 0; jp < spec.p; ++jp)
      f.max_cross_cov = std::max(f.max_cross_cov, std::abs(b(jp, j)) * spec.pi_star.row(jp).cwiseAbs().maxCoeff());

  const double beta_l1 = spec.beta_star.lpNorm<1>();
  f.phi1 = spec.sigma_eta * f.max_cross_cov * beta_l1 / (f.lambda_min_z * f.curvature);
  f.phi2 = std::max(f.sigma_xstar * spec.sigma_eta * beta_l1, f.sigma_xstar * spec.sigma_eps) / f.curvature;
  return f;
}

/// sqrt(k1 log max(d, p) / n), the default first-stage error rate.
inline double first_stage_rate(const ModelSpec& spec, Index n) {
  return std::sqrt(spec.k1 * std::log(static_cast<double>(std::max(spec.d, spec.p))) / static_cast<double>(n));
}

namespace detail {
inline double second_stage_rate(const ModelSpec& spec, Index n) {
  return std::sqrt(spec.k2 * std::log(static_cast<double>(spec.p)) / static_cast<double>(n));
}
}  // namespace detail

/// l2 error bound (up to a universal constant). Without first-stage support
/// recovery: max{phi1 sqrt(k1 k2) M, phi2 sqrt(k2 log p / n)}; with it
/// (`improved`): max{phi1 sqrt(k2) M, ...}. M defaults to first_stage_rate.
inline double l2_error_bound(const ModelSpec& spec, const BoundFactors& f, Index n, bool improved,
                             std::optional<double> first_stage_error = std::nullopt) {
  const double m = first_stage_error ? *first_stage_error : first_stage_rate(spec, n);
  const double lead = improved ? std::sqrt(static_cast<double>(spec.k2)) : std::sqrt(static_cast<double>(spec.k1 * spec.k2));
  return std::max(f.phi1 * lead * m, f.phi2 * detail::second_stage_rate(spec, n));
}

/// Sup-norm bound on the relevant coefficients, up to the constant c:
/// B1 = c max{phi1 k1 sqrt(k2 log max(d,p)/n), phi2 sqrt(k2 log p/n)}.
inline double selection_bound_b1(const ModelSpec& spec, const BoundFactors& f, Index n, double c = 1.0) {
  const double lm = std::log(static_cast<double>(std::max(spec.d, spec.p)));
  return c * std::max(f.phi1 * spec.k1 * std::sqrt(spec.k2 * lm / static_cast<double>(n)),
                      f.phi2 * detail::second_stage_rate(spec, n));
}

/// B2 = c' max{phi1 sqrt(k1 k2 log max(d,p)/n), phi2 sqrt(k2 log p/n)}.
inline double selection_bound_b2(const ModelSpec& spec, const BoundFactors& f, Index n, double c = 1.0) {
  const double lm = std::log(static_cast<double>(std::max(spec.d, spec.p)));
  return c * std::max(f.phi1 * std::sqrt(spec.k1 * spec.k2 * lm / static_cast<double>(n)),
                      f.phi2 * detail::second_stage_rate(spec, n));
}

/// min_{j in J(beta*)} |beta*_j| - bound; positive when beta-min holds.
inline double beta_min_margin(const ModelSpec& spec, double bound) {
  if (!(bound >= 0.0)) throw Error(ErrorKind::InvalidArgument, "bound must be >= 0");
  const IndexSet s = spec.beta_support();
  if (s.empty()) throw Error(ErrorKind::EmptySupport, "beta* has empty support");
  double lo = std::numeric_limits<double>::infinity();
  for (Index j : s) lo = std::min(lo, std::abs(spec.beta_star(j)));
  return lo - bound;
}

// ---------------------------------------------------------------------------
// Bundled report for one fitted replication

struct DiagnosticsReport {
  double re_estimate = 0.0;      // on (1/n) x_hat^T x_hat, S = J(beta*), gamma = 3
  double mi_quantity = 0.0;      // empirical, on (1/n) x_hat^T x_hat
  double mi_population = 0.0;    // on Sigma_X*
  bool pdw_success = false;
  double pdw_mu_max = 0.0;
  double phi1 = 0.0;
  double phi2 = 0.0;
  double b1 = 0.0;               // up to constants
  double b2 = 0.0;               // up to constants
  double beta_min_margin = 0.0;  // against b1
};

struct DiagnosticsOptions {
  double gamma = 3.0;
  int re_samples = 20000;
  double bound_constant = 1.0;
};

/// Diagnostics for a two-stage fit (uses x_hat) or a one-step fit (uses X).
inline DiagnosticsReport diagnose(const Dataset& data, const FitResult& fit, const ModelSpec& spec,
                                  const TuningRule& rules, const SeedPolicy& seed, DiagnosticsOptions opts = {}) {
  DiagnosticsReport r;
  const Matrix& design = fit.x_hat ? *fit.x_hat : data.x;
  const IndexSet k = spec.beta_support();
  const Matrix g = gram(design);
  r.re_estimate = re_estimate(g, k, opts.gamma, opts.re_samples, seed);
  try {
    r.mi_quantity = mi_quantity(g, k);
  } catch (const Error&) {
    r.mi_quantity = std::numeric_limits<double>::quiet_NaN();
  }
  r.mi_population = mi_quantity(population_xstar_cov(spec), k);
  const double lambda = fit.lambda2 > 0.0 ? fit.lambda2 : resolve_lambda2(rules, spec, data.n());
  try {
    const PdwResult pdw = pdw_check(design, data.y, lambda, k, rules.lasso_config(lambda));
    r.pdw_success = pdw.success;
    r.pdw_mu_max = pdw.mu_max;
  } catch (const Error&) {
    r.pdw_success = false;
    r.pdw_mu_max = std::numeric_limits<double>::quiet_NaN();
  }
  const BoundFactors f = bound_factors(spec, true);
  r.phi1 = f.phi1;
  r.phi2 = f.phi2;
  r.b1 = selection_bound_b1(spec, f, data.n(), opts.bound_constant);
  r.b2 = selection_bound_b2(spec, f, data.n(), opts.bound_constant);
  r.beta_min_margin = beta_min_margin(spec, r.b1);
  return r;
}

}  // namespace h2sls
