#pragma once

// Dense least-squares and l1-penalised least-squares solvers.
//
// The Lasso objective is
//
//     (1/2n) |y - X b|_2^2 + lambda * sum_j w_j |b_j|
//
// with w_j = 1 unless `standardize` is set, in which case w_j is the root
// mean square of column j (so the penalty acts on coefficients of the
// unit-scaled design and the returned b is on the original scale).
// Minimisation is cyclic coordinate descent on the Gram matrix.

#include "h2sls/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace h2sls {

struct LassoConfig {
  double lambda = 0.0;
  double tol = 1e-8;  // max |b_j change| over one sweep
  int max_iters = 10000;
  bool center = false;       // subtract column means of X and the mean of y first
  bool standardize = false;  // per-column penalty weight = column RMS
  bool record_trace = false;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw Error(ErrorKind::InvalidArgument, "lambda must be finite and >= 0");
    if (!(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tol must be > 0");
    if (max_iters < 1) throw Error(ErrorKind::InvalidArgument, "max_iters must be >= 1");
  }
};

struct LassoSolution {
  Vector beta;
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
  /// Objective after each sweep; filled only when LassoConfig::record_trace.
  std::vector<double> trace;
};

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

/// (1/n) X^T X, exactly symmetric.
inline Matrix gram(const Matrix& x) {
  const Index m = x.cols();
  Matrix g = Matrix::Zero(m, m);
  g.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), 1.0 / static_cast<double>(x.rows()));
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

namespace detail {

inline void check_design(const Matrix& x, const Vector& y) {
  if (x.rows() < 1 || x.cols() < 1)
    throw Error(ErrorKind::InvalidArgument, "design must have at least one row and one column");
  if (y.size() != x.rows())
    throw Error(ErrorKind::LengthMismatch, "y has length " + std::to_string(y.size()) +
                                               " but X has " + std::to_string(x.rows()) + " rows");
  if (!all_finite(x)) throw Error(ErrorKind::NonFinite, "design matrix contains a non-finite entry");
  if (!all_finite(y)) throw Error(ErrorKind::NonFinite, "response contains a non-finite entry");
}

/// Penalty weights: 1, or column RMS (= sqrt(G_jj)) under standardisation.
inline Vector penalty_weights(const Matrix& g, bool standardize) {
  if (!standardize) return Vector::Ones(g.rows());
  return g.diagonal().cwiseSqrt();
}

/// Coordinate descent given the sufficient statistics G = X^T X / n,
/// c = X^T y / n and yy = y^T y / n.
inline LassoSolution coordinate_descent(const Matrix& g, const Vector& c, double yy,
                                        const Vector& weights, const LassoConfig& cfg) {
  const Index m = g.rows();
  LassoSolution sol;
  sol.beta = Vector::Zero(m);
  Vector gb = Vector::Zero(m);  // G * beta

  auto objective = [&] {
    double pen = 0.0;
    for (Index j = 0; j < m; ++j) pen += weights(j) * std::abs(sol.beta(j));
    return 0.5 * yy - c.dot(sol.beta) + 0.5 * sol.beta.dot(gb) + cfg.lambda * pen;
  };

  for (int sweep = 1; sweep <= cfg.max_iters; ++sweep) {
    double max_change = 0.0;
    for (Index j = 0; j < m; ++j) {
      const double gjj = g(j, j);
      if (gjj <= 0.0) continue;  // zero column stays at 0
      const double old = sol.beta(j);
      const double z = c(j) - gb(j) + gjj * old;
      const double updated = soft_threshold(z, cfg.lambda * weights(j)) / gjj;
      const double delta = updated - old;
      if (delta != 0.0) {
        sol.beta(j) = updated;
        gb.noalias() += delta * g.col(j);
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    sol.iterations = sweep;
    if (cfg.record_trace) sol.trace.push_back(objective());
    if (max_change < cfg.tol) {
      sol.converged = true;
      break;
    }
  }
  return sol;
}

inline double lasso_objective(const Matrix& x, const Vector& y, const Vector& beta,
                              const Vector& weights, double lambda) {
  const double n = static_cast<double>(x.rows());
  return (y - x * beta).squaredNorm() / (2.0 * n) + lambda * weights.cwiseProduct(beta.cwiseAbs()).sum();
}

}  // namespace detail

inline LassoSolution lasso_fit(const Matrix& x_in, const Vector& y_in, const LassoConfig& cfg) {
  detail::check_design(x_in, y_in);
  cfg.validate();

  Matrix x = x_in;
  Vector y = y_in;
  if (cfg.center) {
    x.rowwise() -= x.colwise().mean();
    y.array() -= y.mean();
  }
  const double n = static_cast<double>(x.rows());
  const Matrix g = gram(x);
  const Vector c = x.transpose() * y / n;
  const Vector w = detail::penalty_weights(g, cfg.standardize);

  LassoSolution sol = detail::coordinate_descent(g, c, y.squaredNorm() / n, w, cfg);
  sol.objective = detail::lasso_objective(x, y, sol.beta, w, cfg.lambda);
  return sol;
}

/// Lasso over the columns in `support`; every other coefficient is exactly 0.
inline LassoSolution lasso_fit_restricted(const Matrix& x, const Vector& y, const IndexSet& support,
                                          const LassoConfig& cfg) {
  if (support.empty()) throw Error(ErrorKind::EmptySupport, "restricted fit needs a nonempty support");
  for (Index j : support)
    if (j < 0 || j >= x.cols())
      throw Error(ErrorKind::InvalidArgument, "support index " + std::to_string(j) + " out of range");

  LassoSolution sub = lasso_fit(select_columns(x, support), y, cfg);
  LassoSolution sol = std::move(sub);
  Vector full = Vector::Zero(x.cols());
  for (std::size_t k = 0; k < support.size(); ++k) full(support[k]) = sol.beta(static_cast<Index>(k));
  sol.beta = std::move(full);
  return sol;
}

/// Reciprocal condition number below which a Gram matrix is treated as singular.
inline constexpr double kSingularRcond = 1e-12;

/// (X^T X)^{-1} X^T y.
inline Vector ols_fit(const Matrix& x, const Vector& y) {
  detail::check_design(x, y);
  if (x.cols() > x.rows())
    throw Error(ErrorKind::SingularGram, "OLS needs m <= n (m = " + std::to_string(x.cols()) +
                                             ", n = " + std::to_string(x.rows()) + ")");
  const Matrix g = gram(x) * static_cast<double>(x.rows());
  Eigen::LLT<Matrix> llt(g);
  if (llt.info() != Eigen::Success || !(llt.rcond() >= kSingularRcond))
    throw Error(ErrorKind::SingularGram, "Gram matrix is singular to working precision");
  return llt.solve(x.transpose() * y);
}

/// OLS on the columns in `support`, zero elsewhere.
inline Vector ols_fit_restricted(const Matrix& x, const Vector& y, const IndexSet& support) {
  if (support.empty()) throw Error(ErrorKind::EmptySupport, "restricted OLS needs a nonempty support");
  const Vector sub = ols_fit(select_columns(x, support), y);
  Vector full = Vector::Zero(x.cols());
  for (std::size_t k = 0; k < support.size(); ++k) full(support[k]) = sub(static_cast<Index>(k));
  return full;
}

}  // namespace h2sls
