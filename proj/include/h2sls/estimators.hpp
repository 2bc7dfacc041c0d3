#pragma once

// Two-stage estimators for the triangular model. The first stage fits each
// endogenous regressor x_j on its own instruments Z_j; the second stage fits
// y on the fitted regressors x_hat_j = Z_j pi_hat_j.

#include "h2sls/common.hpp"
#include "h2sls/datagen.hpp"
#include "h2sls/solver.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <vector>

namespace h2sls {

struct TuningRule {
  double stage1_factor = 0.4;
  double stage2_factor = 0.1;
  std::optional<double> override_lambda1;
  std::optional<double> override_lambda2;
  /// Penalise coefficients of the unit-RMS-scaled design (see LassoConfig).
  bool standardize = true;
  double tol = 1e-8;
  int max_iters = 10000;

  LassoConfig lasso_config(double lambda) const {
    LassoConfig cfg;
    cfg.lambda = lambda;
    cfg.tol = tol;
    cfg.max_iters = max_iters;
    cfg.standardize = standardize;
    return cfg;
  }
};

/// factor * sqrt(log d / n)
inline double lambda1_rule(int d, Index n, double factor) {
  if (d < 2 || n < 1) throw Error(ErrorKind::InvalidArgument, "lambda1_rule needs d >= 2 and n >= 1");
  return factor * std::sqrt(std::log(static_cast<double>(d)) / static_cast<double>(n));
}

/// factor * k2 * max{ sqrt(k1 log d / n), sqrt(log p / n) }
inline double lambda2_rule(int k1, int k2, int d, int p, Index n, double factor) {
  if (k1 < 1 || k2 < 1 || d < 2 || p < 2 || n < 1)
    throw Error(ErrorKind::InvalidArgument, "lambda2_rule needs k1, k2, n >= 1 and d, p >= 2");
  const double nn = static_cast<double>(n);
  const double first = std::sqrt(k1 * std::log(static_cast<double>(d)) / nn);
  const double second = std::sqrt(std::log(static_cast<double>(p)) / nn);
  return factor * k2 * std::max(first, second);
}

struct FirstStage {
  Matrix pi_hat;  // p x d
  Matrix x_hat;   // n x p
  bool converged = true;
};

struct FitResult {
  Vector beta_hat;
  std::optional<Matrix> pi_hat;  // absent for the one-step Lasso
  std::optional<Matrix> x_hat;
  double lambda1 = 0.0;  // 0 when the stage is not a Lasso
  double lambda2 = 0.0;
  std::optional<StageMethod> stage1_method;
  StageMethod stage2_method = StageMethod::Lasso;
  bool stage1_converged = true;
  bool stage2_converged = true;
  double stage1_seconds = 0.0;
  double stage2_seconds = 0.0;

  bool converged() const { return stage1_converged && stage2_converged; }
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void check_dims(const Dataset& data, const ModelSpec& spec, bool need_instruments) {
  if (data.x.cols() != spec.p || data.y.size() != data.x.rows())
    throw Error(ErrorKind::LengthMismatch, "dataset dimensions disagree with the model spec");
  if (need_instruments) {
    if (static_cast<int>(data.z.size()) != spec.p)
      throw Error(ErrorKind::LengthMismatch, "dataset carries no instruments for a first-stage fit");
    for (const Matrix& zj : data.z)
      if (zj.rows() != data.x.rows() || zj.cols() != spec.d)
        throw Error(ErrorKind::LengthMismatch, "instrument matrix has the wrong shape");
  }
}

}  // namespace detail

/// Fits each first-stage equation x_j ~ Z_j independently.
/// `oracle_supports` is required for OracleOls and ignored otherwise.
inline FirstStage fit_first_stage(const Dataset& data, StageMethod method, const LassoConfig& cfg,
                                  const std::vector<IndexSet>* oracle_supports = nullptr) {
  const Index p = data.x.cols();
  if (static_cast<Index>(data.z.size()) != p)
    throw Error(ErrorKind::LengthMismatch, "need one instrument matrix per endogenous regressor");
  if (method == StageMethod::OracleOls && (!oracle_supports || static_cast<Index>(oracle_supports->size()) != p))
    throw Error(ErrorKind::InvalidArgument, "ORACLE_OLS needs the true first-stage supports");

  const Index d = p > 0 ? data.z[0].cols() : 0;
  FirstStage fs;
  fs.pi_hat = Matrix::Zero(p, d);
  fs.x_hat = Matrix::Zero(data.x.rows(), p);
  for (Index j = 0; j < p; ++j) {
    const Matrix& zj = data.z[static_cast<std::size_t>(j)];
    const Vector xj = data.x.col(j);
    Vector pij;
    try {
      switch (method) {
        case StageMethod::Lasso: {
          LassoSolution s = lasso_fit(zj, xj, cfg);
          fs.converged = fs.converged && s.converged;
          pij = std::move(s.beta);
          break;
        }
        case StageMethod::Ols: pij = ols_fit(zj, xj); break;
        case StageMethod::OracleOls: pij = ols_fit_restricted(zj, xj, (*oracle_supports)[static_cast<std::size_t>(j)]); break;
      }
    } catch (const Error& e) {
      throw Error(e.kind(), "first-stage equation " + std::to_string(j + 1) + ": " + e.what());
    }
    fs.pi_hat.row(j) = pij.transpose();
    fs.x_hat.col(j).noalias() = zj * pij;
  }
  return fs;
}

inline std::vector<IndexSet> first_stage_supports(const ModelSpec& spec) {
  std::vector<IndexSet> out;
  for (int j = 0; j < spec.p; ++j) out.push_back(spec.pi_support(j));
  return out;
}

inline double resolve_lambda1(const TuningRule& rules, const ModelSpec& spec, Index n) {
  return rules.override_lambda1 ? *rules.override_lambda1 : lambda1_rule(spec.d, n, rules.stage1_factor);
}

inline double resolve_lambda2(const TuningRule& rules, const ModelSpec& spec, Index n) {
  return rules.override_lambda2 ? *rules.override_lambda2
                                : lambda2_rule(spec.k1, spec.k2, spec.d, spec.p, n, rules.stage2_factor);
}

namespace detail {

inline Vector fit_stage2(const Matrix& design, const Vector& y, StageMethod method, double lambda2,
                         const TuningRule& rules, const ModelSpec& spec, bool& converged) {
  switch (method) {
    case StageMethod::Lasso: {
      LassoSolution s = lasso_fit(design, y, rules.lasso_config(lambda2));
      converged = s.converged;
      return s.beta;
    }
    case StageMethod::Ols: return ols_fit(design, y);
    case StageMethod::OracleOls: return ols_fit_restricted(design, y, spec.beta_support());
  }
  return {};
}

}  // namespace detail

/// Two-stage estimator: first stage per `stage1`, then y on x_hat per `stage2`.
inline FitResult fit_h2sls(const Dataset& data, const TuningRule& rules, StageMethod stage1, StageMethod stage2,
                           const ModelSpec& spec) {
  detail::check_dims(data, spec, true);
  const Index n = data.n();
  FitResult r;
  r.stage1_method = stage1;
  r.stage2_method = stage2;
  if (stage1 == StageMethod::Lasso) r.lambda1 = resolve_lambda1(rules, spec, n);
  if (stage2 == StageMethod::Lasso) r.lambda2 = resolve_lambda2(rules, spec, n);

  auto t0 = std::chrono::steady_clock::now();
  const auto supports = first_stage_supports(spec);
  FirstStage fs = fit_first_stage(data, stage1, rules.lasso_config(r.lambda1), &supports);
  r.stage1_seconds = detail::seconds_since(t0);
  r.stage1_converged = fs.converged;

  t0 = std::chrono::steady_clock::now();
  try {
    r.beta_hat = detail::fit_stage2(fs.x_hat, data.y, stage2, r.lambda2, rules, spec, r.stage2_converged);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("second stage: ") + e.what());
  }
  r.stage2_seconds = detail::seconds_since(t0);
  r.pi_hat = std::move(fs.pi_hat);
  r.x_hat = std::move(fs.x_hat);
  return r;
}

/// Lasso of y directly on the endogenous X, no instruments.
inline FitResult fit_one_step_lasso(const Dataset& data, const TuningRule& rules, const ModelSpec& spec) {
  detail::check_dims(data, spec, false);
  FitResult r;
  r.stage2_method = StageMethod::Lasso;
  r.lambda2 = resolve_lambda2(rules, spec, data.n());
  const auto t0 = std::chrono::steady_clock::now();
  LassoSolution s = lasso_fit(data.x, data.y, rules.lasso_config(r.lambda2));
  r.stage2_seconds = detail::seconds_since(t0);
  r.stage2_converged = s.converged;
  r.beta_hat = std::move(s.beta);
  return r;
}

/// Dispatches on a Monte Carlo design.
inline FitResult fit_design(const Dataset& data, const ExperimentDesign& design, const TuningRule& rules) {
  if (design.one_step()) return fit_one_step_lasso(data, rules, design.spec);
  return fit_h2sls(data, rules, *design.stage1, design.stage2, design.spec);
}

inline TuningRule default_tuning(const ExperimentDesign& design) {
  TuningRule t;
  t.stage1_factor = design.stage1_factor;
  t.stage2_factor = design.stage2_factor;
  return t;
}

}  // namespace h2sls
