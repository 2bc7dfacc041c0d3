#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace h2sls {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Sorted list of zero-based column indices.
using IndexSet = std::vector<Index>;

enum class ErrorKind {
  NonFinite,
  EmptySupport,
  SingularGram,
  SingularBlock,
  NotPD,
  UnknownExperiment,
  LengthMismatch,
  EmptyInput,
  InvalidArgument,
  Io,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::EmptySupport: return "EmptySupport";
    case ErrorKind::SingularGram: return "SingularGram";
    case ErrorKind::SingularBlock: return "SingularBlock";
    case ErrorKind::NotPD: return "NotPD";
    case ErrorKind::UnknownExperiment: return "UnknownExperiment";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().allFinite();
}

/// Complement of `set` within [0, m). `set` need not be sorted.
inline IndexSet complement(const IndexSet& set, Index m) {
  std::vector<bool> in(static_cast<std::size_t>(m), false);
  for (Index j : set) in[static_cast<std::size_t>(j)] = true;
  IndexSet out;
  out.reserve(static_cast<std::size_t>(m));
  for (Index j = 0; j < m; ++j)
    if (!in[static_cast<std::size_t>(j)]) out.push_back(j);
  return out;
}

/// Indices j with v(j) != 0.
inline IndexSet support_of(const Vector& v) {
  IndexSet s;
  for (Index j = 0; j < v.size(); ++j)
    if (v(j) != 0.0) s.push_back(j);
  return s;
}

inline Matrix select_columns(const Matrix& x, const IndexSet& cols) {
  Matrix out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = x.col(cols[k]);
  return out;
}

inline Vector select(const Vector& v, const IndexSet& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Index>(k)) = v(idx[k]);
  return out;
}

inline Matrix select_block(const Matrix& g, const IndexSet& rows, const IndexSet& cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b)
      out(static_cast<Index>(a), static_cast<Index>(b)) = g(rows[a], cols[b]);
  return out;
}

inline int sign(double x) { return (x > 0.0) - (x < 0.0); }

/// How one stage of a two-stage pipeline is estimated. ORACLE_OLS is OLS on
/// the true support, which the caller must supply.
enum class StageMethod { Lasso, Ols, OracleOls };

inline const char* to_string(StageMethod m) {
  switch (m) {
    case StageMethod::Lasso: return "lasso";
    case StageMethod::Ols: return "ols";
    case StageMethod::OracleOls: return "oracle_ols";
  }
  return "unknown";
}

inline StageMethod parse_stage_method(const std::string& s) {
  if (s == "lasso") return StageMethod::Lasso;
  if (s == "ols") return StageMethod::Ols;
  if (s == "oracle_ols" || s == "oracle") return StageMethod::OracleOls;
  throw Error(ErrorKind::InvalidArgument, "unknown stage method '" + s + "' (lasso|ols|oracle_ols)");
}

/// Neumaier-compensated running sum. Used wherever results must not depend
/// on how a reduction is partitioned.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

}  // namespace h2sls
