#pragma once

// Seeded generation of triangular simultaneous-equation data
//
//     y_i    = x_i^T beta* + eps_i
//     x_ij   = z_ij^T pi*_j + eta_ij,      j = 1..p
//
// with (eps_i, eta_i) jointly normal (eps correlated with every eta_j at
// level rho, eta_j mutually independent) and instruments z_ij in R^d whose
// entries are normal with variance sigma_z^2, correlated across j for the same
// instrument slot l at level row_corr and uncorrelated across l.

#include "h2sls/common.hpp"
#include "h2sls/rng.hpp"

#include <charconv>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace h2sls {

struct ModelSpec {
  int p = 0;
  int d = 0;
  int k1 = 0;
  int k2 = 0;
  Vector beta_star;
  Matrix pi_star;  // p x d, row j = pi*_j
  double sigma_eps = 0.0;
  double sigma_eta = 0.0;
  double sigma_z = 0.0;
  double rho = 0.0;
  double row_corr = 0.0;

  IndexSet beta_support() const { return support_of(beta_star); }
  IndexSet pi_support(int j) const { return support_of(Vector(pi_star.row(j).transpose())); }

  /// Schur complement of the error covariance is sigma_eps^2 (1 - p rho^2).
  bool error_cov_pd() const { return static_cast<double>(p) * rho * rho < 1.0; }

  void validate() const {
    auto bad = [](const std::string& m) { return Error(ErrorKind::InvalidArgument, "ModelSpec: " + m); };
    if (p < 1 || d < 1) throw bad("p and d must be >= 1");
    if (k1 < 0 || k2 < 0) throw bad("k1 and k2 must be >= 0");
    if (beta_star.size() != p) throw bad("beta_star must have length p");
    if (pi_star.rows() != p || pi_star.cols() != d) throw bad("pi_star must be p x d");
    if (!all_finite(beta_star) || !all_finite(pi_star)) throw Error(ErrorKind::NonFinite, "ModelSpec coefficients");
    if (static_cast<int>(beta_support().size()) > k2) throw bad("beta_star has more than k2 nonzeros");
    for (int j = 0; j < p; ++j)
      if (static_cast<int>(pi_support(j).size()) > k1)
        throw bad("pi_star row " + std::to_string(j) + " has more than k1 nonzeros");
    if (!(sigma_eps > 0.0) || !std::isfinite(sigma_eps)) throw bad("sigma_eps must be > 0");
    if (!(sigma_eta >= 0.0) || !std::isfinite(sigma_eta)) throw bad("sigma_eta must be >= 0");
    if (!(sigma_z > 0.0) || !std::isfinite(sigma_z)) throw bad("sigma_z must be > 0");
    if (!(rho > -1.0 && rho < 1.0)) throw bad("rho must lie in (-1, 1)");
    if (!(row_corr >= 0.0 && row_corr < 1.0)) throw bad("row_corr must lie in [0, 1)");
    if (sigma_eta > 0.0 && !error_cov_pd())
      throw Error(ErrorKind::NotPD, "error covariance is not positive definite: p*rho^2 = " +
                                        std::to_string(p * rho * rho) + " >= 1 (need |rho| < " +
                                        std::to_string(1.0 / std::sqrt(static_cast<double>(p))) + ")");
  }
};

struct Dataset {
  Vector y;               // n
  Matrix x;               // n x p endogenous regressors
  std::vector<Matrix> z;  // p matrices, each n x d; empty if instruments were dropped
  Vector eps;             // n
  Matrix eta;             // n x p

  Index n() const { return y.size(); }
  Index p() const { return x.cols(); }
};

inline Eigen::LLT<Matrix> cholesky_or_throw(const Matrix& cov, const char* what) {
  if (cov.rows() != cov.cols()) throw Error(ErrorKind::InvalidArgument, std::string(what) + " must be square");
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::NotPD, std::string(what) + " is not positive definite");
  // LLT only looks at the lower triangle; reject a failed leading minor explicitly.
  const Matrix& l = llt.matrixLLT();
  for (Index i = 0; i < l.rows(); ++i)
    if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i)))
      throw Error(ErrorKind::NotPD, std::string(what) + " is not positive definite");
  return llt;
}

/// `count` independent rows from N(0, cov), as L * standard normals.
inline Matrix sample_mvn(const Matrix& cov, Index count, const SeedPolicy& seed) {
  if (!((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff())))
    throw Error(ErrorKind::InvalidArgument, "covariance must be symmetric");
  const auto llt = cholesky_or_throw(cov, "covariance");
  const Index k = cov.rows();
  RandomStream rng(seed);
  Matrix draws(count, k);
  for (Index i = 0; i < count; ++i)
    for (Index j = 0; j < k; ++j) draws(i, j) = rng.normal();
  return draws * llt.matrixL().transpose();
}

/// Covariance of (eps_i, eta_i1, ..., eta_ip).
inline Matrix build_error_cov(const ModelSpec& spec) {
  if (!spec.error_cov_pd())
    throw Error(ErrorKind::NotPD, "p*rho^2 = " + std::to_string(spec.p * spec.rho * spec.rho) + " >= 1");
  const Index k = spec.p + 1;
  Matrix cov = Matrix::Zero(k, k);
  const double se = spec.sigma_eps, sh = spec.sigma_eta;
  cov(0, 0) = se * se;
  for (Index j = 1; j < k; ++j) {
    cov(0, j) = cov(j, 0) = spec.rho * se * sh;
    cov(j, j) = sh * sh;
  }
  return cov;
}

/// p x p covariance of (z_i1l, ..., z_ipl) for a fixed instrument slot l.
inline Matrix instrument_block_cov(const ModelSpec& spec) {
  const double v = spec.sigma_z * spec.sigma_z;
  Matrix b = Matrix::Constant(spec.p, spec.p, spec.row_corr * v);
  b.diagonal().setConstant(v);
  return b;
}

/// Full (p d) x (p d) covariance of vec(z_i^T) in l-major order: entry
/// (l p + j) is z_ijl. Block diagonal with d copies of instrument_block_cov.
inline Matrix build_instrument_cov(const ModelSpec& spec) {
  if (!(spec.row_corr >= 0.0 && spec.row_corr < 1.0))
    throw Error(ErrorKind::InvalidArgument, "row_corr must lie in [0, 1)");
  const Index p = spec.p, d = spec.d;
  const Matrix b = instrument_block_cov(spec);
  Matrix cov = Matrix::Zero(p * d, p * d);
  for (Index l = 0; l < d; ++l) cov.block(l * p, l * p, p, p) = b;
  return cov;
}

struct GenerateOptions {
  /// Dropping Z keeps memory at O(n p) for very large n.
  bool keep_instruments = true;
};

/// One sample of size n. Stream layout: n rows of (p+1) error normals, then
/// for each instrument slot l = 1..d, n rows of p normals.
inline Dataset generate(const ModelSpec& spec, Index n, const SeedPolicy& seed, GenerateOptions opts = {}) {
  spec.validate();
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "n must be >= 1");
  const Index p = spec.p, d = spec.d;
  RandomStream rng(seed);
  Dataset data;

  Matrix raw(n, p + 1);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j <= p; ++j) raw(i, j) = rng.normal();
  if (spec.sigma_eta == 0.0) {
    data.eps = spec.sigma_eps * raw.col(0);
    data.eta = Matrix::Zero(n, p);
  } else {
    const auto llt = cholesky_or_throw(build_error_cov(spec), "error covariance");
    const Matrix errors = raw * llt.matrixL().transpose();
    data.eps = errors.col(0);
    data.eta = errors.rightCols(p);
  }

  Matrix chol_b_t;
  const bool correlated = spec.row_corr > 0.0;
  if (correlated)
    chol_b_t = cholesky_or_throw(instrument_block_cov(spec), "instrument covariance").matrixL().transpose();

  Matrix xstar = Matrix::Zero(n, p);
  if (opts.keep_instruments) data.z.assign(static_cast<std::size_t>(p), Matrix(n, d));
  Matrix u(n, p), slot(n, p);  // slot(i, j) = z_ijl
  for (Index l = 0; l < d; ++l) {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < p; ++j) u(i, j) = rng.normal();
    if (correlated)
      slot.noalias() = u * chol_b_t.triangularView<Eigen::Upper>();
    else
      slot = spec.sigma_z * u;
    for (Index j = 0; j < p; ++j) {
      if (spec.pi_star(j, l) != 0.0) xstar.col(j) += spec.pi_star(j, l) * slot.col(j);
      if (opts.keep_instruments) data.z[static_cast<std::size_t>(j)].col(l) = slot.col(j);
    }
  }

  data.x = xstar + data.eta;
  data.y = data.x * spec.beta_star + data.eps;
  return data;
}

// ---------------------------------------------------------------------------
// Monte Carlo designs

inline constexpr double kDefaultRho = 0.1;

struct ExperimentDesign {
  int id = 0;
  ModelSpec spec;
  std::optional<StageMethod> stage1;  // empty: one-step Lasso of y on X
  StageMethod stage2 = StageMethod::Lasso;
  double stage1_factor = 0.4;
  double stage2_factor = 0.1;

  bool one_step() const { return !stage1.has_value(); }
};

inline constexpr int kNumExperiments = 14;

inline ModelSpec make_sparse_spec(int p, int d, int k1, int k2, double beta_value, double sigma_eps,
                                  double sigma_eta, double sigma_z, double rho, double row_corr) {
  ModelSpec s;
  s.p = p;
  s.d = d;
  s.k1 = k1;
  s.k2 = k2;
  s.beta_star = Vector::Zero(p);
  s.beta_star.head(k2).setConstant(beta_value);
  s.pi_star = Matrix::Zero(p, d);
  s.pi_star.leftCols(k1).setConstant(1.0);
  s.sigma_eps = sigma_eps;
  s.sigma_eta = sigma_eta;
  s.sigma_z = sigma_z;
  s.rho = rho;
  s.row_corr = row_corr;
  return s;
}

/// The fourteen simulation designs. Experiment 3 shares the data-generating
/// process of experiment 1 and differs only in the estimator.
inline ExperimentDesign experiment_spec(int id, double rho = kDefaultRho) {
  if (id < 1 || id > kNumExperiments)
    throw Error(ErrorKind::UnknownExperiment,
                "experiment " + std::to_string(id) + " is not defined; valid ids are 1..14");
  ExperimentDesign e;
  e.id = id;
  double s_eps = 0.4, s_eta = 0.4, s_z = 1.0, corr = 0.0, beta = 1.0;
  if (id == 7 || id == 11) s_eps = 1.0;
  if (id == 8 || id == 12) s_eta = 1.0;
  if (id == 9 || id == 13) s_z = 0.4;
  if (id >= 10 && id <= 13) corr = 0.5;
  if (id == 14) {
    beta = 0.01;
    e.stage2_factor = 0.001;
  }
  if (id == 2) {
    e.spec = make_sparse_spec(5, 4, 4, 5, 1.0, s_eps, s_eta, s_z, rho, 0.0);
    e.stage1 = StageMethod::OracleOls;
    e.stage2 = StageMethod::OracleOls;
    return e;
  }
  e.spec = make_sparse_spec(50, 100, 4, 5, beta, s_eps, s_eta, s_z, rho, corr);
  switch (id) {
    case 3: e.stage1.reset(); break;
    case 4: e.stage1 = StageMethod::Ols; break;
    case 5: e.stage1 = StageMethod::Lasso; e.stage2 = StageMethod::Ols; break;
    case 6: e.stage1 = StageMethod::Ols; e.stage2 = StageMethod::Ols; break;
    default: e.stage1 = StageMethod::Lasso; break;
  }
  return e;
}

// ---------------------------------------------------------------------------
// Flat key = value serialisation of ModelSpec

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view s, const std::string& key) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorKind::InvalidArgument, "key '" + key + "': cannot parse '" + std::string(s) + "' as a number");
  return v;
}

inline std::vector<double> parse_list(std::string_view s, char sep, const std::string& key) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find(sep, start);
    if (end == std::string_view::npos) end = s.size();
    out.push_back(parse_double(s.substr(start, end - start), key));
    start = end + 1;
  }
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Parses `key = value` lines; blank lines and lines starting with '#' are skipped.
inline std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::InvalidArgument, "line " + std::to_string(lineno) + ": expected key = value");
    kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  return kv;
}

inline std::string to_config_string(const ModelSpec& s) {
  std::ostringstream out;
  using detail::format_double;
  out << "p = " << s.p << '\n'
      << "d = " << s.d << '\n'
      << "k1 = " << s.k1 << '\n'
      << "k2 = " << s.k2 << '\n';
  out << "beta_star = ";
  for (Index j = 0; j < s.beta_star.size(); ++j) out << (j ? "," : "") << format_double(s.beta_star(j));
  out << '\n' << "pi_star = ";
  for (Index j = 0; j < s.pi_star.rows(); ++j) {
    if (j) out << ';';
    for (Index l = 0; l < s.pi_star.cols(); ++l) out << (l ? "," : "") << format_double(s.pi_star(j, l));
  }
  out << '\n'
      << "sigma_eps = " << format_double(s.sigma_eps) << '\n'
      << "sigma_eta = " << format_double(s.sigma_eta) << '\n'
      << "sigma_z = " << format_double(s.sigma_z) << '\n'
      << "rho = " << format_double(s.rho) << '\n'
      << "row_corr = " << format_double(s.row_corr) << '\n';
  return out.str();
}

inline ModelSpec parse_model_spec(const std::string& text) {
  const auto kv = parse_key_values(text);
  static const char* const kKeys[] = {"p", "d", "k1", "k2", "beta_star", "pi_star", "sigma_eps",
                                      "sigma_eta", "sigma_z", "rho", "row_corr"};
  for (const auto& [k, v] : kv) {
    bool known = false;
    for (const char* key : kKeys) known = known || k == key;
    if (!known) throw Error(ErrorKind::InvalidArgument, "unknown ModelSpec key '" + k + "'");
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorKind::InvalidArgument, std::string("missing ModelSpec key '") + key + "'");
    return it->second;
  };
  auto get_int = [&](const char* key) {
    const double v = detail::parse_double(get(key), key);
    if (v != std::floor(v)) throw Error(ErrorKind::InvalidArgument, std::string("key '") + key + "' must be an integer");
    return static_cast<int>(v);
  };

  ModelSpec s;
  s.p = get_int("p");
  s.d = get_int("d");
  s.k1 = get_int("k1");
  s.k2 = get_int("k2");
  const auto beta = detail::parse_list(get("beta_star"), ',', "beta_star");
  s.beta_star = Eigen::Map<const Vector>(beta.data(), static_cast<Index>(beta.size()));

  const std::string& pi_text = get("pi_star");
  std::vector<std::vector<double>> rows;
  std::size_t start = 0;
  while (start <= pi_text.size()) {
    std::size_t end = pi_text.find(';', start);
    if (end == std::string::npos) end = pi_text.size();
    rows.push_back(detail::parse_list(std::string_view(pi_text).substr(start, end - start), ',', "pi_star"));
    start = end + 1;
  }
  s.pi_star.resize(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows[0].size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (static_cast<Index>(rows[j].size()) != s.pi_star.cols())
      throw Error(ErrorKind::InvalidArgument, "pi_star rows have unequal lengths");
    for (std::size_t l = 0; l < rows[j].size(); ++l)
      s.pi_star(static_cast<Index>(j), static_cast<Index>(l)) = rows[j][l];
  }
  s.sigma_eps = detail::parse_double(get("sigma_eps"), "sigma_eps");
  s.sigma_eta = detail::parse_double(get("sigma_eta"), "sigma_eta");
  s.sigma_z = detail::parse_double(get("sigma_z"), "sigma_z");
  s.rho = detail::parse_double(get("rho"), "rho");
  s.row_corr = detail::parse_double(get("row_corr"), "row_corr");
  s.validate();
  return s;
}

}  // namespace h2sls
