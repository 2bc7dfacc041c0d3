#pragma once

// Reference computations for the tests. Written with plain loops so they do
// not share code paths with the library (no Eigen decompositions).

#include "h2sls/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using h2sls::Index;
using h2sls::IndexSet;
using h2sls::Matrix;
using h2sls::Vector;

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline Vector gauss_solve(Matrix a, Vector b) {
  const Index m = a.rows();
  for (Index c = 0; c < m; ++c) {
    Index piv = c;
    for (Index r = c + 1; r < m; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    for (Index k = 0; k < m; ++k) std::swap(a(c, k), a(piv, k));
    std::swap(b(c), b(piv));
    for (Index r = c + 1; r < m; ++r) {
      const double f = a(r, c) / a(c, c);
      for (Index k = c; k < m; ++k) a(r, k) -= f * a(c, k);
      b(r) -= f * b(c);
    }
  }
  Vector x(m);
  for (Index r = m - 1; r >= 0; --r) {
    double s = b(r);
    for (Index k = r + 1; k < m; ++k) s -= a(r, k) * x(k);
    x(r) = s / a(r, r);
  }
  return x;
}

/// OLS via the normal equations and gauss_solve.
inline Vector ols(const Matrix& x, const Vector& y) {
  const Index m = x.cols(), n = x.rows();
  Matrix g(m, m);
  Vector c(m);
  for (Index a = 0; a < m; ++a) {
    double s = 0.0;
    for (Index i = 0; i < n; ++i) s += x(i, a) * y(i);
    c(a) = s;
    for (Index b = 0; b < m; ++b) {
      double t = 0.0;
      for (Index i = 0; i < n; ++i) t += x(i, a) * x(i, b);
      g(a, b) = t;
    }
  }
  return gauss_solve(g, c);
}

/// Largest violation of the Lasso KKT conditions for
/// (1/2n)|y - X b|^2 + lambda sum_j w_j |b_j| (w = 1 when empty).
inline double kkt_violation(const Matrix& x, const Vector& y, const Vector& beta, double lambda,
                            const std::vector<double>& w = {}) {
  const Index n = x.rows(), m = x.cols();
  std::vector<double> r(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    double s = y(i);
    for (Index j = 0; j < m; ++j) s -= x(i, j) * beta(j);
    r[static_cast<std::size_t>(i)] = s;
  }
  double worst = 0.0;
  for (Index j = 0; j < m; ++j) {
    double g = 0.0;
    for (Index i = 0; i < n; ++i) g += x(i, j) * r[static_cast<std::size_t>(i)];
    g /= static_cast<double>(n);
    const double lw = lambda * (w.empty() ? 1.0 : w[static_cast<std::size_t>(j)]);
    const double v = beta(j) != 0.0 ? std::abs(g - lw * (beta(j) > 0 ? 1.0 : -1.0)) : std::max(0.0, std::abs(g) - lw);
    worst = std::max(worst, v);
  }
  return worst;
}

/// Cyclic Jacobi eigen-decomposition of a small symmetric matrix.
/// Returns eigenvalues; eigenvectors are the columns of `vecs`.
inline std::vector<double> jacobi_eigen(Matrix a, Matrix& vecs) {
  const Index m = a.rows();
  vecs = Matrix::Identity(m, m);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < m; ++p)
      for (Index q = p + 1; q < m; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Index p = 0; p < m; ++p)
      for (Index q = p + 1; q < m; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Index k = 0; k < m; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < m; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < m; ++k) {
          const double vkp = vecs(k, p), vkq = vecs(k, q);
          vecs(k, p) = c * vkp - s * vkq;
          vecs(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<double> ev(static_cast<std::size_t>(m));
  for (Index k = 0; k < m; ++k) ev[static_cast<std::size_t>(k)] = a(k, k);
  return ev;
}

inline double min_eigenvalue(const Matrix& a) {
  Matrix v;
  const auto ev = jacobi_eigen(a, v);
  return *std::min_element(ev.begin(), ev.end());
}

inline bool in_cone(const Vector& v, const IndexSet& s, double gamma, double tol) {
  std::vector<bool> in(static_cast<std::size_t>(v.size()), false);
  for (Index j : s) in[static_cast<std::size_t>(j)] = true;
  double on = 0.0, off = 0.0;
  for (Index j = 0; j < v.size(); ++j) (in[static_cast<std::size_t>(j)] ? on : off) += std::abs(v(j));
  return off <= gamma * on + tol;
}

/// Exact min { v^T G v / |v|^2 : v != 0, |v_{S^c}|_1 <= gamma |v_S|_1 }.
/// The cone is a union of polyhedral cones (one per sign pattern). On each,
/// the minimum of the Rayleigh quotient is attained at an eigenvector of G
/// compressed to the linear span of some face, so enumerating faces and
/// keeping feasible eigenvectors gives the exact value. Meant for m <= 8.
inline double re_exact(const Matrix& g, const IndexSet& s, double gamma) {
  const Index m = g.rows();
  std::vector<bool> in_s(static_cast<std::size_t>(m), false);
  for (Index j : s) in_s[static_cast<std::size_t>(j)] = true;
  double best = std::numeric_limits<double>::infinity();

  for (unsigned signs = 0; signs < (1u << m); ++signs) {
    for (unsigned zero = 0; zero < (1u << m); ++zero) {
      if (zero & signs) continue;  // zeroed coordinates carry no sign; avoid duplicates
      for (int l1_active = 0; l1_active < 2; ++l1_active) {
        // Spanning set: free coordinates, with the l1 hyperplane normal projected out.
        std::vector<Vector> basis;
        Vector a = Vector::Zero(m);
        for (Index j = 0; j < m; ++j) {
          if (zero & (1u << j)) continue;
          const double sj = (signs & (1u << j)) ? -1.0 : 1.0;
          a(j) = in_s[static_cast<std::size_t>(j)] ? -gamma * sj : sj;
        }
        if (l1_active && a.squaredNorm() == 0.0) continue;
        for (Index j = 0; j < m; ++j) {
          if (zero & (1u << j)) continue;
          Vector e = Vector::Zero(m);
          e(j) = 1.0;
          if (l1_active) e -= (e.dot(a) / a.squaredNorm()) * a;
          for (const Vector& b : basis) e -= e.dot(b) * b;
          const double nrm = std::sqrt(e.dot(e));
          if (nrm > 1e-10) basis.push_back(e / nrm);
        }
        if (basis.empty()) continue;
        const Index k = static_cast<Index>(basis.size());
        Matrix q(m, k);
        for (Index c = 0; c < k; ++c) q.col(c) = basis[static_cast<std::size_t>(c)];
        Matrix h(k, k);
        for (Index r = 0; r < k; ++r)
          for (Index c = 0; c < k; ++c) h(r, c) = q.col(r).dot(g * q.col(c));
        Matrix w;
        const auto ev = jacobi_eigen(h, w);
        for (Index c = 0; c < k; ++c) {
          const Vector u = q * w.col(c);
          for (double flip : {1.0, -1.0}) {
            const Vector v = flip * u;
            bool ok = true;
            for (Index j = 0; j < m && ok; ++j) {
              if (zero & (1u << j)) continue;
              const double sj = (signs & (1u << j)) ? -1.0 : 1.0;
              ok = sj * v(j) >= -1e-9;
            }
            if (ok && in_cone(v, s, gamma, 1e-9)) best = std::min(best, ev[static_cast<std::size_t>(c)]);
          }
        }
      }
    }
  }
  return best;
}

/// Brute-force minimum over a grid of step h on [-1, 1]^3 for m = 3.
inline double re_grid3(const Matrix& g, const IndexSet& s, double gamma, double h = 0.01) {
  double best = std::numeric_limits<double>::infinity();
  const int steps = static_cast<int>(std::lround(2.0 / h));
  Vector v(3);
  for (int a = 0; a <= steps; ++a)
    for (int b = 0; b <= steps; ++b)
      for (int c = 0; c <= steps; ++c) {
        v << -1.0 + a * h, -1.0 + b * h, -1.0 + c * h;
        const double nn = v.squaredNorm();
        if (nn < 1e-12 || !in_cone(v, s, gamma, 0.0)) continue;
        best = std::min(best, v.dot(g * v) / nn);
      }
  return best;
}

/// Instrument covariance written entry by entry from its definition:
/// cov(z_ijl, z_ij'l') = sigma_z^2 [l = l'] ([j = j'] + row_corr [j != j']).
inline Matrix instrument_cov_entrywise(int p, int d, double sigma_z, double row_corr) {
  Matrix c = Matrix::Zero(static_cast<Index>(p) * d, static_cast<Index>(p) * d);
  for (int l = 0; l < d; ++l)
    for (int lp = 0; lp < d; ++lp)
      for (int j = 0; j < p; ++j)
        for (int jp = 0; jp < p; ++jp) {
          if (l != lp) continue;
          c(static_cast<Index>(l) * p + j, static_cast<Index>(lp) * p + jp) =
              sigma_z * sigma_z * (j == jp ? 1.0 : row_corr);
        }
  return c;
}

/// Random design with (1/n) X^T X = I via modified Gram-Schmidt.
inline Matrix orthonormal_design(Index n, Index m, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  Matrix x(n, m);
  for (Index c = 0; c < m; ++c) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = nd(gen);
    for (Index k = 0; k < c; ++k) v -= v.dot(x.col(k)) * x.col(k);
    for (Index k = 0; k < c; ++k) v -= v.dot(x.col(k)) * x.col(k);
    x.col(c) = v / v.norm();
  }
  return x * std::sqrt(static_cast<double>(n));
}

}  // namespace oracle
