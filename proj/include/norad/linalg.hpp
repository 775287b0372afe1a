#pragma once
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace norad {

// Dense row-major matrix, small problems only.
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

inline Mat matmul(const Mat& x, const Mat& y) {
  if (x.cols != y.rows) throw std::invalid_argument("matmul: shape mismatch");
  Mat z(x.rows, y.cols);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t k = 0; k < x.cols; ++k) {
      const double v = x(i, k);
      if (v == 0) continue;
      for (std::size_t j = 0; j < y.cols; ++j) z(i, j) += v * y(k, j);
    }
  return z;
}

/// Solve A x = b by LU with partial pivoting; A is copied.
inline std::vector<double> lu_solve(Mat A, std::vector<double> b) {
  const std::size_t n = A.rows;
  if (A.cols != n || b.size() != n) throw std::invalid_argument("lu_solve: shape");
  std::vector<std::size_t> piv(n);
  for (std::size_t i = 0; i < n; ++i) piv[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(A(i, k)) > std::abs(A(p, k))) p = i;
    if (A(p, k) == 0) throw std::runtime_error("lu_solve: singular matrix");
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(A(k, j), A(p, j));
      std::swap(b[k], b[p]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double m = A(i, k) / A(k, k);
      A(i, k) = 0;
      if (m == 0) continue;
      for (std::size_t j = k + 1; j < n; ++j) A(i, j) -= m * A(k, j);
      b[i] -= m * b[k];
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= A(k, j) * b[j];
    b[k] = s / A(k, k);
  }
  return b;
}

struct SymEig {
  std::vector<double> values;  // ascending
  Mat vectors;                 // columns are eigenvectors
};

/// Cyclic Jacobi for symmetric matrices.
inline SymEig sym_eigen(Mat A) {
  const std::size_t n = A.rows;
  if (A.cols != n) throw std::invalid_argument("sym_eigen: not square");
  Mat V(n, n);
  for (std::size_t i = 0; i < n; ++i) V(i, i) = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    if (off < 1e-28 * (1.0 + off)) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(A(p, q)) < 1e-300) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
  }
  SymEig e;
  e.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) e.values[i] = A(i, i);
  // Sort ascending, permuting columns of V.
  e.vectors = Mat(n, n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (e.values[order[j]] < e.values[order[i]]) std::swap(order[i], order[j]);
  std::vector<double> sorted(n);
  for (std::size_t i = 0; i < n; ++i) {
    sorted[i] = e.values[order[i]];
    for (std::size_t k = 0; k < n; ++k) e.vectors(k, i) = V(k, order[i]);
  }
  e.values = sorted;
  return e;
}

struct Svd {
  std::vector<double> sigma;  // descending
  Mat U, V;                   // A = U diag(sigma) V^T
};

/// One-sided Jacobi SVD (rows >= cols).
inline Svd svd(Mat A) {
  const std::size_t m = A.rows, n = A.cols;
  if (m < n) throw std::invalid_argument("svd: needs rows >= cols");
  Mat V(n, n);
  for (std::size_t i = 0; i < n; ++i) V(i, i) = 1.0;
  for (int sweep = 0; sweep < 120; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        double app = 0, aqq = 0, apq = 0;
        for (std::size_t k = 0; k < m; ++k) {
          app += A(k, p) * A(k, p);
          aqq += A(k, q) * A(k, q);
          apq += A(k, p) * A(k, q);
        }
        if (std::abs(apq) <= 1e-16 * std::sqrt(app * aqq) + 1e-300) continue;
        rotated = true;
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < m; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    if (!rotated) break;
  }
  Svd out;
  out.sigma.resize(n);
  out.U = Mat(m, n);
  out.V = Mat(n, n);
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s2 = 0;
    for (std::size_t k = 0; k < m; ++k) s2 += A(k, j) * A(k, j);
    out.sigma[j] = std::sqrt(s2);
    order[j] = j;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (out.sigma[order[j]] > out.sigma[order[i]]) std::swap(order[i], order[j]);
  std::vector<double> sorted(n);
  for (std::size_t jj = 0; jj < n; ++jj) {
    const std::size_t j = order[jj];
    sorted[jj] = out.sigma[j];
    const double inv = out.sigma[j] > 0 ? 1.0 / out.sigma[j] : 0.0;
    for (std::size_t k = 0; k < m; ++k) out.U(k, jj) = A(k, j) * inv;
    for (std::size_t k = 0; k < n; ++k) out.V(k, jj) = V(k, j);
  }
  out.sigma = sorted;
  return out;
}

}  // namespace norad
