#pragma once
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "norad/kinematics.hpp"
#include "norad/linalg.hpp"
#include "norad/numerics.hpp"
#include "norad/vec3.hpp"

namespace norad {

namespace detail {

/// Determinant by LU with partial pivoting; A is copied.
inline double det_lu(Mat A) {
  const std::size_t n = A.rows;
  double d = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(A(i, k)) > std::abs(A(p, k))) p = i;
    if (A(p, k) == 0.0) return 0.0;
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(A(k, j), A(p, j));
      d = -d;
    }
    d *= A(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double m = A(i, k) / A(k, k);
      for (std::size_t j = k; j < n; ++j) A(i, j) -= m * A(k, j);
    }
  }
  return d;
}

}  // namespace detail

/// Pairwise interaction matrix: A_ab = sqrt(1-|z_ab|^2)/|z_ab| off the
/// diagonal (z_ab the relative velocity of a seen from b), zero on it.
struct InteractionMatrix {
  Mat A;
  std::vector<Vec3> z_ab;  // row-major n*n table of relative velocities

  std::size_t size() const { return A.rows; }
  double det() const { return detail::det_lu(A); }
};

inline InteractionMatrix interaction_matrix(const SolitonConfig& cfg) {
  const std::size_t n = cfg.size();
  if (n < 2)
    throw std::invalid_argument("interaction_matrix: needs >= 2 solitons");
  InteractionMatrix m;
  m.A = Mat(n, n);
  m.z_ab.assign(n * n, Vec3{});
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      const Vec3 zab = relative_speed(cfg[a].velocity, cfg[b].velocity);
      const double s = zab.norm();
      if (s == 0.0)
        throw std::invalid_argument("interaction_matrix: coincident velocities");
      m.z_ab[a * n + b] = zab;
      m.A(a, b) = std::sqrt(1.0 - s * s) / s;
    }
  return m;
}

/// Quartic whose positive roots give the admissible velocity ratios of the
/// symmetric collinear 4-soliton family.
inline double admissible_quartic(double y) {
  return 1.0 - 16.0 * y - 2.0 * y * y + y * y * y * y;
}

/// Small positive root of the admissible quartic (~0.0620), bisected to 1e-12.
inline double admissible_ratio_small() {
  static const double r =
      bisect(admissible_quartic, 0.05, 0.08, 1e-14);
  return r;
}

/// Large positive root of the admissible quartic (~2.7664).
inline double admissible_ratio_large() {
  static const double r =
      bisect(admissible_quartic, 2.5, 3.0, 1e-14);
  return r;
}

/// Closed form of det A for the collinear config e1 * (-x1, -x2, x2, x1),
/// 0 < x1 < x2 < 1.
inline double collinear_det(double x1, double x2) {
  if (!(0.0 < x1 && x1 < x2 && x2 < 1.0))
    throw std::domain_error("collinear_det: need 0 < x1 < x2 < 1");
  const double p1 = 1.0 - x1 * x1, p2 = 1.0 - x2 * x2;
  const double q1 = std::pow(x1, 4) - 16.0 * std::pow(x1, 3) * x2 -
                    2.0 * x1 * x1 * x2 * x2 + std::pow(x2, 4);
  const double q2 = std::pow(x1, 4) - 2.0 * x1 * x1 * x2 * x2 -
                    16.0 * x1 * std::pow(x2, 3) + std::pow(x2, 4);
  const double d = x1 * x1 - x2 * x2;
  return p1 * p1 * p2 * p2 * q1 * q2 /
         (16.0 * x1 * x1 * x2 * x2 * std::pow(d, 4));
}

/// The reference admissible family: velocities e1 * (-x, -x/r, x/r, x) with r
/// the large quartic root, so the interaction matrix is singular.  Scales and
/// signs are placeholders (unit scale, alternating handled by the null vector).
inline SolitonConfig collinear_admissible_family(double x = 0.9) {
  if (!(0.0 < x && x < 1.0))
    throw std::domain_error("collinear_admissible_family: need 0 < x < 1");
  const double xi = x / admissible_ratio_large();
  SolitonConfig cfg;
  for (double v : {-x, -xi, xi, x}) {
    Soliton s;
    s.velocity = Vec3{v, 0.0, 0.0};
    cfg.solitons.push_back(s);
  }
  return cfg;
}

/// Null vector of a singular interaction matrix, normalized so the first
/// entry is +1; entries are the scale/sign products lambda_a^{1/2} sigma_a.
inline std::vector<double> find_admissible_scales(const InteractionMatrix& m,
                                                  double tol = 1e-8) {
  const std::size_t n = m.size();
  Svd s = svd(m.A);
  if (s.sigma[n - 1] > tol * s.sigma[0])
    throw std::runtime_error(
        "find_admissible_scales: matrix is not singular at this tolerance");
  std::vector<double> mu(n);
  for (std::size_t i = 0; i < n; ++i) mu[i] = s.V(i, n - 1);

  // Cross-check by inverse iteration on a small diagonal shift.
  Mat shifted = m.A;
  const double eps = 1e-10 * s.sigma[0];
  for (std::size_t i = 0; i < n; ++i) shifted(i, i) += eps;
  std::vector<double> v(n, 1.0 / std::sqrt(double(n)));
  for (int it = 0; it < 8; ++it) {
    v = lu_solve(shifted, v);
    double nn = 0;
    for (double c : v) nn += c * c;
    nn = std::sqrt(nn);
    for (double& c : v) c /= nn;
  }
  double align = 0;
  for (std::size_t i = 0; i < n; ++i) align += v[i] * mu[i];
  double mis = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = v[i] - (align >= 0 ? 1.0 : -1.0) * mu[i];
    mis += d * d;
  }
  if (std::sqrt(mis) > 1e-6)
    throw std::runtime_error(
        "find_admissible_scales: factorization cross-check disagrees");

  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(mu[i]) <= tol)
      throw std::runtime_error(
          "find_admissible_scales: null vector has a vanishing entry");
  const double c = 1.0 / mu[0];
  for (double& x : mu) x *= c;
  return mu;
}

/// Balance residuals r_b = sum_{a != b} mu_a z_ab sqrt(1-|z_ab|^2)/|z_ab|^3.
struct BalanceReport {
  bool balanced = false;
  std::vector<Vec3> residuals;
  double max_norm = 0.0;
};

inline BalanceReport balanced_check(const SolitonConfig& cfg,
                                    const std::vector<double>& mu,
                                    double tol = 1e-8) {
  const std::size_t n = cfg.size();
  if (mu.size() != n)
    throw std::invalid_argument("balanced_check: mu size mismatch");
  BalanceReport rep;
  rep.residuals.assign(n, Vec3{});
  for (std::size_t b = 0; b < n; ++b) {
    Vec3 r{};
    for (std::size_t a = 0; a < n; ++a) {
      if (a == b) continue;
      const Vec3 zab = relative_speed(cfg[a].velocity, cfg[b].velocity);
      const double s = zab.norm();
      r = r + (mu[a] * std::sqrt(1.0 - s * s) / (s * s * s)) * zab;
    }
    rep.residuals[b] = r;
    rep.max_norm = std::max(rep.max_norm, r.norm());
  }
  rep.balanced = rep.max_norm <= tol;
  return rep;
}

/// Order-i correction matrix.  M_ab = -mu_b (1+|z_ab|)^{-i} /
/// (2 |z_ab| gamma_ab^i) off-diagonal, -mu_a i/2 on the diagonal, with
/// mu_a = lambda_a^{1/2} sigma_a.  Mbar is the unit-diagonal normalization
/// M = (-i/2) Mbar diag(mu).  The "variant" form keeps only the regular part
/// of the off-diagonal profile (see strong_matrix).
struct StrongMatrix {
  int order = 0;
  Mat M, Mbar;
  double det_bar = 0.0;
  Mat Mbar_variant;
  double det_bar_variant = 0.0;
  double offdiag_row_max = 0.0;  // max_a sum_{b != a} |Mbar_ab|
};

inline StrongMatrix strong_matrix(const SolitonConfig& cfg,
                                  const std::vector<double>& mu, int order) {
  const std::size_t n = cfg.size();
  if (order < 2) throw std::invalid_argument("strong_matrix: order must be >= 2");
  if (mu.size() != n)
    throw std::invalid_argument("strong_matrix: mu size mismatch");
  StrongMatrix sm;
  sm.order = order;
  sm.M = Mat(n, n);
  sm.Mbar = Mat(n, n);
  sm.Mbar_variant = Mat(n, n);
  const double i = order;
  for (std::size_t a = 0; a < n; ++a) {
    sm.M(a, a) = -mu[a] * i / 2.0;
    sm.Mbar(a, a) = 1.0;
    sm.Mbar_variant(a, a) = 1.0;
    double row = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      const double s =
          relative_speed(cfg[a].velocity, cfg[b].velocity).norm();
      const double ginv = std::sqrt(1.0 - s * s);  // gamma_ab^{-1}
      const double gpow = std::pow(ginv, i);
      sm.M(a, b) = -mu[b] * std::pow(1.0 + s, -i) / (2.0 * s) * gpow;
      sm.Mbar(a, b) = std::pow(1.0 + s, -i) / (i * s) * gpow;
      sm.Mbar_variant(a, b) =
          (1.0 - std::pow(1.0 + s, -i)) / (i * s) * gpow;
      row += std::abs(sm.Mbar(a, b));
    }
    sm.offdiag_row_max = std::max(sm.offdiag_row_max, row);
  }
  sm.det_bar = detail::det_lu(sm.Mbar);
  sm.det_bar_variant = detail::det_lu(sm.Mbar_variant);
  return sm;
}

/// Scan report: explicit determinants for small orders plus an analytic
/// diagonal-dominance certificate for the geometric tail.
struct StrongScanRow {
  int order = 0;
  double det_bar = 0.0;
  double det_bar_variant = 0.0;
  double offdiag_row_max = 0.0;
  double tail_bound = 0.0;  // (42/i) * gamma_inv_max^i
};

struct StrongScanReport {
  std::vector<StrongScanRow> rows;
  double gamma_inv_max = 0.0;  // max over pairs of gamma_ab^{-1}
  double z_inv_max = 0.0;      // max over pairs of |z_ab|^{-1}
  int tail_start = 0;          // first order certified by dominance alone
  bool pass = false;
  int failing_order = -1;
};

inline StrongScanReport strong_admissible_scan(const SolitonConfig& cfg,
                                               const std::vector<double>& mu,
                                               int i_max = 10,
                                               double det_threshold = 1e-3) {
  if (i_max < 2) throw std::invalid_argument("strong_admissible_scan: i_max < 2");
  const std::size_t n = cfg.size();
  StrongScanReport rep;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      const double s =
          relative_speed(cfg[a].velocity, cfg[b].velocity).norm();
      rep.gamma_inv_max = std::max(rep.gamma_inv_max, std::sqrt(1.0 - s * s));
      rep.z_inv_max = std::max(rep.z_inv_max, 1.0 / s);
    }
  rep.pass = true;
  for (int i = 2; i <= i_max; ++i) {
    StrongMatrix sm = strong_matrix(cfg, mu, i);
    StrongScanRow row;
    row.order = i;
    row.det_bar = sm.det_bar;
    row.det_bar_variant = sm.det_bar_variant;
    row.offdiag_row_max = sm.offdiag_row_max;
    row.tail_bound = 42.0 / i * std::pow(rep.gamma_inv_max, i);
    rep.rows.push_back(row);
    if (std::abs(sm.det_bar) < det_threshold && rep.pass) {
      rep.pass = false;
      rep.failing_order = i;
    }
  }
  // Dominance tail: each |Mbar_ab| <= z_inv_max * gamma_inv_max^i / i, so a
  // row sum is below (n-1) z_inv_max gamma_inv_max^i / i <= (42/i) g^i once
  // z_inv_max < 2 and n <= 4; certify from the first order past i_max where
  // the generous bound drops below 1.
  rep.tail_start = i_max + 1;
  while (42.0 / rep.tail_start *
             std::pow(rep.gamma_inv_max, rep.tail_start) >=
         1.0) {
    ++rep.tail_start;
    if (rep.tail_start > 10000) {
      rep.pass = false;
      break;
    }
  }
  return rep;
}

}  // namespace norad
